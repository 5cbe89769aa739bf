#pragma once

#include "hetsq/fairness_measure.hpp"
#include "hetsq/model.hpp"
#include "hetsq/rate_distribution.hpp"
#include "hetsq/routing.hpp"

namespace hetsq {

// Limiting fairness of the special policies for 1/2 <= alpha < 1:
// SSF -> delta at the top of the support, FSF -> delta at the bottom,
// LISF and uniform routing -> density mu / mean(F) vs F.
FairnessMeasure special_policy_fairness(const RoutingPolicy& policy, const RateDistribution& F);

// g(mu) = (1 + L h~(mu))^-1 / Z, Z = int (1 + L h~)^-1 dF, and its first moment.
struct FairnessDensity {
    double L = 0.0;
    double norm = 1.0;    // Z
    double moment = 0.0;  // int mu g dF
    ScalarFn h;

    double operator()(double mu) const;
};

FairnessDensity fairness_density(const RateDistribution& F, const ScalarFn& h, double L);

struct FairnessSolution {
    double L;
    double residual;  // G(L)
    int iterations;
    double bracket_lo;
    double bracket_hi;
    FairnessDensity density;
};

// G(L) = int mu (1 + beta) / (mean(F) (1 + L h~(mu))) dF - beta.
double fairness_equation(const RateDistribution& F, const ScalarFn& h, double beta, double L);

// Root of G by bisection on [1/(beta max h~), 1/(beta min h~)] (extremes over
// the support of F), expanded geometrically while the endpoint signs are wrong.
FairnessSolution solve_L(const RateDistribution& F, const ScalarFn& h, double beta,
                         double tolerance = 1e-10);

struct Attainability {
    bool attainable;
    double lower_slack;  // min g
    double upper_slack;  // min (ceiling - g)
    double slack;        // min of the two
    double ceiling;      // (1 + beta) <iota, eta> / (beta mu_bar)
};

// Strict bounds 0 < g < ceiling checked on the support of F (quadrature
// nodes for continuous F, atoms for discrete F).
Attainability check_attainable(const std::function<double(double)>& g, const RateDistribution& F,
                               double beta, double mu_bar);

// Routing weight that makes g the stationary fairness density. With this h
// the solution of G(L) = 0 is L = lambda_bar.
ScalarFn h_for_target_density(const std::function<double(double)>& g, const RateDistribution& F,
                              double beta, double lambda_bar);

// (1 + L h~(mu))^-1.
double conditional_idleness_alpha1(double mu, double L, const ScalarFn& h);

// Stationary idle fraction of a rate-mu server under an idle-time-order
// policy. For alpha = 1 this is mu b / (mu b + 1), b = beta / <iota, eta> with
// eta the h = 1 fairness measure; for alpha < 1 it is the n^(1-alpha)-scaled
// value beta mu lambda_bar^(alpha-1) mean^(2-alpha) / (variance + mean^2).
double conditional_idleness_idle_order(double mu, const ModelParams& params, const RateDistribution& F);

}  // namespace hetsq
