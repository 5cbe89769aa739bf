#include "hetsq/fairness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hetsq/error.hpp"
#include "hetsq/numerics.hpp"

namespace hetsq {

FairnessMeasure special_policy_fairness(const RoutingPolicy& policy, const RateDistribution& F) {
    switch (policy.kind) {
        case PolicyKind::SlowestServerFirst:
            return FairnessMeasure::point_mass(F.hi());
        case PolicyKind::FastestServerFirst:
            return FairnessMeasure::point_mass(F.lo());
        case PolicyKind::LongestIdleServerFirst:
        case PolicyKind::UniformRandom: {
            std::vector<double> support;
            std::vector<double> weights;
            for (const auto& q : F.nodes()) {
                support.push_back(q.x);
                weights.push_back(q.w * q.x);
            }
            auto m = FairnessMeasure::from_weights(std::move(support), std::move(weights));
            m.density = [mean = F.mean()](double mu) { return mu / mean; };
            return m;
        }
        case PolicyKind::HRandom:
            break;
    }
    throw UnsupportedError("h-random fairness below alpha = 1 has no closed form");
}

double FairnessDensity::operator()(double mu) const { return 1.0 / ((1.0 + L * h(mu) / mu) * norm); }

FairnessDensity fairness_density(const RateDistribution& F, const ScalarFn& h, double L) {
    if (!(L > 0.0)) throw DomainError("L must be positive");
    double z = 0.0;
    double m = 0.0;
    for (const auto& q : F.nodes()) {
        const double v = 1.0 / (1.0 + L * h(q.x) / q.x);
        z += q.w * v;
        m += q.w * q.x * v;
    }
    FairnessDensity d;
    d.L = L;
    d.norm = z;
    d.moment = m / z;
    d.h = h;
    return d;
}

double fairness_equation(const RateDistribution& F, const ScalarFn& h, double beta, double L) {
    double acc = 0.0;
    for (const auto& q : F.nodes()) acc += q.w * q.x / (1.0 + L * h(q.x) / q.x);
    return (1.0 + beta) * acc / F.mean() - beta;
}

FairnessSolution solve_L(const RateDistribution& F, const ScalarFn& h, double beta, double tolerance) {
    if (!(beta > 0.0)) throw DomainError("beta must be positive");
    double ht_min = std::numeric_limits<double>::infinity();
    double ht_max = 0.0;
    auto visit = [&](double mu) {
        const double ht = h(mu) / mu;
        if (!(ht > 0.0) || !std::isfinite(ht)) throw DomainError("h must be positive and finite on the support");
        ht_min = std::min(ht_min, ht);
        ht_max = std::max(ht_max, ht);
    };
    visit(F.lo());
    visit(F.hi());
    for (const auto& q : F.nodes()) visit(q.x);

    double lo = 1.0 / (beta * ht_max);
    double hi = 1.0 / (beta * ht_min);
    auto G = [&](double L) { return fairness_equation(F, h, beta, L); };
    double glo = G(lo);
    double ghi = G(hi);
    int expansions = 0;
    while (glo < 0.0 && expansions < 60) {
        lo *= 0.5;
        glo = G(lo);
        ++expansions;
    }
    expansions = 0;
    while (ghi > 0.0 && expansions < 60) {
        hi *= 2.0;
        ghi = G(hi);
        ++expansions;
    }
    if (glo < 0.0 || ghi > 0.0) {
        std::ostringstream diag;
        diag.precision(17);
        diag << "bracket=[" << lo << ", " << hi << "] G(lo)=" << glo << " G(hi)=" << ghi;
        throw SolverError("fairness equation has no sign change on the expanded bracket", diag.str());
    }
    const auto root = bisect(G, lo, hi, glo, ghi, tolerance);
    if (!root.converged) {
        std::ostringstream diag;
        diag.precision(17);
        diag << "L=" << root.x << " G=" << root.fx << " iterations=" << root.iterations;
        throw SolverError("fairness equation did not reach tolerance", diag.str());
    }
    return {root.x, root.fx, root.iterations, lo, hi, fairness_density(F, h, root.x)};
}

Attainability check_attainable(const std::function<double(double)>& g, const RateDistribution& F,
                               double beta, double mu_bar) {
    if (!(beta > 0.0) || !(mu_bar > 0.0)) throw DomainError("beta and mu_bar must be positive");
    double moment = 0.0;
    for (const auto& q : F.nodes()) moment += q.w * q.x * g(q.x);
    const double ceiling = (1.0 + beta) * moment / (beta * mu_bar);
    Attainability out{false, std::numeric_limits<double>::infinity(),
                      std::numeric_limits<double>::infinity(), 0.0, ceiling};
    auto visit = [&](double mu) {
        const double v = g(mu);
        out.lower_slack = std::min(out.lower_slack, v);
        out.upper_slack = std::min(out.upper_slack, ceiling - v);
    };
    for (const auto& q : F.nodes()) visit(q.x);
    out.slack = std::min(out.lower_slack, out.upper_slack);
    out.attainable = out.lower_slack > 0.0 && out.upper_slack > 0.0;
    return out;
}

ScalarFn h_for_target_density(const std::function<double(double)>& g, const RateDistribution& F,
                              double beta, double lambda_bar) {
    if (!(lambda_bar > 0.0)) throw DomainError("lambda_bar must be positive");
    const double mu_bar = F.mean();
    const auto check = check_attainable(g, F, beta, mu_bar);
    if (!(check.lower_slack > 0.0)) {
        throw DomainError("target density is not strictly positive (min g = " +
                          std::to_string(check.lower_slack) + ")");
    }
    if (!(check.upper_slack > 0.0)) {
        throw DomainError("target density reaches the ceiling (1+beta)<iota,eta>/(beta mu_bar) = " +
                          std::to_string(check.ceiling));
    }
    double moment = 0.0;
    for (const auto& q : F.nodes()) moment += q.w * q.x * g(q.x);
    ScalarFn h;
    h.value = [g, beta, lambda_bar, mu_bar, moment](double mu) {
        const double gm = g(mu) / moment;
        return ((1.0 + beta) / mu_bar - beta * gm) * mu / (beta * lambda_bar * gm);
    };
    return h;
}

double conditional_idleness_alpha1(double mu, double L, const ScalarFn& h) {
    if (!(L >= 0.0)) throw DomainError("L must be non-negative");
    if (!(mu > 0.0)) throw DomainError("mu must be positive");
    return 1.0 / (1.0 + L * h(mu) / mu);
}

double conditional_idleness_idle_order(double mu, const ModelParams& params, const RateDistribution& F) {
    params.validate();
    if (!(mu > 0.0)) throw DomainError("mu must be positive");
    const double mean = F.mean();
    if (params.alpha == 1.0) {
        const double moment = solve_L(F, power_fn(0.0), params.beta).density.moment;
        const double b = params.beta / moment;
        return mu * b / (mu * b + 1.0);
    }
    const double var = F.variance();
    return params.beta * mu * std::pow(params.lambda_bar, params.alpha - 1.0) *
           std::pow(mean, 2.0 - params.alpha) / (var + mean * mean);
}

}  // namespace hetsq
