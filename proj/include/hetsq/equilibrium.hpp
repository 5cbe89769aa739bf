#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "hetsq/fairness.hpp"
#include "hetsq/model.hpp"
#include "hetsq/rate_distribution.hpp"

namespace hetsq {

// C(mu, L) = -L f'((1 + L h~)^-1) h~'(mu) / ((1 + L h~)^2 c'(mu)).
// A server with trade-off coefficient a is indifferent at rate mu iff C(mu, L) = a.
double marginal_rate_of_substitution(double mu, double L, const PolicyFunctions& funcs);

// dC/dmu, from the analytic first and second derivatives of f, c and h.
double marginal_rate_derivative(double mu, double L, const PolicyFunctions& funcs);

// Limiting utility f((1 + L h~(mu))^-1) - a c(mu).
double server_utility(double mu, double a, double L, const PolicyFunctions& funcs);

enum class Regime { AtMin, Interior, AtMax };

const char* to_string(Regime r);

struct ServerAttributes {
    double a;
    double mu_min;
    double mu_max;
};

struct BestResponse {
    double mu_star;
    Regime regime;
    double utility;
};

// Shape of C(., L) on a rate interval and the concave-envelope geometry of
// the utility in the cost variable u = c(mu). C either decreases strictly
// (the first-order condition characterizes the optimum) or rises to a single
// peak and then decreases, in which case a server whose lower bound sits
// below the peak compares its lower bound against the tangent point t(lo).
class ResponseGeometry {
public:
    // Throws UnsupportedError when h~ is not strictly decreasing or C is
    // neither decreasing nor single-peaked on the interval.
    ResponseGeometry(PolicyFunctions funcs, double L, RateInterval interval);

    double L() const { return L_; }
    RateInterval interval() const { return interval_; }
    const PolicyFunctions& functions() const { return funcs_; }
    bool monotone() const { return monotone_; }
    // Argmax of C; equals interval.lo when C is decreasing.
    double peak() const { return peak_; }

    double C(double mu) const { return marginal_rate_of_substitution(mu, L_, funcs_); }
    double dC(double mu) const { return marginal_rate_derivative(mu, L_, funcs_); }
    // Utility of idleness f((1 + L h~)^-1).
    double gain(double mu) const;
    // (gain(hi) - gain(lo)) / (c(hi) - c(lo)); C(lo) in the limit hi -> lo.
    double chord(double lo, double hi) const;
    // Point t >= peak where the chord from lo is tangent to the decreasing
    // branch; +inf when it does not exist inside the interval, lo when lo >= peak.
    double tangent(double lo) const;
    // Inverse of tangent: smallest lo whose tangent point is <= mu (mu >= peak),
    // interval.lo when every lower bound qualifies; mu itself when mu < peak.
    double tangent_foot(double mu) const;

    BestResponse respond(const ServerAttributes& attrs) const;

private:
    PolicyFunctions funcs_;
    double L_;
    RateInterval interval_;
    bool monotone_ = true;
    double peak_;
};

// Best responses against a fixed L. The shape check on C runs once at
// construction over `interval`; individual responses are then cheap.
class BestResponder {
public:
    BestResponder(PolicyFunctions funcs, double L, RateInterval interval);

    BestResponse operator()(const ServerAttributes& attrs) const;
    double L() const { return geometry_->L(); }
    const ResponseGeometry& geometry() const { return *geometry_; }

private:
    std::shared_ptr<const ResponseGeometry> geometry_;
};

// One-off best response; the guard is checked on [attrs.mu_min, attrs.mu_max].
BestResponse best_response(const ServerAttributes& attrs, double L, const PolicyFunctions& funcs);

// F(mu | L): law of the best response of a server whose attributes are drawn
// from `dists`, all servers facing the same L. With a independent of the
// bounds and C decreasing, F = F_max + (F_min - F_max)(1 - F_a(C(mu, L))).
// For single-peaked C the density is assembled from one-dimensional integrals
// over the chord region and the CDF is tabulated on first use.
class ResponseDistribution {
public:
    ResponseDistribution(double L, PopulationDistributions dists, PolicyFunctions funcs,
                         int nodes = 0);

    double L() const;
    double cdf(double mu) const;
    double pdf(double mu) const;
    double mean() const { return law_.mean(); }
    double variance() const { return law_.variance(); }
    const RateDistribution& law() const { return law_; }
    const ResponseGeometry& geometry() const;
    // Panel edges used for quadrature (density jumps and kinks).
    const std::vector<double>& breakpoints() const { return breaks_; }

    // (mu, cdf, density) on an equally spaced grid; the density column comes
    // from central differences of the CDF so that reports do not depend on
    // the analytic pdf.
    struct GridRow {
        double mu;
        double cdf;
        double density;
    };
    std::vector<GridRow> tabulate(int points = 2000) const;

    struct Core;

private:
    std::shared_ptr<const Core> core_;
    std::vector<double> breaks_;
    RateDistribution law_;
};

ResponseDistribution response_distribution(double L, const PopulationDistributions& dists,
                                           const PolicyFunctions& funcs);

// Phi(L) = int mu (1 - beta L h~) / (1 + L h~) dF(mu | L).
double equilibrium_residual(double L, const PopulationDistributions& dists,
                            const PolicyFunctions& funcs, double beta);

struct EquilibriumOptions {
    double lambda_n = 100.0;  // arrival rate used for the staffing level N
    int scan_points = 64;
    double tolerance = 1e-12;
    int nodes = 0;  // 0: 512 for decreasing C, 1024 otherwise
};

struct EquilibriumSolution {
    double L_star;
    double residual;
    double mu_bar;
    double sigma2;
    int staffing;
    double bracket_lo;
    double bracket_hi;
    int sign_changes;
    int iterations;
    std::vector<std::pair<double, double>> scan;  // (L, Phi(L))
    ResponseDistribution distribution;
    FairnessDensity fairness;
};

// Root of Phi on [1/(beta h~(mu_min)), 1/(beta h~(mu_max))]. A geometric scan
// locates sign changes first; the smallest root is refined by bisection.
EquilibriumSolution solve_equilibrium(const PopulationDistributions& dists,
                                      const PolicyFunctions& funcs, double beta,
                                      const EquilibriumOptions& opts = {});

enum class GShape { Decreasing, IncreasingConcave, Other };
enum class RegimeClass { AllAtMin, AllAtMax, Indeterminate };

const char* to_string(RegimeClass c);

// Probes n^(alpha-1) f'(n^(alpha-1) x) along `probe_scales` to decide whether
// the marginal utility of idleness vanishes or explodes as n grows.
RegimeClass classify_regime(const PolicyFunctions& funcs, double alpha, GShape g_shape,
                            const std::vector<double>& probe_scales);

// Throws UnsupportedError unless h~ is strictly decreasing on the interval.
void require_decreasing_h_tilde(const PolicyFunctions& funcs, RateInterval interval,
                                int grid_size = 256);

}  // namespace hetsq
