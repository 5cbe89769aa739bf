#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <variant>
#include <vector>

#include "hetsq/rng.hpp"

namespace hetsq {

// System parameters of the n-th system: arrivals at rate n * lambda_bar,
// staffing with safety coefficient beta and exponent alpha, exponential(gamma)
// patience.
struct ModelParams {
    double lambda_bar = 100.0;
    double beta = 0.3;
    double alpha = 1.0;
    double gamma = 1.0;
    int n = 1;

    void validate() const;
    double arrival_rate() const { return static_cast<double>(n) * lambda_bar; }
};

// lambda/mu_bar + beta (lambda/mu_bar)^alpha, before rounding.
double offered_staffing(double lambda_n, double mu_bar, double beta, double alpha);

// Integer server count: the real-valued staffing rounded up. Values within a
// few ulps above an integer (0.3 * 100 == 30.000000000000004) round down to it.
int staffing_level(double lambda_n, double mu_bar, double beta, double alpha);

// A twice-differentiable scalar function. Derivatives may be left empty when
// only values are needed (e.g. a routing weight built from a target density).
struct ScalarFn {
    std::function<double(double)> value;
    std::function<double(double)> d1;
    std::function<double(double)> d2;

    double operator()(double x) const { return value(x); }
    double derivative(double x) const;
    double second_derivative(double x) const;
    bool has_derivatives() const { return static_cast<bool>(d1) && static_cast<bool>(d2); }
};

ScalarFn power_fn(double exponent);             // x^e
ScalarFn log_fn();                              // log x
ScalarFn negative_power_fn(double s);           // -x^{-s}
ScalarFn scaled(const ScalarFn& fn, double k);  // k * fn

// The servers' utility pieces and the operator's routing weight:
// f (utility of idleness), c (effort cost), h (h-random routing weight).
struct PolicyFunctions {
    ScalarFn f;
    ScalarFn c;
    ScalarFn h;

    // h~(mu) = h(mu) / mu and its first two derivatives.
    double h_tilde(double mu) const { return h(mu) / mu; }
    double h_tilde_d1(double mu) const;
    double h_tilde_d2(double mu) const;
};

// f(x) = x^p, c(mu) = mu^q, h(mu) = mu^r.
struct PowerFamily {
    double p = 1.0;
    double q = 2.0;
    double r = -1.0;

    PolicyFunctions functions() const;
};

struct RateInterval {
    double lo;
    double hi;
};

// (mu_min_k, mu_max_k) are the order statistics of two independent uniforms on
// [mu_min, mu_max]: joint density 2 / (mu_max - mu_min)^2 on the triangle.
struct OrderedUniformPair {};

// mu_min_k ~ U[mu_min, min_upper] independent of mu_max_k ~ U[max_lower, mu_max],
// with min_upper <= max_lower.
struct IndependentUniformBounds {
    double min_upper;
    double max_lower;
};

using BoundsLaw = std::variant<OrderedUniformPair, IndependentUniformBounds>;

struct PopulationDistributions {
    double mu_min = 0.01;
    double mu_max = 0.5;
    BoundsLaw bounds = OrderedUniformPair{};
    double a_min = 0.01;  // trade-off coefficient ~ U[a_min, a_max]
    double a_max = 25.0;
    bool independent_a = true;

    void validate() const;
    RateInterval interval() const { return {mu_min, mu_max}; }

    double cdf_individual_min(double mu) const;  // P(mu_min_k <= mu)
    double cdf_individual_max(double mu) const;  // P(mu_max_k <= mu)
    double pdf_individual_min(double mu) const;
    double pdf_individual_max(double mu) const;
    double cdf_a(double a) const;
    double pdf_a(double a) const;
    // Points where the marginal densities are not smooth.
    std::vector<double> kinks() const;

    // Joint density of (mu_min_k, mu_max_k) and its partial integrals.
    double joint_pdf(double lo, double hi) const;
    // int_{hi > x} joint_pdf(lo, hi) dhi, for x >= lo.
    double upper_tail_given_min(double lo, double x) const;
    // int_{x < lo < hi} joint_pdf(lo, hi) dlo, for x <= hi.
    double lower_mass_given_max(double hi, double x) const;
    // P(a <= mu_min_k <= b, mu_max_k > c), for b <= c.
    double box_probability(double a, double b, double c) const;

    std::pair<double, double> sample_bounds(Rng& rng) const;
    double sample_a(Rng& rng) const;
};

struct Server {
    double a;
    double mu_min;
    double mu_max;
    double mu;
};

struct ServerPopulation {
    std::vector<Server> servers;

    std::size_t size() const { return servers.size(); }
    bool empty() const { return servers.empty(); }
    std::vector<double> rates() const;
    // Throws DomainError unless lo <= mu_min_k <= mu_k <= mu_max_k <= hi for all k.
    void validate(RateInterval bounds) const;

    // Population where every server is pinned at the given rates (a = 0, bounds = rate).
    static ServerPopulation from_rates(const std::vector<double>& rates);
};

ServerPopulation sample_population(const PopulationDistributions& dists, int count,
                                   std::uint64_t seed);

// True iff C(mu, L) is strictly decreasing on a grid of grid_size points over
// the interval; guards the first-order characterization of best responses.
bool verify_first_order_monotone(const PolicyFunctions& funcs, double L, RateInterval interval,
                                 int grid_size = 256);

}  // namespace hetsq
