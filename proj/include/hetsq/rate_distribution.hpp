#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "hetsq/numerics.hpp"
#include "hetsq/rng.hpp"

namespace hetsq {

// A service-rate distribution F on [lo, hi]: exact CDF, quadrature rule for
// integrals against dF, moments and an inverse-CDF sampler. Immutable and
// cheap to copy (shared state).
class RateDistribution {
public:
    static RateDistribution point_mass(double mu);
    // Atoms are merged when equal; weights must be non-negative and are
    // normalized to sum to one.
    static RateDistribution discrete(std::vector<QuadNode> atoms);
    static RateDistribution uniform(double lo, double hi, int nodes = 256);
    // Absolutely continuous law given by its CDF and density; `kinks` lists
    // interior points where the density is not smooth (used as panel edges).
    static RateDistribution from_density(double lo, double hi, std::function<double(double)> cdf,
                                         std::function<double(double)> pdf,
                                         std::vector<double> kinks = {}, int nodes = 256);

    double lo() const { return state_->lo; }
    double hi() const { return state_->hi; }
    double mean() const { return state_->mean; }
    double variance() const { return state_->variance; }
    bool is_discrete() const { return state_->discrete; }

    double cdf(double mu) const;
    // Density w.r.t. Lebesgue measure; zero for discrete laws.
    double pdf(double mu) const;
    // Smallest mu with cdf(mu) >= u.
    double quantile(double u) const;
    double sample(Rng& rng) const { return quantile(uniform_open(rng)); }

    std::span<const QuadNode> nodes() const { return state_->nodes; }
    double integrate(const std::function<double(double)>& fn) const;
    // Sum of quadrature weights; 1 up to quadrature error.
    double total_mass() const;

private:
    struct State {
        double lo = 0.0;
        double hi = 0.0;
        bool discrete = false;
        std::vector<QuadNode> nodes;
        std::vector<double> cumulative;  // discrete laws only
        std::function<double(double)> cdf;
        std::function<double(double)> pdf;
        double mean = 0.0;
        double variance = 0.0;
    };

    explicit RateDistribution(std::shared_ptr<const State> s) : state_(std::move(s)) {}
    static std::shared_ptr<const State> finish(State s);

    std::shared_ptr<const State> state_;
};

}  // namespace hetsq
