#include "hetsq/rate_distribution.hpp"

#include <algorithm>
#include <cmath>

#include "hetsq/error.hpp"

namespace hetsq {

std::shared_ptr<const RateDistribution::State> RateDistribution::finish(State s) {
    double m0 = 0.0;
    double m1 = 0.0;
    for (const auto& q : s.nodes) {
        m0 += q.w;
        m1 += q.w * q.x;
    }
    s.mean = m1 / m0;
    double var = 0.0;
    for (const auto& q : s.nodes) var += q.w * (q.x - s.mean) * (q.x - s.mean);
    s.variance = std::max(0.0, var / m0);
    return std::make_shared<const State>(std::move(s));
}

RateDistribution RateDistribution::point_mass(double mu) { return discrete({{mu, 1.0}}); }

RateDistribution RateDistribution::discrete(std::vector<QuadNode> atoms) {
    if (atoms.empty()) throw DomainError("discrete distribution needs at least one atom");
    std::sort(atoms.begin(), atoms.end(), [](const QuadNode& a, const QuadNode& b) { return a.x < b.x; });
    State s;
    s.discrete = true;
    double total = 0.0;
    for (const auto& a : atoms) {
        if (!(a.w >= 0.0) || !(a.x > 0.0)) throw DomainError("atoms need positive location and non-negative weight");
        total += a.w;
        if (!s.nodes.empty() && s.nodes.back().x == a.x) {
            s.nodes.back().w += a.w;
        } else {
            s.nodes.push_back(a);
        }
    }
    if (!(total > 0.0)) throw DomainError("discrete distribution has zero total weight");
    double run = 0.0;
    for (auto& q : s.nodes) {
        q.w /= total;
        run += q.w;
        s.cumulative.push_back(run);
    }
    s.cumulative.back() = 1.0;
    s.lo = s.nodes.front().x;
    s.hi = s.nodes.back().x;
    return RateDistribution(finish(std::move(s)));
}

RateDistribution RateDistribution::uniform(double lo, double hi, int nodes) {
    if (!(lo > 0.0 && hi > lo)) throw DomainError("uniform law needs 0 < lo < hi");
    const double width = hi - lo;
    return from_density(
        lo, hi, [lo, width](double mu) { return std::clamp((mu - lo) / width, 0.0, 1.0); },
        [lo, hi, width](double mu) { return (mu >= lo && mu <= hi) ? 1.0 / width : 0.0; }, {}, nodes);
}

RateDistribution RateDistribution::from_density(double lo, double hi, std::function<double(double)> cdf,
                                                std::function<double(double)> pdf, std::vector<double> kinks,
                                                int nodes) {
    if (!(lo > 0.0 && hi > lo)) throw DomainError("continuous law needs 0 < lo < hi");
    State s;
    s.lo = lo;
    s.hi = hi;
    const auto edges = panel_edges(lo, hi, std::move(kinks));
    s.nodes = gauss_legendre_panels(edges, nodes);
    for (auto& q : s.nodes) q.w *= pdf(q.x);
    s.cdf = std::move(cdf);
    s.pdf = std::move(pdf);
    return RateDistribution(finish(std::move(s)));
}

double RateDistribution::cdf(double mu) const {
    const auto& s = *state_;
    if (mu < s.lo) return 0.0;
    if (mu >= s.hi) return 1.0;
    if (s.discrete) {
        auto it = std::upper_bound(s.nodes.begin(), s.nodes.end(), mu,
                                   [](double v, const QuadNode& q) { return v < q.x; });
        if (it == s.nodes.begin()) return 0.0;
        return s.cumulative[static_cast<std::size_t>(std::distance(s.nodes.begin(), it)) - 1];
    }
    return std::clamp(s.cdf(mu), 0.0, 1.0);
}

double RateDistribution::pdf(double mu) const {
    if (state_->discrete) return 0.0;
    return state_->pdf(mu);
}

double RateDistribution::quantile(double u) const {
    const auto& s = *state_;
    if (s.discrete) {
        auto it = std::lower_bound(s.cumulative.begin(), s.cumulative.end(), u);
        if (it == s.cumulative.end()) return s.hi;
        return s.nodes[static_cast<std::size_t>(std::distance(s.cumulative.begin(), it))].x;
    }
    if (u <= 0.0) return s.lo;
    if (u >= 1.0) return s.hi;
    double a = s.lo;
    double b = s.hi;
    for (int i = 0; i < 200; ++i) {
        const double m = 0.5 * (a + b);
        if (m <= a || m >= b) break;
        if (s.cdf(m) >= u) {
            b = m;
        } else {
            a = m;
        }
    }
    return b;
}

double RateDistribution::integrate(const std::function<double(double)>& fn) const {
    double acc = 0.0;
    for (const auto& q : state_->nodes) acc += q.w * fn(q.x);
    return acc;
}

double RateDistribution::total_mass() const {
    double acc = 0.0;
    for (const auto& q : state_->nodes) acc += q.w;
    return acc;
}

}  // namespace hetsq
