#include "hetsq/fairness_measure.hpp"

#include <algorithm>
#include <cmath>

#include "hetsq/error.hpp"

namespace hetsq {

FairnessMeasure FairnessMeasure::point_mass(double mu) {
    FairnessMeasure m;
    m.support = {mu};
    m.weights = {1.0};
    m.density = [](double) { return 1.0; };
    return m;
}

FairnessMeasure FairnessMeasure::from_weights(std::vector<double> support, std::vector<double> weights) {
    if (support.size() != weights.size()) throw DomainError("support and weights differ in length");
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw DomainError("fairness weights must be non-negative");
        total += w;
    }
    if (!(total > 0.0)) throw DomainError("fairness weights sum to zero");
    for (double& w : weights) w /= total;
    FairnessMeasure m;
    m.support = std::move(support);
    m.weights = std::move(weights);
    return m;
}

double FairnessMeasure::total() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
}

double FairnessMeasure::moment() const {
    double s = 0.0;
    for (std::size_t i = 0; i < support.size(); ++i) s += support[i] * weights[i];
    return s;
}

double FairnessMeasure::mass(double lo, double hi) const {
    double s = 0.0;
    for (std::size_t i = 0; i < support.size(); ++i) {
        if (support[i] >= lo && support[i] < hi) s += weights[i];
    }
    return s;
}

std::vector<double> FairnessMeasure::binned(const std::vector<double>& edges) const {
    if (edges.size() < 2) throw DomainError("binning needs at least two edges");
    std::vector<double> out(edges.size() - 1, 0.0);
    for (std::size_t i = 0; i < support.size(); ++i) {
        const double x = support[i];
        if (x < edges.front() || x > edges.back()) continue;
        auto it = std::upper_bound(edges.begin(), edges.end(), x);
        auto b = static_cast<std::size_t>(std::distance(edges.begin(), it));
        b = std::clamp<std::size_t>(b, 1, out.size()) - 1;
        out[b] += weights[i];
    }
    return out;
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw DomainError("total variation of vectors of different length");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
    return 0.5 * s;
}

std::vector<double> equal_width_edges(double lo, double hi, int bins) {
    if (bins < 1) throw DomainError("bins must be at least 1");
    if (!(hi >= lo)) throw DomainError("bin range is reversed");
    std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
    for (int i = 0; i <= bins; ++i) edges[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / bins;
    edges.back() = hi;
    return edges;
}

}  // namespace hetsq
