#pragma once

#include <functional>
#include <vector>

namespace hetsq {

// Probability measure over service rates. Discrete support with weights; an
// optional density vs the reference law F is carried along when known.
struct FairnessMeasure {
    std::vector<double> support;
    std::vector<double> weights;
    std::function<double(double)> density;
    // Set when the measure is the degenerate placeholder returned before the
    // epsilon-shift instant is reached.
    bool degenerate = false;

    static FairnessMeasure point_mass(double mu);
    // Normalizes the weights; throws DomainError on negative or all-zero weights.
    static FairnessMeasure from_weights(std::vector<double> support, std::vector<double> weights);

    double total() const;
    double moment() const;  // <iota, eta>
    // Mass in [lo, hi).
    double mass(double lo, double hi) const;
    // Masses on the cells of `edges` (the last cell is closed on the right).
    std::vector<double> binned(const std::vector<double>& edges) const;
};

// 0.5 * sum |p_i - q_i|.
double total_variation(const std::vector<double>& p, const std::vector<double>& q);

std::vector<double> equal_width_edges(double lo, double hi, int bins);

}  // namespace hetsq
