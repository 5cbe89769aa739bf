#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace hetsq {

struct QuadNode {
    double x;
    double w;
};

// Composite Gauss-Legendre rule on [breakpoints.front(), breakpoints.back()].
// Interior breakpoints are panel edges (kinks of the integrand); each
// kink-free panel is subdivided into 16-node sub-panels, roughly
// `total_nodes` nodes overall and at least one sub-panel per panel.
std::vector<QuadNode> gauss_legendre_panels(std::span<const double> breakpoints,
                                            int total_nodes = 256);

struct BisectionResult {
    double x = 0.0;
    double fx = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Bisection for a sign change of f on [lo, hi] given f(lo), f(hi) of
// opposite sign (or one of them zero). Stops once |f| < ftol, the bracket
// shrinks below machine resolution, or max_iter is reached; in the last
// case the best midpoint is returned with converged = false.
BisectionResult bisect(const std::function<double(double)>& f, double lo, double hi,
                       double flo, double fhi, double ftol, int max_iter = 200);

// Sorted, de-duplicated copy restricted to [lo, hi], endpoints included.
std::vector<double> panel_edges(double lo, double hi, std::vector<double> interior);

}  // namespace hetsq
