#include "hetsq/numerics.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>

#include "hetsq/error.hpp"

namespace hetsq {

namespace {

constexpr int kNodesPerPanel = 16;

void append_panel(std::vector<QuadNode>& out, double a, double b) {
    using Rule = boost::math::quadrature::gauss<double, kNodesPerPanel>;
    const auto& abscissa = Rule::abscissa();
    const auto& weights = Rule::weights();
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    // Boost stores the non-negative half of the symmetric rule.
    for (std::size_t i = 0; i < abscissa.size(); ++i) {
        if (abscissa[i] == 0.0) {
            out.push_back({mid, half * weights[i]});
            continue;
        }
        out.push_back({mid - half * abscissa[i], half * weights[i]});
        out.push_back({mid + half * abscissa[i], half * weights[i]});
    }
}

}  // namespace

std::vector<double> panel_edges(double lo, double hi, std::vector<double> interior) {
    std::vector<double> edges{lo};
    std::sort(interior.begin(), interior.end());
    for (double x : interior) {
        if (x > lo && x < hi && x > edges.back()) edges.push_back(x);
    }
    edges.push_back(hi);
    return edges;
}

std::vector<QuadNode> gauss_legendre_panels(std::span<const double> breakpoints, int total_nodes) {
    if (breakpoints.size() < 2) throw DomainError("quadrature needs at least two breakpoints");
    const double a = breakpoints.front();
    const double b = breakpoints.back();
    if (!(b > a)) throw DomainError("quadrature interval must have positive length");

    const int budget = std::max(1, total_nodes / kNodesPerPanel);
    std::vector<QuadNode> out;
    out.reserve(static_cast<std::size_t>(kNodesPerPanel) *
                (static_cast<std::size_t>(budget) + breakpoints.size()));
    for (std::size_t p = 0; p + 1 < breakpoints.size(); ++p) {
        const double lo = breakpoints[p];
        const double hi = breakpoints[p + 1];
        if (!(hi > lo)) continue;
        const int pieces = std::max(1, static_cast<int>(std::lround(budget * (hi - lo) / (b - a))));
        const double width = (hi - lo) / pieces;
        for (int k = 0; k < pieces; ++k) {
            const double s = lo + k * width;
            const double e = (k + 1 == pieces) ? hi : s + width;
            append_panel(out, s, e);
        }
    }
    std::sort(out.begin(), out.end(), [](const QuadNode& l, const QuadNode& r) { return l.x < r.x; });
    return out;
}

BisectionResult bisect(const std::function<double(double)>& f, double lo, double hi, double flo,
                       double fhi, double ftol, int max_iter) {
    BisectionResult best;
    if (flo == 0.0) return {lo, 0.0, 0, true};
    if (fhi == 0.0) return {hi, 0.0, 0, true};
    if (std::signbit(flo) == std::signbit(fhi)) {
        throw SolverError("bisection endpoints do not bracket a root");
    }
    best.x = std::abs(flo) < std::abs(fhi) ? lo : hi;
    best.fx = std::abs(flo) < std::abs(fhi) ? flo : fhi;
    for (int it = 1; it <= max_iter; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) {
            best.iterations = it;
            best.converged = std::abs(best.fx) < ftol;
            return best;
        }
        const double fm = f(mid);
        if (std::abs(fm) < std::abs(best.fx)) {
            best.x = mid;
            best.fx = fm;
        }
        best.iterations = it;
        if (std::abs(fm) < ftol) {
            best.x = mid;
            best.fx = fm;
            best.converged = true;
            return best;
        }
        if (std::signbit(fm) == std::signbit(flo)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    best.converged = std::abs(best.fx) < ftol;
    return best;
}

}  // namespace hetsq
