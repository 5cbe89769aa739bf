#include "hetsq/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <mutex>
#include <sstream>

#include "hetsq/error.hpp"
#include "hetsq/numerics.hpp"

namespace hetsq {

double marginal_rate_of_substitution(double mu, double L, const PolicyFunctions& funcs) {
    const double cp = funcs.c.derivative(mu);
    if (cp == 0.0) throw DomainError("c'(mu) vanishes; marginal rate of substitution undefined");
    const double d = 1.0 + L * funcs.h_tilde(mu);
    return -L * funcs.f.derivative(1.0 / d) * funcs.h_tilde_d1(mu) / (d * d * cp);
}

double marginal_rate_derivative(double mu, double L, const PolicyFunctions& funcs) {
    const double ht = funcs.h_tilde(mu);
    const double ht1 = funcs.h_tilde_d1(mu);
    const double ht2 = funcs.h_tilde_d2(mu);
    const double d = 1.0 + L * ht;
    const double d1 = L * ht1;
    const double y = 1.0 / d;
    const double y1 = -d1 / (d * d);
    const double fp = funcs.f.derivative(y);
    const double fpp = funcs.f.second_derivative(y);
    const double cp = funcs.c.derivative(mu);
    const double cpp = funcs.c.second_derivative(mu);

    const double num = -L * fp * ht1;
    const double num1 = -L * (fpp * y1 * ht1 + fp * ht2);
    const double den = d * d * cp;
    const double den1 = 2.0 * d * d1 * cp + d * d * cpp;
    return (num1 * den - num * den1) / (den * den);
}

double server_utility(double mu, double a, double L, const PolicyFunctions& funcs) {
    return funcs.f(1.0 / (1.0 + L * funcs.h_tilde(mu))) - a * funcs.c(mu);
}

const char* to_string(Regime r) {
    switch (r) {
        case Regime::AtMin: return "at_min";
        case Regime::Interior: return "interior";
        case Regime::AtMax: return "at_max";
    }
    return "unknown";
}

void require_decreasing_h_tilde(const PolicyFunctions& funcs, RateInterval interval, int grid_size) {
    const double step = (interval.hi - interval.lo) / (grid_size - 1);
    double prev = funcs.h_tilde(interval.lo);
    for (int i = 1; i < grid_size; ++i) {
        const double mu = (i + 1 == grid_size) ? interval.hi : interval.lo + i * step;
        const double cur = funcs.h_tilde(mu);
        if (!(cur < prev)) {
            throw UnsupportedError("h~ must be strictly decreasing on [mu_min, mu_max]");
        }
        prev = cur;
    }
}

namespace {

constexpr int kShapeGrid = 512;
constexpr double kInf = std::numeric_limits<double>::infinity();

double integrate_on(const std::function<double(double)>& fn, double a, double b,
                    const std::vector<double>& kinks, int nodes = 48) {
    if (!(b > a)) return 0.0;
    const auto edges = panel_edges(a, b, kinks);
    double acc = 0.0;
    for (const auto& q : gauss_legendre_panels(edges, nodes)) acc += q.w * fn(q.x);
    return acc;
}

}  // namespace

ResponseGeometry::ResponseGeometry(PolicyFunctions funcs, double L, RateInterval interval)
    : funcs_(std::move(funcs)), L_(L), interval_(interval), peak_(interval.lo) {
    if (!(L > 0.0)) throw DomainError("L must be positive");
    if (!(interval.hi >= interval.lo && interval.lo > 0.0)) throw DomainError("invalid rate interval");
    if (interval.hi == interval.lo) return;
    require_decreasing_h_tilde(funcs_, interval_);

    std::vector<double> xs(kShapeGrid);
    std::vector<double> cs(kShapeGrid);
    const double step = (interval.hi - interval.lo) / (kShapeGrid - 1);
    for (int i = 0; i < kShapeGrid; ++i) {
        xs[static_cast<std::size_t>(i)] = (i + 1 == kShapeGrid) ? interval.hi : interval.lo + i * step;
        cs[static_cast<std::size_t>(i)] = C(xs[static_cast<std::size_t>(i)]);
        if (!std::isfinite(cs[static_cast<std::size_t>(i)])) {
            throw UnsupportedError("C(mu, L) is not finite on the rate interval");
        }
    }
    const auto k = static_cast<std::size_t>(std::distance(cs.begin(), std::max_element(cs.begin(), cs.end())));
    for (std::size_t i = 1; i < cs.size(); ++i) {
        const bool ok = i <= k ? cs[i] > cs[i - 1] : cs[i] < cs[i - 1];
        if (!ok) {
            throw UnsupportedError("C(mu, L) is neither strictly decreasing nor single-peaked");
        }
    }
    if (k == 0) return;
    monotone_ = false;
    if (k + 1 == cs.size()) {
        peak_ = interval.hi;
        return;
    }
    const double a = xs[k - 1];
    const double b = xs[k + 1];
    const double da = dC(a);
    const double db = dC(b);
    peak_ = (da > 0.0 && db < 0.0)
                ? bisect([this](double mu) { return dC(mu); }, a, b, da, db, 0.0).x
                : xs[k];
}

double ResponseGeometry::gain(double mu) const { return funcs_.f(1.0 / (1.0 + L_ * funcs_.h_tilde(mu))); }

double ResponseGeometry::chord(double lo, double hi) const {
    if (hi - lo <= 1e-9 * hi) return C(0.5 * (lo + hi));
    return (gain(hi) - gain(lo)) / (funcs_.c(hi) - funcs_.c(lo));
}

double ResponseGeometry::tangent(double lo) const {
    if (lo >= peak_) return lo;
    const double top = interval_.hi;
    if (peak_ >= top) return kInf;
    const double g_lo = gain(lo);
    const double c_lo = funcs_.c(lo);
    auto chi = [&](double t) { return gain(t) - g_lo - C(t) * (funcs_.c(t) - c_lo); };
    const double x_top = chi(top);
    if (x_top <= 0.0) return kInf;
    const double x_peak = chi(peak_);
    if (x_peak >= 0.0) return peak_;
    return bisect(chi, peak_, top, x_peak, x_top, 0.0).x;
}

double ResponseGeometry::tangent_foot(double mu) const {
    if (mu < peak_) return mu;
    const double bottom = interval_.lo;
    const double g_mu = gain(mu);
    const double c_mu = funcs_.c(mu);
    const double slope = C(mu);
    auto eta = [&](double lo) { return g_mu - slope * (c_mu - funcs_.c(lo)) - gain(lo); };
    const double e_bottom = eta(bottom);
    if (e_bottom >= 0.0) return bottom;
    const double e_peak = eta(peak_);
    if (e_peak <= 0.0) return peak_;
    return bisect(eta, bottom, peak_, e_bottom, e_peak, 0.0).x;
}

BestResponse ResponseGeometry::respond(const ServerAttributes& attrs) const {
    const double slack = 1e-12 * interval_.hi;
    if (!(attrs.mu_min >= interval_.lo - slack && attrs.mu_max <= interval_.hi + slack &&
          attrs.mu_min <= attrs.mu_max)) {
        throw DomainError("server bounds fall outside the rate interval of the best responder");
    }
    auto at = [&](double mu, Regime r) { return BestResponse{mu, r, server_utility(mu, attrs.a, L_, funcs_)}; };
    const double lo = attrs.mu_min;
    const double hi = attrs.mu_max;
    if (hi == lo) return at(lo, Regime::AtMin);

    // Start of the stretch where the first-order condition applies; below it
    // the envelope is a chord anchored at lo.
    double from = lo;
    if (lo < peak_) {
        const double t = tangent(lo);
        if (t >= hi) return attrs.a >= chord(lo, hi) ? at(lo, Regime::AtMin) : at(hi, Regime::AtMax);
        if (attrs.a >= C(t)) return at(lo, Regime::AtMin);
        from = t;
    }
    const double c_from = C(from);
    if (attrs.a >= c_from) return at(lo, Regime::AtMin);
    const double c_hi = C(hi);
    if (attrs.a <= c_hi) return at(hi, Regime::AtMax);
    auto excess = [&](double mu) { return C(mu) - attrs.a; };
    const auto root = bisect(excess, from, hi, c_from - attrs.a, c_hi - attrs.a, 0.0);
    return at(root.x, Regime::Interior);
}

BestResponder::BestResponder(PolicyFunctions funcs, double L, RateInterval interval)
    : geometry_(std::make_shared<const ResponseGeometry>(std::move(funcs), L, interval)) {}

BestResponse BestResponder::operator()(const ServerAttributes& attrs) const { return geometry_->respond(attrs); }

BestResponse best_response(const ServerAttributes& attrs, double L, const PolicyFunctions& funcs) {
    return BestResponder(funcs, L, {attrs.mu_min, attrs.mu_max})(attrs);
}

struct ResponseDistribution::Core {
    PopulationDistributions dists;
    ResponseGeometry geo;
    std::vector<double> breaks;

    mutable std::once_flag table_once;
    mutable std::vector<double> table_x;
    mutable std::vector<double> table_cum;

    Core(PopulationDistributions d, ResponseGeometry g) : dists(std::move(d)), geo(std::move(g)) {}

    double cdf(double mu) const {
        if (mu <= dists.mu_min) return 0.0;
        if (mu >= dists.mu_max) return 1.0;
        if (!geo.monotone()) return tabulated_cdf(mu);
        const double fmin = dists.cdf_individual_min(mu);
        const double fmax = dists.cdf_individual_max(mu);
        return fmax + (fmin - fmax) * (1.0 - dists.cdf_a(geo.C(mu)));
    }

    double pdf(double mu) const {
        if (mu <= dists.mu_min || mu >= dists.mu_max) return 0.0;
        return std::max(0.0, geo.monotone() ? pdf_decreasing(mu) : pdf_single_peak(mu));
    }

    double pdf_decreasing(double mu) const {
        const double fmin = dists.cdf_individual_min(mu);
        const double fmax = dists.cdf_individual_max(mu);
        const double pmin = dists.pdf_individual_min(mu);
        const double pmax = dists.pdf_individual_max(mu);
        const double c = geo.C(mu);
        const double pa = dists.pdf_a(c);
        double out = pmax + (pmin - pmax) * (1.0 - dists.cdf_a(c));
        if (pa != 0.0) out -= (fmin - fmax) * pa * geo.dC(mu);
        return out;
    }

    // Density of the best response as the sum of three pieces: servers that
    // stop at their own lower bound, servers that go to their upper bound, and
    // servers at an interior first-order point on the decreasing branch.
    double pdf_single_peak(double mu) const {
        const double peak = geo.peak();
        const double top = dists.mu_max;
        const auto kinks = dists.kinks();
        double out = 0.0;

        if (mu >= peak) {
            out += (1.0 - dists.cdf_a(geo.C(mu))) * dists.pdf_individual_min(mu);
        } else {
            const double t = geo.tangent(mu);
            const double upper = std::min(t, top);
            out += integrate_on(
                [&](double hi) { return dists.joint_pdf(mu, hi) * (1.0 - dists.cdf_a(geo.chord(mu, hi))); },
                mu, upper, kinks);
            if (t < top) out += (1.0 - dists.cdf_a(geo.C(t))) * dists.upper_tail_given_min(mu, t);
        }

        const double foot = geo.tangent_foot(mu);
        if (mu >= peak) out += dists.cdf_a(geo.C(mu)) * dists.lower_mass_given_max(mu, foot);
        out += integrate_on([&](double lo) { return dists.joint_pdf(lo, mu) * dists.cdf_a(geo.chord(lo, mu)); },
                            dists.mu_min, foot, kinks);

        if (mu > peak) {
            const double pa = dists.pdf_a(geo.C(mu));
            if (pa != 0.0) out += pa * (-geo.dC(mu)) * dists.box_probability(foot, mu, mu);
        }
        return out;
    }

    void build_table() const {
        constexpr int kCells = 512;
        std::vector<double> edges = equal_width_edges(dists.mu_min, dists.mu_max, kCells);
        edges.insert(edges.end(), breaks.begin(), breaks.end());
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
        table_x = edges;
        table_cum.assign(edges.size(), 0.0);
        for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
            table_cum[i + 1] = table_cum[i] + cell_mass(edges[i], edges[i + 1]);
        }
        const double total = table_cum.back();
        for (double& v : table_cum) v /= total;
    }

    double cell_mass(double a, double b) const {
        if (!(b > a)) return 0.0;
        const double edges[2] = {a, b};
        double acc = 0.0;
        for (const auto& q : gauss_legendre_panels(edges, 16)) acc += q.w * pdf(q.x);
        return acc;
    }

    double tabulated_cdf(double mu) const {
        std::call_once(table_once, [this] { build_table(); });
        auto it = std::upper_bound(table_x.begin(), table_x.end(), mu);
        const auto i = static_cast<std::size_t>(std::distance(table_x.begin(), it)) - 1;
        const double cell = table_cum[i + 1] - table_cum[i];
        const double raw_cell = cell_mass(table_x[i], table_x[i + 1]);
        const double part = raw_cell > 0.0 ? cell * cell_mass(table_x[i], mu) / raw_cell : 0.0;
        return std::clamp(table_cum[i] + part, 0.0, 1.0);
    }
};

namespace {

std::vector<double> panel_breaks(const PopulationDistributions& dists, const ResponseGeometry& geo) {
    std::vector<double> out = dists.kinks();
    const double lo = dists.mu_min;
    const double hi = dists.mu_max;
    const double from = geo.monotone() ? lo : geo.peak();
    if (!geo.monotone()) {
        out.push_back(geo.peak());
        const double t = geo.tangent(lo);
        if (t < hi) out.push_back(t);
        if (geo.peak() < hi) out.push_back(geo.tangent_foot(hi));
    }
    if (from < hi) {
        const double c_from = geo.C(from);
        const double c_hi = geo.C(hi);
        for (double level : {dists.a_max, dists.a_min}) {
            if (c_from > level && c_hi < level) {
                auto f = [&](double mu) { return geo.C(mu) - level; };
                out.push_back(bisect(f, from, hi, c_from - level, c_hi - level, 0.0).x);
            }
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::remove_if(out.begin(), out.end(), [&](double x) { return !(x > lo && x < hi); }), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::shared_ptr<ResponseDistribution::Core> make_core(double L, PopulationDistributions dists,
                                                       PolicyFunctions funcs) {
    dists.validate();
    if (!dists.independent_a) {
        throw UnsupportedError("response distribution requires a independent of the rate bounds");
    }
    ResponseGeometry geo(std::move(funcs), L, dists.interval());
    auto core = std::make_shared<ResponseDistribution::Core>(std::move(dists), std::move(geo));
    core->breaks = panel_breaks(core->dists, core->geo);
    return core;
}

}  // namespace

ResponseDistribution::ResponseDistribution(double L, PopulationDistributions dists, PolicyFunctions funcs,
                                           int nodes)
    : core_(make_core(L, std::move(dists), std::move(funcs))),
      breaks_(core_->breaks),
      law_(RateDistribution::from_density(
          core_->dists.mu_min, core_->dists.mu_max, [c = core_](double mu) { return c->cdf(mu); },
          [c = core_](double mu) { return c->pdf(mu); }, breaks_,
          nodes > 0 ? nodes : (core_->geo.monotone() ? 512 : 1024))) {}

const ResponseGeometry& ResponseDistribution::geometry() const { return core_->geo; }

double ResponseDistribution::L() const { return core_->geo.L(); }
double ResponseDistribution::cdf(double mu) const { return core_->cdf(mu); }
double ResponseDistribution::pdf(double mu) const { return core_->pdf(mu); }

std::vector<ResponseDistribution::GridRow> ResponseDistribution::tabulate(int points) const {
    if (points < 3) throw DomainError("tabulation needs at least three points");
    const double lo = core_->dists.mu_min;
    const double hi = core_->dists.mu_max;
    const double step = (hi - lo) / (points - 1);
    std::vector<double> xs(static_cast<std::size_t>(points));
    std::vector<double> cs(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        xs[i] = (i + 1 == xs.size()) ? hi : lo + static_cast<double>(i) * step;
        cs[i] = cdf(xs[i]);
    }
    std::vector<GridRow> rows(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const std::size_t l = i == 0 ? 0 : i - 1;
        const std::size_t r = i + 1 == xs.size() ? i : i + 1;
        rows[i] = {xs[i], cs[i], (cs[r] - cs[l]) / (xs[r] - xs[l])};
    }
    return rows;
}

ResponseDistribution response_distribution(double L, const PopulationDistributions& dists,
                                           const PolicyFunctions& funcs) {
    return ResponseDistribution(L, dists, funcs);
}

namespace {

double residual_on(const RateDistribution& F, double L, const PolicyFunctions& funcs, double beta) {
    double acc = 0.0;
    for (const auto& q : F.nodes()) {
        const double lh = L * funcs.h_tilde(q.x);
        acc += q.w * q.x * (1.0 - beta * lh) / (1.0 + lh);
    }
    return acc;
}

}  // namespace

double equilibrium_residual(double L, const PopulationDistributions& dists, const PolicyFunctions& funcs,
                            double beta) {
    if (!(beta > 0.0)) throw DomainError("beta must be positive");
    return residual_on(ResponseDistribution(L, dists, funcs).law(), L, funcs, beta);
}

EquilibriumSolution solve_equilibrium(const PopulationDistributions& dists, const PolicyFunctions& funcs,
                                      double beta, const EquilibriumOptions& opts) {
    if (!(beta > 0.0)) throw DomainError("beta must be positive");
    if (opts.scan_points < 2) throw DomainError("scan needs at least two points");
    dists.validate();
    require_decreasing_h_tilde(funcs, dists.interval());

    const double lo = 1.0 / (beta * funcs.h_tilde(dists.mu_min));
    const double hi = 1.0 / (beta * funcs.h_tilde(dists.mu_max));
    auto phi = [&](double L) {
        return residual_on(ResponseDistribution(L, dists, funcs, opts.nodes).law(), L, funcs, beta);
    };

    std::vector<std::pair<double, double>> scan;
    const double ratio = std::pow(hi / lo, 1.0 / (opts.scan_points - 1));
    for (int i = 0; i < opts.scan_points; ++i) {
        const double L = (i + 1 == opts.scan_points) ? hi : lo * std::pow(ratio, i);
        scan.emplace_back(L, phi(L));
    }

    int changes = 0;
    int first = -1;
    for (std::size_t i = 0; i + 1 < scan.size(); ++i) {
        const double a = scan[i].second;
        const double b = scan[i + 1].second;
        const bool change = (a > 0.0 && b <= 0.0) || (a < 0.0 && b >= 0.0) || (a == 0.0 && i == 0);
        if (change) {
            ++changes;
            if (first < 0) first = static_cast<int>(i);
        }
    }
    auto dump = [&] {
        std::ostringstream os;
        os.precision(17);
        for (const auto& [L, v] : scan) os << L << ',' << v << '\n';
        return os.str();
    };
    if (first < 0) throw SolverError("equilibrium residual has no sign change on the bracket", dump());

    const auto& [a, fa] = scan[static_cast<std::size_t>(first)];
    const auto& [b, fb] = scan[static_cast<std::size_t>(first) + 1];
    const auto root = bisect(phi, a, b, fa, fb, opts.tolerance);
    if (!root.converged && !(std::abs(root.fx) < 1e-9)) {
        throw SolverError("equilibrium bisection did not converge", dump());
    }

    ResponseDistribution dist(root.x, dists, funcs, opts.nodes);
    const double mu_bar = dist.mean();
    auto fairness = fairness_density(dist.law(), funcs.h, root.x);
    return {root.x,
            root.fx,
            mu_bar,
            dist.variance(),
            staffing_level(opts.lambda_n, mu_bar, beta, 1.0),
            lo,
            hi,
            changes,
            root.iterations,
            std::move(scan),
            std::move(dist),
            std::move(fairness)};
}

const char* to_string(RegimeClass c) {
    switch (c) {
        case RegimeClass::AllAtMin: return "all_at_min";
        case RegimeClass::AllAtMax: return "all_at_max";
        case RegimeClass::Indeterminate: return "indeterminate";
    }
    return "unknown";
}

RegimeClass classify_regime(const PolicyFunctions& funcs, double alpha, GShape g_shape,
                            const std::vector<double>& probe_scales) {
    if (probe_scales.size() < 2) throw DomainError("classify_regime needs at least two probe scales");
    for (std::size_t i = 0; i < probe_scales.size(); ++i) {
        if (!(probe_scales[i] > 0.0) || (i > 0 && !(probe_scales[i] > probe_scales[i - 1]))) {
            throw DomainError("probe scales must be positive and increasing");
        }
    }
    if (g_shape == GShape::Decreasing) return RegimeClass::AllAtMin;

    // -1: tends to zero, +1: diverges, 0: neither.
    int verdict = 2;
    for (double x : {0.25, 0.5, 1.0}) {
        std::vector<double> v;
        for (double n : probe_scales) {
            const double s = std::pow(n, alpha - 1.0);
            v.push_back(s * funcs.f.derivative(s * x));
        }
        int local = 0;
        const bool positive = std::all_of(v.begin(), v.end(), [](double y) { return std::isfinite(y) && y > 0.0; });
        if (positive) {
            const double slope = std::log(v.back() / v.front()) /
                                 std::log(probe_scales.back() / probe_scales.front());
            const bool down = std::is_sorted(v.rbegin(), v.rend(), std::less<>());
            const bool up = std::is_sorted(v.begin(), v.end(), std::less<>());
            if (down && slope < -0.05) local = -1;
            if (up && slope > 0.05) local = 1;
        }
        if (verdict == 2) verdict = local;
        if (verdict != local) verdict = 0;
    }
    if (verdict == -1) return RegimeClass::AllAtMin;
    if (verdict == 1 && g_shape == GShape::IncreasingConcave) return RegimeClass::AllAtMax;
    return RegimeClass::Indeterminate;
}

}  // namespace hetsq
