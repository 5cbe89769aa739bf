#include "hetsq/limits.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "hetsq/error.hpp"
#include "hetsq/fairness.hpp"
#include "hetsq/rng.hpp"

namespace hetsq {

double FluidSpec::drift() const { return beta * std::pow(lambda_bar, alpha) * std::pow(mu_bar, 1.0 - alpha); }

double fluid_closed_form(const FluidSpec& spec, double t) {
    if (!(spec.moment > 0.0)) throw DomainError("fairness moment must be positive");
    if (t < 0.0) throw DomainError("time must be non-negative");
    if (spec.xi0 > 0.0) throw DomainError("xi0 must be non-positive");
    const double K = spec.drift() / spec.moment;
    return -K + (spec.xi0 + K) * std::exp(-spec.moment * t);
}

std::vector<TrajectoryPoint> fluid_integrate(const FluidSpec& spec, const std::vector<double>& t_grid, int substeps) {
    if (t_grid.empty()) throw DomainError("time grid is empty");
    if (substeps < 1) throw DomainError("substeps must be at least 1");
    if (spec.xi0 > 0.0) throw DomainError("xi0 must be non-positive");
    const double D = spec.drift();
    auto rhs = [&](double t, double x) { return -D + spec.moment_of(t) * std::max(-x, 0.0); };

    std::vector<TrajectoryPoint> out{{t_grid.front(), spec.xi0}};
    double x = spec.xi0;
    for (std::size_t i = 1; i < t_grid.size(); ++i) {
        const double span = t_grid[i] - t_grid[i - 1];
        if (!(span > 0.0)) throw DomainError("step size must be positive");
        const double h = span / substeps;
        // Moment evaluated from the right of the interval start and the left
        // of its end so that a jump on a grid point is handled exactly.
        const double t0 = t_grid[i - 1];
        for (int s = 0; s < substeps; ++s) {
            const double t = t0 + s * h;
            const double ta = s == 0 ? std::nextafter(t, t_grid[i]) : t;
            const double tb = s == substeps - 1 ? std::nextafter(t_grid[i], t0) : t + h;
            const double k1 = rhs(ta, x);
            const double k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1);
            const double k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2);
            const double k4 = rhs(tb, x + h * k3);
            x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        out.push_back({t_grid[i], x});
    }
    return out;
}

double DiffusionSpec::zeta1_variance() const {
    return sigma2 * std::pow(lambda_bar, alpha) * std::pow(mu_bar, -alpha);
}

double DiffusionSpec::drift_constant() const { return beta * std::sqrt(lambda_bar * mu_bar); }

DiffusionResult diffusion_simulate(const DiffusionSpec& spec, const DiffusionOptions& opts) {
    if (!(opts.dt > 0.0)) throw DomainError("dt must be positive");
    if (!(opts.horizon > opts.dt)) throw DomainError("horizon must exceed dt");
    if (opts.paths < 1) throw DomainError("paths must be at least 1");
    if (spec.lambda_bar < 0.0 || spec.sigma2 < 0.0) throw DomainError("variance parameters must be non-negative");

    const auto steps = static_cast<long>(std::llround(opts.horizon / opts.dt));
    const long keep_from = steps / 2;
    const double noise = std::sqrt(2.0 * spec.lambda_bar * opts.dt);
    const double b = spec.drift_constant();
    const double zsd = std::sqrt(spec.zeta1_variance());

    DiffusionResult res;
    double var_acc = 0.0;
    double above_acc = 0.0;
    for (int p = 0; p < opts.paths; ++p) {
        Rng rng = make_rng(opts.seed, static_cast<std::uint64_t>(p), Stream::Diffusion);
        std::normal_distribution<double> normal(0.0, 1.0);
        const double zeta1 = spec.zeta1_mode == Zeta1Mode::Sampled ? zsd * normal(rng) : 0.0;
        double x = spec.xi0;
        double sum = 0.0;
        double sum2 = 0.0;
        long above = 0;
        if (p == 0 && opts.record_every > 0) res.sample_path.push_back({0.0, x});
        for (long s = 1; s <= steps; ++s) {
            const double drift = -(b + zeta1) + spec.moment * std::max(-x, 0.0) - spec.gamma * std::max(x, 0.0);
            x += drift * opts.dt + (noise > 0.0 ? noise * normal(rng) : 0.0);
            if (s > keep_from) {
                sum += x;
                sum2 += x * x;
                if (x > opts.delta) ++above;
            }
            if (p == 0 && opts.record_every > 0 && s % opts.record_every == 0) {
                res.sample_path.push_back({static_cast<double>(s) * opts.dt, x});
            }
        }
        const auto cnt = static_cast<double>(steps - keep_from);
        const double m = sum / cnt;
        res.path_means.push_back(m);
        var_acc += std::max(0.0, sum2 / cnt - m * m);
        above_acc += static_cast<double>(above) / cnt;
    }
    const double P = opts.paths;
    res.mean = std::accumulate(res.path_means.begin(), res.path_means.end(), 0.0) / P;
    res.variance = var_acc / P;
    res.fraction_above = above_acc / P;
    if (opts.paths > 1) {
        double ss = 0.0;
        for (double m : res.path_means) ss += (m - res.mean) * (m - res.mean);
        res.mean_se = std::sqrt(ss / (P - 1.0) / P);
    }
    return res;
}

double stationary_scaled_idleness(const ModelParams& params, double mu_bar, double fairness_moment) {
    if (!(fairness_moment > 0.0)) throw DomainError("fairness moment must be positive");
    if (!(mu_bar > 0.0)) throw DomainError("mean service rate must be positive");
    return params.beta * std::pow(params.lambda_bar, params.alpha) * std::pow(mu_bar, 1.0 - params.alpha) /
           fairness_moment;
}

double AllocationState::total() const { return std::accumulate(mass.begin(), mass.end(), 0.0); }

double AllocationState::mu_bar() const {
    double m = 0.0;
    double z = 0.0;
    for (std::size_t i = 0; i < F_mass.size(); ++i) {
        m += midpoint(i) * F_mass[i];
        z += F_mass[i];
    }
    return m / z;
}

RateDistribution AllocationState::discretized_F() const {
    std::vector<QuadNode> atoms;
    for (std::size_t i = 0; i < F_mass.size(); ++i) {
        if (F_mass[i] > 0.0) atoms.push_back({midpoint(i), F_mass[i]});
    }
    return RateDistribution::discrete(std::move(atoms));
}

AllocationState allocation_grid(const RateDistribution& F, double beta, double lambda_bar, int cells) {
    if (cells < 1) throw DomainError("cells must be at least 1");
    AllocationState s;
    const double lo = F.lo();
    const double hi = F.hi() > F.lo() ? F.hi() : F.lo() * (1.0 + 1e-9) + 1e-12;
    for (int i = 0; i <= cells; ++i) s.edges.push_back(lo + (hi - lo) * i / cells);
    s.edges.back() = hi;
    double prev = 0.0;
    for (int i = 1; i <= cells; ++i) {
        const double c = i == cells ? 1.0 : F.cdf(s.edges[static_cast<std::size_t>(i)]);
        s.F_mass.push_back(std::max(0.0, c - prev));
        prev = std::max(prev, c);
    }
    const double mb = s.mu_bar();
    for (double f : s.F_mass) s.mass.push_back(beta * lambda_bar / mb * f);
    return s;
}

std::pair<AllocationState, double> allocation_fixed_point(const AllocationState& like, const ModelParams& params,
                                                          const ScalarFn& h) {
    const RateDistribution Fd = like.discretized_F();
    const double L = solve_L(Fd, h, params.beta, 1e-12).L;
    AllocationState s = like;
    const double scale = params.lambda_bar / like.mu_bar() * (1.0 + params.beta);
    for (std::size_t i = 0; i < s.cells(); ++i) {
        const double mu = s.midpoint(i);
        s.mass[i] = scale * s.F_mass[i] / (1.0 + L * h(mu) / mu);
    }
    return {s, L};
}

namespace {

struct AllocationRhs {
    std::vector<double> mu;
    std::vector<double> hv;
    std::vector<double> inflow;
    double lambda_bar;

    AllocationRhs(const AllocationState& s, const ModelParams& params, const ScalarFn& h)
        : lambda_bar(params.lambda_bar) {
        const double scale = params.lambda_bar / s.mu_bar() * (1.0 + params.beta);
        for (std::size_t i = 0; i < s.cells(); ++i) {
            mu.push_back(s.midpoint(i));
            hv.push_back(h(mu.back()));
            inflow.push_back(scale * mu.back() * s.F_mass[i]);
        }
    }

    double weight(const std::vector<double>& psi) const {
        double H = 0.0;
        for (std::size_t i = 0; i < psi.size(); ++i) H += hv[i] * psi[i];
        return H;
    }

    void operator()(const std::vector<double>& psi, std::vector<double>& out, double t) const {
        const double H = weight(psi);
        if (!(H > 0.0)) {
            std::ostringstream os;
            os << "<h, psi> vanished at t = " << t;
            throw SimulationError(os.str());
        }
        for (std::size_t i = 0; i < psi.size(); ++i) {
            out[i] = inflow[i] - mu[i] * psi[i] - lambda_bar * hv[i] * psi[i] / H;
        }
    }

    double fastest(const std::vector<double>& psi) const {
        const double H = weight(psi);
        double r = 0.0;
        for (std::size_t i = 0; i < psi.size(); ++i) r = std::max(r, mu[i] + lambda_bar * hv[i] / H);
        return r;
    }
};

void rk4_advance(const AllocationRhs& f, std::vector<double>& psi, double t0, double t1, double max_step) {
    const std::size_t n = psi.size();
    std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
    double t = t0;
    while (t < t1) {
        double h = std::min(max_step, 0.5 / f.fastest(psi));
        if (!(h > 0.0) || !std::isfinite(h)) h = max_step;
        if (t + h > t1) h = t1 - t;
        f(psi, k1, t);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = psi[i] + 0.5 * h * k1[i];
        f(tmp, k2, t + 0.5 * h);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = psi[i] + 0.5 * h * k2[i];
        f(tmp, k3, t + 0.5 * h);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = psi[i] + h * k3[i];
        f(tmp, k4, t + h);
        for (std::size_t i = 0; i < n; ++i) psi[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        t = (t1 - (t + h) < 1e-14 * std::max(1.0, t1)) ? t1 : t + h;
    }
}

}  // namespace

std::vector<double> allocation_drift(const AllocationState& state, const ModelParams& params, const ScalarFn& h) {
    AllocationRhs f(state, params, h);
    std::vector<double> out(state.cells());
    f(state.mass, out, state.t);
    return out;
}

std::vector<AllocationState> allocation_fluid_integrate(const AllocationState& initial, const ModelParams& params,
                                                        const ScalarFn& h, const std::vector<double>& t_grid,
                                                        double max_step) {
    if (!initial.idle_regime) throw UnsupportedError("allocation fluid is only defined in the idle regime");
    if (t_grid.empty()) throw DomainError("time grid is empty");
    if (!(max_step > 0.0)) throw DomainError("step size must be positive");
    if (initial.mass.size() != initial.F_mass.size() || initial.edges.size() != initial.mass.size() + 1) {
        throw DomainError("allocation state is inconsistent");
    }
    for (double m : initial.mass) {
        if (m < 0.0) throw DomainError("allocation masses must be non-negative");
    }
    AllocationRhs f(initial, params, h);
    std::vector<AllocationState> out;
    AllocationState cur = initial;
    cur.t = t_grid.front();
    out.push_back(cur);
    for (std::size_t i = 1; i < t_grid.size(); ++i) {
        if (!(t_grid[i] > t_grid[i - 1])) throw DomainError("step size must be positive");
        rk4_advance(f, cur.mass, t_grid[i - 1], t_grid[i], max_step);
        cur.t = t_grid[i];
        out.push_back(cur);
    }
    return out;
}

double normalized_total_variation(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw DomainError("vectors differ in length");
    const double sp = std::accumulate(p.begin(), p.end(), 0.0);
    const double sq = std::accumulate(q.begin(), q.end(), 0.0);
    if (!(sp > 0.0) || !(sq > 0.0)) throw DomainError("masses must have positive totals");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] / sp - q[i] / sq);
    return 0.5 * acc;
}

AllocationRun allocation_fluid_converge(const AllocationState& initial, const ModelParams& params, const ScalarFn& h,
                                        const AllocationState& target, double drift_tol, double max_time) {
    if (!initial.idle_regime) throw UnsupportedError("allocation fluid is only defined in the idle regime");
    AllocationRhs f(initial, params, h);
    AllocationRun run;
    run.final_state = initial;
    auto& s = run.final_state;
    std::vector<double> d(s.cells());
    auto record = [&] {
        f(s.mass, d, s.t);
        double md = 0.0;
        for (double v : d) md = std::max(md, std::abs(v));
        run.trace.push_back({s.t, md, normalized_total_variation(s.mass, target.mass)});
        return md;
    };
    double md = record();
    while (md >= drift_tol && s.t < max_time) {
        rk4_advance(f, s.mass, s.t, s.t + 1.0, 0.05);
        s.t += 1.0;
        md = record();
    }
    run.converged = md < drift_tol;
    return run;
}

}  // namespace hetsq
