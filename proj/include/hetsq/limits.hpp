#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "hetsq/model.hpp"
#include "hetsq/rate_distribution.hpp"

namespace hetsq {

// xi' = -beta lambda_bar^alpha mu_bar^(1-alpha) + m(t) (xi)^-, xi(0) = xi0 <= 0.
struct FluidSpec {
    double xi0 = 0.0;
    double beta = 0.3;
    double lambda_bar = 100.0;
    double mu_bar = 1.0;
    double alpha = 1.0;
    double moment = 1.0;                  // <iota, eta> when constant
    std::function<double(double)> moment_at;  // optional time-varying moment

    double drift() const;  // beta lambda_bar^alpha mu_bar^(1-alpha)
    double moment_of(double t) const { return moment_at ? moment_at(t) : moment; }
};

// -K + (xi0 + K) exp(-moment t), K = drift / moment.
double fluid_closed_form(const FluidSpec& spec, double t);

struct TrajectoryPoint {
    double t;
    double value;
};

// Classical RK4 between consecutive grid times, `substeps` steps per interval.
// The grid must be strictly increasing; put discontinuities of the moment on
// grid points to keep fourth-order accuracy.
std::vector<TrajectoryPoint> fluid_integrate(const FluidSpec& spec, const std::vector<double>& t_grid,
                                             int substeps = 10);

enum class Zeta1Mode { FixedZero, Sampled };

// d xi = [-(beta (lambda_bar mu_bar)^(1/2) + zeta1) + m (xi)^- - gamma (xi)^+] dt
//        + sqrt(2 lambda_bar) dW.
struct DiffusionSpec {
    double xi0 = 0.0;
    double lambda_bar = 100.0;
    double mu_bar = 1.0;
    double sigma2 = 0.0;  // variance of F
    double beta = 0.3;
    double gamma = 1.0;
    double moment = 1.0;
    double alpha = 0.5;
    Zeta1Mode zeta1_mode = Zeta1Mode::FixedZero;

    double zeta1_variance() const;  // sigma2 lambda_bar^alpha mu_bar^-alpha
    double drift_constant() const;  // beta (lambda_bar mu_bar)^(1/2)
};

struct DiffusionOptions {
    double dt = 1e-3;
    double horizon = 100.0;
    int paths = 16;
    std::uint64_t seed = 1;
    double delta = 0.1;      // threshold for the fraction of time above +delta
    int record_every = 0;    // keep every k-th step of path 0 (0: none)
};

struct DiffusionResult {
    // Time averages over the final half of the horizon, averaged over paths;
    // the standard errors are across paths.
    double mean = 0.0;
    double mean_se = 0.0;
    double variance = 0.0;
    double fraction_above = 0.0;
    std::vector<double> path_means;
    std::vector<TrajectoryPoint> sample_path;
};

// Euler-Maruyama; path i uses the diffusion stream of (seed, i).
DiffusionResult diffusion_simulate(const DiffusionSpec& spec, const DiffusionOptions& opts);

// beta lambda_bar^alpha mu_bar^(1-alpha) / moment.
double stationary_scaled_idleness(const ModelParams& params, double mu_bar, double fairness_moment);

// Cell masses of the scaled idle allocation psi on a rate grid, together
// with the masses of F on the same cells. Integrals against F use the cell
// midpoints.
struct AllocationState {
    std::vector<double> edges;
    std::vector<double> F_mass;
    std::vector<double> mass;
    bool idle_regime = true;  // only xi <= 0 is supported
    double t = 0.0;

    std::size_t cells() const { return mass.size(); }
    double midpoint(std::size_t i) const { return 0.5 * (edges[i] + edges[i + 1]); }
    double total() const;
    // Mean of the discretized F.
    double mu_bar() const;
    RateDistribution discretized_F() const;
};

// Equal-width cells on [F.lo(), F.hi()] with the masses of F; psi is set to
// beta lambda_bar / mu_bar times F (idleness spread in proportion to F).
AllocationState allocation_grid(const RateDistribution& F, double beta, double lambda_bar, int cells = 200);

// Fixed point g_bar F of the allocation equation on the grid of `like`, with
// g_bar = (lambda_bar / mu_bar)(1 + beta) / (1 + L h~), L solving the
// fairness equation for the discretized F. Returns the state and L.
std::pair<AllocationState, double> allocation_fixed_point(const AllocationState& like, const ModelParams& params,
                                                          const ScalarFn& h);

// Right-hand side of the cellwise equation.
std::vector<double> allocation_drift(const AllocationState& state, const ModelParams& params, const ScalarFn& h);

// RK4 with steps of at most min(max_step, 0.5 / fastest cell rate). Returns the
// state at every grid time. Throws SimulationError with the time when
// <h, psi> vanishes.
std::vector<AllocationState> allocation_fluid_integrate(const AllocationState& initial, const ModelParams& params,
                                                        const ScalarFn& h, const std::vector<double>& t_grid,
                                                        double max_step = 0.05);

struct AllocationTracePoint {
    double t;
    double max_drift;  // sup over cells of |d psi / dt|
    double tv;         // total variation to the target after normalizing both
};

struct AllocationRun {
    AllocationState final_state;
    std::vector<AllocationTracePoint> trace;
    bool converged = false;
};

// Integrates in unit time blocks until the maximal drift drops below
// `drift_tol` or `max_time` is reached, tracing the distance to `target`.
AllocationRun allocation_fluid_converge(const AllocationState& initial, const ModelParams& params, const ScalarFn& h,
                                        const AllocationState& target, double drift_tol = 1e-11,
                                        double max_time = 2000.0);

// 0.5 sum |p/sum p - q/sum q|.
double normalized_total_variation(const std::vector<double>& p, const std::vector<double>& q);

}  // namespace hetsq
