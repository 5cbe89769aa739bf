#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "hetsq/error.hpp"
#include "hetsq/fairness.hpp"
#include "hetsq/limits.hpp"

using namespace hetsq;

namespace {

std::vector<double> grid(double t_end, int steps) {
    std::vector<double> t;
    for (int i = 0; i <= steps; ++i) t.push_back(t_end * i / steps);
    return t;
}

}  // namespace

TEST_CASE("fluid closed form") {
    FluidSpec s;
    s.beta = 0.3;
    s.lambda_bar = 1.0;
    s.mu_bar = 1.0;
    s.moment = 1.0;
    s.xi0 = 0.0;
    CHECK(fluid_closed_form(s, 1e6) == doctest::Approx(-0.3));
    CHECK(fluid_closed_form(s, 0.0) == 0.0);
    s.xi0 = -2.0;
    CHECK(fluid_closed_form(s, 1.0) == doctest::Approx(-0.3 - 1.7 * std::exp(-1.0)).epsilon(1e-14));

    FluidSpec half;
    half.alpha = 0.5;
    half.beta = 0.25;
    half.lambda_bar = 4.0;
    half.mu_bar = 1.0;
    half.moment = 1.0;
    CHECK(half.drift() == doctest::Approx(0.5));
    CHECK(fluid_closed_form(half, 50.0) == doctest::Approx(-0.5).epsilon(1e-12));

    s.moment = 0.0;
    CHECK_THROWS_AS(fluid_closed_form(s, 1.0), DomainError);
    s.moment = 1.0;
    CHECK_THROWS_AS(fluid_closed_form(s, -1.0), DomainError);
    s.xi0 = 0.5;
    CHECK_THROWS_AS(fluid_closed_form(s, 1.0), DomainError);
}

TEST_CASE("fluid integration") {
    FluidSpec s;
    s.xi0 = -3.0;
    s.mu_bar = 0.19;
    s.moment = 0.3;
    const auto t = grid(10.0, 100);
    const auto path = fluid_integrate(s, t);
    double worst = 0.0;
    for (const auto& p : path) worst = std::max(worst, std::abs(p.value - fluid_closed_form(s, p.t)));
    CHECK(worst < 1e-8);

    // The path satisfies its integral equation (trapezoid on a fine grid).
    const auto fine = fluid_integrate(s, grid(2.0, 4000));
    double integral = 0.0;
    for (std::size_t i = 1; i < fine.size(); ++i) {
        auto rhs = [&](double x) { return -s.drift() + s.moment * std::max(-x, 0.0); };
        integral += 0.5 * (fine[i].t - fine[i - 1].t) * (rhs(fine[i].value) + rhs(fine[i - 1].value));
    }
    CHECK(fine.back().value == doctest::Approx(s.xi0 + integral).epsilon(1e-7));

    // Started at zero the path leaves with slope -drift.
    FluidSpec z = s;
    z.xi0 = 0.0;
    const auto start = fluid_integrate(z, {0.0, 1e-6});
    CHECK(start.back().value / 1e-6 == doctest::Approx(-z.drift()).epsilon(1e-5));

    // A moment that jumps at t = 1 against two spliced closed forms.
    FluidSpec sw = s;
    sw.moment_at = [](double u) { return u < 1.0 ? 0.5 : 2.0; };
    const auto spl = fluid_integrate(sw, grid(3.0, 30));
    FluidSpec first = s;
    first.moment = 0.5;
    const double at_one = fluid_closed_form(first, 1.0);
    FluidSpec second = s;
    second.moment = 2.0;
    second.xi0 = at_one;
    worst = 0.0;
    for (const auto& p : spl) {
        const double exact = p.t <= 1.0 ? fluid_closed_form(first, p.t) : fluid_closed_form(second, p.t - 1.0);
        worst = std::max(worst, std::abs(p.value - exact));
    }
    CHECK(worst < 1e-8);

    CHECK_THROWS_AS(fluid_integrate(s, {0.0, 1.0, 1.0}), DomainError);
    CHECK_THROWS_AS(fluid_integrate(s, {}), DomainError);
}

TEST_CASE("diffusion") {
    DiffusionSpec s;
    s.lambda_bar = 10.0;
    s.mu_bar = 1.0;
    s.beta = 0.3;
    s.moment = 2.0;
    s.gamma = 2.0;  // linear drift: Ornstein-Uhlenbeck
    DiffusionOptions o;
    o.horizon = 400.0;
    o.dt = 1e-3;
    o.paths = 8;
    o.seed = 4;
    const auto r = diffusion_simulate(s, o);
    const double mean = -s.drift_constant() / s.moment;
    const double var = s.lambda_bar / s.moment;
    CHECK(std::abs(r.mean - mean) < 4.0 * r.mean_se);
    CHECK(r.variance == doctest::Approx(var).epsilon(0.1));
    CHECK(r.path_means.size() == 8);

    // Step halving leaves the statistics unchanged within noise.
    DiffusionOptions half = o;
    half.dt = 5e-4;
    const auto rh = diffusion_simulate(s, half);
    CHECK(std::abs(rh.mean - r.mean) < 4.0 * std::hypot(r.mean_se, rh.mean_se));

    // Without noise the path follows the deterministic flow.
    DiffusionSpec quiet;
    quiet.lambda_bar = 0.0;
    quiet.moment = 1.5;
    quiet.xi0 = -2.0;
    DiffusionOptions qo;
    qo.dt = 1e-4;
    qo.horizon = 3.0;
    qo.paths = 1;
    qo.record_every = 100;
    const auto q = diffusion_simulate(quiet, qo);
    REQUIRE(!q.sample_path.empty());
    double worst = 0.0;
    for (const auto& p : q.sample_path) worst = std::max(worst, std::abs(p.value + 2.0 * std::exp(-1.5 * p.t)));
    CHECK(worst < 1e-3);

    // Stronger abandonment pushes the path below +delta more often.
    double prev = 2.0;
    for (double gamma : {1.0, 10.0, 100.0}) {
        DiffusionSpec g = s;
        g.gamma = gamma;
        g.beta = 0.05;
        DiffusionOptions go = o;
        go.horizon = 200.0;
        const auto rg = diffusion_simulate(g, go);
        CHECK(rg.fraction_above < prev);
        prev = rg.fraction_above;
    }
    o.dt = 0.0;
    CHECK_THROWS_AS(diffusion_simulate(s, o), DomainError);
}

TEST_CASE("allocation fluid") {
    ModelParams p;
    const auto F = RateDistribution::uniform(0.2, 0.5);
    const auto h = power_fn(-1.0);
    const auto start = allocation_grid(F, p.beta, p.lambda_bar, 100);
    CHECK(start.total() == doctest::Approx(p.beta * p.lambda_bar / start.mu_bar()).epsilon(1e-12));

    const auto [target, L] = allocation_fixed_point(start, p, h);
    const auto Fd = start.discretized_F();
    CHECK(L == doctest::Approx(solve_L(Fd, h, p.beta, 1e-13).L).epsilon(1e-9));
    const auto drift = allocation_drift(target, p, h);
    double worst = 0.0;
    for (double d : drift) worst = std::max(worst, std::abs(d));
    CHECK(worst < 1e-9);

    // Masses never exceed the inflow ceiling and never go negative.
    const auto path = allocation_fluid_integrate(start, p, h, grid(20.0, 20));
    for (const auto& st : path) {
        for (std::size_t i = 0; i < st.cells(); ++i) {
            REQUIRE(st.mass[i] >= 0.0);
            REQUIRE(st.mass[i] <= p.lambda_bar / st.mu_bar() * (1.0 + p.beta) * st.F_mass[i] * (1.0 + 1e-12));
        }
    }

    const auto run = allocation_fluid_converge(start, p, h, target);
    CHECK(run.converged);
    CHECK(run.trace.back().tv < 1e-6);
    CHECK(normalized_total_variation(run.final_state.mass, target.mass) < 1e-6);

    // One rate and h = 1: the total solves psi' = lambda_bar beta - mu psi.
    AllocationState one;
    one.edges = {0.9, 1.1};
    one.F_mass = {1.0};
    one.mass = {5.0};
    const auto single = allocation_fluid_integrate(one, p, power_fn(0.0), grid(4.0, 8));
    worst = 0.0;
    for (const auto& st : single) {
        const double exact = p.lambda_bar * p.beta + (5.0 - p.lambda_bar * p.beta) * std::exp(-st.t);
        worst = std::max(worst, std::abs(st.mass[0] - exact));
    }
    CHECK(worst < 1e-6);

    AllocationState dead = start;
    std::fill(dead.mass.begin(), dead.mass.end(), 0.0);
    CHECK_THROWS_AS(allocation_fluid_integrate(dead, p, h, {0.0, 1.0}), SimulationError);
    AllocationState busy = start;
    busy.idle_regime = false;
    CHECK_THROWS_AS(allocation_fluid_integrate(busy, p, h, {0.0, 1.0}), UnsupportedError);
    CHECK(normalized_total_variation({1.0, 1.0}, {2.0, 2.0}) == doctest::Approx(0.0));
}
