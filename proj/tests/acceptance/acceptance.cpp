// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "hetsq/equilibrium.hpp"
#include "hetsq/experiment.hpp"
#include "hetsq/fairness.hpp"
#include "hetsq/limits.hpp"
#include "hetsq/sim.hpp"
#include "oracles/ctmc.hpp"

using namespace hetsq;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

int failures = 0;

void run(int id, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < budget_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("criterion %d: %s  %s  [%.1f s, budget %.0f s%s]\n", id, pass ? "PASS" : "FAIL", o.detail.c_str(), secs,
                budget_s, in_time ? "" : ", over budget");
    std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

template <class T>
bool strictly(const std::vector<T>& v, bool increasing) {
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (increasing ? !(v[i] > v[i - 1]) : !(v[i] < v[i - 1])) return false;
    }
    return true;
}

const PopulationDistributions base_dists{};
const double base_beta = 0.3;

EquilibriumSolution base_equilibrium(double r = -1.0, double beta = base_beta, double kappa = 1.0) {
    PolicyFunctions funcs = PowerFamily{1.0, 2.0, r}.functions();
    if (kappa != 1.0) funcs.h = scaled(funcs.h, kappa);
    return solve_equilibrium(base_dists, funcs, beta);
}

Outcome criterion1() {
    const auto s = base_equilibrium();
    const double lo = 1.0 / 3000.0, hi = 5.0 / 6.0;
    const bool ok = std::abs(s.residual) < 1e-9 && s.L_star > lo && s.L_star < hi &&
                    std::abs(s.bracket_lo - lo) < 1e-12 && std::abs(s.bracket_hi - hi) < 1e-12 &&
                    s.scan.size() == 64 && s.sign_changes == 1;
    return {ok, "L*=" + fmt("%.12f", s.L_star) + " |Phi|=" + fmt("%.1e", std::abs(s.residual)) +
                    " scan=" + std::to_string(s.scan.size()) + " sign_changes=" + std::to_string(s.sign_changes)};
}

Outcome criterion2() {
    std::vector<double> L, mu;
    std::vector<int> N;
    for (double r : {-2.0, -1.5, -1.0, -0.5, -0.25}) {
        const auto s = base_equilibrium(r);
        L.push_back(s.L_star);
        mu.push_back(s.mu_bar);
        N.push_back(s.staffing);
    }
    const bool a = strictly(L, true), b = strictly(mu, false), c = strictly(N, true);
    std::string d = "L* increasing=" + std::string(a ? "yes" : "no") + " mu_bar decreasing=" + (b ? "yes" : "no") +
                    " N increasing=" + (c ? "yes" : "no") + " N=";
    for (int n : N) d += std::to_string(n) + ",";
    return {a && b && c, d};
}

Outcome criterion3() {
    std::vector<double> L, mu, betas;
    std::vector<int> N;
    for (int i = 1; i <= 20; ++i) {
        const double beta = 0.05 * i;
        const auto s = base_equilibrium(-1.0, beta);
        betas.push_back(beta);
        L.push_back(s.L_star);
        mu.push_back(s.mu_bar);
        N.push_back(s.staffing);
    }
    const bool a = strictly(L, false), b = strictly(mu, true);
    const auto it = std::min_element(N.begin(), N.end());
    const std::size_t k = static_cast<std::size_t>(it - N.begin());
    const bool interior = k > 0 && k + 1 < N.size();
    const bool c = interior && betas[k] >= 0.3 - 1e-12 && betas[k] <= 0.55 + 1e-12;
    return {a && b && c, "L* decreasing=" + std::string(a ? "yes" : "no") + " mu_bar increasing=" + (b ? "yes" : "no") +
                             " argmin N at beta=" + fmt("%.2f", betas[k]) + " (N=" + std::to_string(N.front()) +
                             ".." + std::to_string(N.back()) + ", interior=" + (interior ? "yes" : "no") + ")"};
}

Outcome criterion4() {
    ExperimentConfig cfg;
    cfg.seed = 20240601;
    cfg.set("sim_lambda_bar", "mu_bar");
    const auto eq = solve_config_equilibrium(cfg);
    ValidationOptions o;
    o.replications = 20;
    o.horizon = 2000.0;
    o.bins = 10;
    const auto r200 = validate_scale(cfg, eq, 200, o);
    const auto r800 = validate_scale(cfg, eq, 800, o);
    const bool a = r800.sup_gap < 0.03;
    const bool b = r800.sup_gap < r200.sup_gap;
    const bool c = std::abs(r800.idle_mean - r800.idle_theory) < 3.0 * r800.idle_se;
    return {a && b && c, "sup_gap n=200 " + fmt("%.4f", r200.sup_gap) + ", n=800 " + fmt("%.4f", r800.sup_gap) +
                             "; I_hat " + fmt("%.5f", r800.idle_mean) + " +- " + fmt("%.5f", r800.idle_se) +
                             " vs theory " + fmt("%.5f", r800.idle_theory)};
}

Outcome criterion5() {
    const auto eq = base_equilibrium();
    const auto& F = eq.distribution.law();
    ModelParams p;
    p.alpha = 0.75;
    p.n = 400;
    p.lambda_bar = 100.0;
    const int N = staffing_level(p.arrival_rate(), eq.mu_bar, p.beta, p.alpha);
    const auto pop = stratified_population(F, N, 5, 0);
    const auto rates = pop.rates();

    std::vector<std::size_t> order(rates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return rates[a] < rates[b]; });
    const std::size_t decile = order.size() / 10;

    const auto [lo_it, hi_it] = std::minmax_element(rates.begin(), rates.end());
    const auto edges = equal_width_edges(*lo_it, *hi_it, 10);
    std::vector<double> theory_w(rates.size());
    for (std::size_t k = 0; k < rates.size(); ++k) theory_w[k] = rates[k];
    const auto theory = FairnessMeasure::from_weights(rates, theory_w).binned(edges);

    SimulationOptions so;
    // The slowest servers hold a job for about 1/mu_min = 100 time units;
    // the warmup covers a few of those.
    so.horizon = 700.0;
    so.warmup = 400.0;
    so.seed = 5;

    const auto fsf = run_simulation(p, pop, RoutingPolicy::fsf(), so);
    double low = 0.0, total = 0.0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        total += fsf.idle_time[order[i]];
        if (i < decile) low += fsf.idle_time[order[i]];
    }
    const double share = low / total;

    std::string d = "N=" + std::to_string(N) + " FSF lowest-decile share=" + fmt("%.4f", share);
    bool ok = share >= 0.9;
    for (const auto& [name, policy] : {std::pair{"LISF", RoutingPolicy::lisf()}, std::pair{"Uniform", RoutingPolicy::uniform()}}) {
        const auto res = run_simulation(p, pop, policy, so);
        const auto eta = empirical_fairness(res, pop).binned(edges);
        const double tv = total_variation(eta, theory);
        ok = ok && tv < 0.05;
        d += std::string(" ") + name + " TV=" + fmt("%.4f", tv);
    }
    return {ok, d};
}

Outcome criterion6() {
    struct System {
        std::vector<double> mu;
        double lambda;
        double gamma;
    };
    const System systems[] = {{{1.0, 0.4}, 1.0, 0.5}, {{1.2, 0.7, 0.3}, 1.5, 1.0}};
    const int reps = 10;
    double worst = 0.0;  // largest |sim - exact| / SE
    int compared = 0;
    for (const auto& sys : systems) {
        std::vector<double> weight;
        for (double m : sys.mu) weight.push_back(1.0 / m);
        const std::pair<RoutingPolicy, oracle::Rule> cases[] = {
            {RoutingPolicy::uniform(), oracle::Rule::Uniform},
            {RoutingPolicy::fsf(), oracle::Rule::Fastest},
            {RoutingPolicy::ssf(), oracle::Rule::Slowest},
            {RoutingPolicy::h_random(power_fn(-1.0)), oracle::Rule::Weighted},
        };
        ModelParams p;
        p.lambda_bar = sys.lambda;
        p.gamma = sys.gamma;
        const auto pop = ServerPopulation::from_rates(sys.mu);
        for (const auto& [policy, rule] : cases) {
            const auto exact = oracle::idle_probabilities(sys.mu, sys.lambda, sys.gamma, rule, 200, weight);
            std::vector<std::vector<double>> samples(sys.mu.size());
            for (int r = 0; r < reps; ++r) {
                SimulationOptions so;
                so.horizon = 20000.0;
                so.warmup = 100.0;
                so.seed = 606;
                so.replication = static_cast<std::uint64_t>(r);
                const auto res = run_simulation(p, pop, policy, so);
                for (std::size_t k = 0; k < sys.mu.size(); ++k) samples[k].push_back(res.idle_fraction[k]);
            }
            for (std::size_t k = 0; k < sys.mu.size(); ++k) {
                const auto& v = samples[k];
                const double m = std::accumulate(v.begin(), v.end(), 0.0) / reps;
                double ss = 0.0;
                for (double x : v) ss += (x - m) * (x - m);
                const double se = std::sqrt(ss / (reps - 1) / reps);
                worst = std::max(worst, std::abs(m - exact[k]) / se);
                ++compared;
            }
        }
    }
    return {worst < 3.0, std::to_string(compared) + " idle fractions, max |sim - exact| = " + fmt("%.2f", worst) + " SE"};
}

Outcome criterion7() {
    const auto eq = base_equilibrium();
    FluidSpec s;
    s.xi0 = -5.0;
    s.beta = base_beta;
    s.lambda_bar = 100.0;
    s.mu_bar = eq.mu_bar;
    s.moment = eq.fairness.moment;
    std::vector<double> grid;
    for (int i = 0; i <= 200; ++i) grid.push_back(0.1 * i);
    double worst = 0.0;
    for (const auto& pt : fluid_integrate(s, grid)) worst = std::max(worst, std::abs(pt.value - fluid_closed_form(s, pt.t)));

    ModelParams p;
    const auto funcs = PowerFamily{}.functions();
    const auto start = allocation_grid(eq.distribution.law(), p.beta, p.lambda_bar, 200);
    const auto target = allocation_fixed_point(start, p, funcs.h).first;
    const auto run = allocation_fluid_converge(start, p, funcs.h, target);
    const double tv = normalized_total_variation(run.final_state.mass, target.mass);
    return {worst < 1e-8 && tv < 1e-6, "fluid max deviation " + fmt("%.2e", worst) + "; allocation terminal TV " +
                                           fmt("%.2e", tv) + " at t=" + fmt("%.1f", run.final_state.t)};
}

Outcome criterion8() {
    const auto eq = base_equilibrium();
    const auto& F = eq.distribution.law();
    const double lambda_bar = 100.0;
    const auto g_eq = eq.fairness;
    const std::vector<std::pair<std::string, std::function<double(double)>>> targets{
        {"constant", [](double) { return 1.0; }},
        {"proportional", [](double mu) { return mu; }},
        {"equilibrium", [g_eq](double mu) { return g_eq(mu); }},
    };
    bool ok = true;
    std::string d;
    for (const auto& [name, g] : targets) {
        const auto h = h_for_target_density(g, F, base_beta, lambda_bar);
        const auto s = solve_L(F, h, base_beta, 1e-13);
        double z = 0.0;
        for (const auto& q : F.nodes()) z += q.w * g(q.x);
        double tv = 0.0;
        for (const auto& q : F.nodes()) tv += 0.5 * q.w * std::abs(s.density(q.x) - g(q.x) / z);
        const double rel = std::abs(s.L - lambda_bar) / lambda_bar;
        ok = ok && tv < 1e-8 && rel < 1e-6;
        d += name + ": TV " + fmt("%.1e", tv) + " L rel " + fmt("%.1e", rel) + "; ";
    }
    return {ok, d};
}

Outcome criterion9() {
    const auto funcs = PowerFamily{}.functions();
    const auto eq = base_equilibrium();
    const double L = eq.L_star;

    // Best responses against a 1001-point grid of every server's interval.
    const BestResponder responder(funcs, L, base_dists.interval());
    const auto draws = sample_population(base_dists, 1000, 99);
    double slack = 1e300;
    for (const auto& s : draws.servers) {
        const auto b = responder({s.a, s.mu_min, s.mu_max});
        double grid_best = -1e300;
        for (int k = 0; k <= 1000; ++k) {
            const double mu = s.mu_min + (s.mu_max - s.mu_min) * k / 1000.0;
            grid_best = std::max(grid_best, server_utility(mu, s.a, L, funcs));
        }
        slack = std::min(slack, b.utility - grid_best);
    }
    const bool dominance = slack >= -1e-9;

    // Monte Carlo CDF.
    const auto pop = equilibrium_population(base_dists, funcs, L, 1000000, 123);
    auto mu = pop.rates();
    std::sort(mu.begin(), mu.end());
    double ks = 0.0;
    const double n = static_cast<double>(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double c = eq.distribution.cdf(mu[i]);
        ks = std::max({ks, std::abs(c - i / n), std::abs(c - (i + 1) / n)});
    }
    const bool mc = ks < 3e-3;

    // Rescaling h.
    double worst = 0.0;
    bool same_N = true;
    for (double kappa : {0.1, 10.0}) {
        const auto sk = base_equilibrium(-1.0, base_beta, kappa);
        worst = std::max(worst, std::abs(sk.mu_bar - eq.mu_bar) / eq.mu_bar);
        worst = std::max(worst, std::abs(sk.L_star * kappa - L) / L);
        for (int i = 1; i < 100; ++i) {
            const double x = 0.01 + 0.49 * i / 100.0;
            const double c = eq.distribution.cdf(x);
            worst = std::max(worst, std::abs(sk.distribution.cdf(x) - c) / std::max(c, 1e-300));
        }
        same_N = same_N && sk.staffing == eq.staffing;
    }
    const bool invariant = worst < 1e-6 && same_N;

    // Bitwise determinism of the solver and the simulator.
    const auto again = base_equilibrium();
    bool det = again.L_star == eq.L_star && again.mu_bar == eq.mu_bar && again.scan == eq.scan;
    ModelParams p;
    p.lambda_bar = eq.mu_bar;
    p.n = 100;
    const auto sim_pop = stratified_population(eq.distribution.law(), 130, 7, 0);
    SimulationOptions so;
    so.horizon = 200.0;
    so.seed = 7;
    so.record_events = true;
    const auto a = run_simulation(p, sim_pop, RoutingPolicy::h_random(funcs.h), so);
    const auto b = run_simulation(p, sim_pop, RoutingPolicy::h_random(funcs.h), so);
    det = det && a.idle_time == b.idle_time && a.events.size() == b.events.size() &&
          std::equal(a.events.begin(), a.events.end(), b.events.begin(), [](const auto& x, const auto& y) {
              return x.time == y.time && x.kind == y.kind && x.server == y.server && x.queue_length == y.queue_length;
          });

    return {dominance && mc && invariant && det,
            "grid slack " + fmt("%.1e", slack) + "; MC CDF gap " + fmt("%.2e", ks) + "; h-scale rel dev " +
                fmt("%.1e", worst) + (same_N ? " (N equal)" : " (N differs)") + "; deterministic=" + (det ? "yes" : "no")};
}

}  // namespace

int main() {
    run(1, 5, criterion1);
    run(2, 30, criterion2);
    run(3, 60, criterion3);
    run(4, 600, criterion4);
    run(5, 300, criterion5);
    run(6, 120, criterion6);
    run(7, 30, criterion7);
    run(8, 10, criterion8);
    run(9, 600, criterion9);
    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
