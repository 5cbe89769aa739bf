#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hetsq/equilibrium.hpp"
#include "hetsq/model.hpp"
#include "hetsq/rate_distribution.hpp"

namespace hetsq {

// Flat key = value configuration. Defaults are the base-case scenario.
struct ExperimentConfig {
    ModelParams model;  // lambda_bar, beta, alpha, gamma, n
    PowerFamily family;  // p, q, r
    PopulationDistributions population;  // mu_min, mu_max, a_min, a_max
    std::uint64_t seed = 1;

    // simulation
    std::string policy = "hrandom";
    double horizon = 2000.0;
    double warmup = -1.0;
    int batches = 20;
    int replications = 20;
    // Arrival scale for simulation runs; 0 uses lambda_bar. Limit objects at
    // alpha = 1 depend on lambda_bar only through scaling, so validation can
    // run at a smaller scale than the equilibrium staffing.
    double sim_lambda_bar = 0.0;
    std::vector<int> n_list{100, 200, 400, 800};
    int bins = 10;
    double epsilon = 0.0;
    bool record_events = false;

    // sweep
    std::string sweep_axis = "r";
    std::vector<double> sweep_grid{-2.0, -1.5, -1.0, -0.5, -0.25};

    // limits
    double fluid_horizon = 10.0;
    double diffusion_dt = 1e-3;
    double diffusion_horizon = 50.0;
    int diffusion_paths = 8;
    int allocation_cells = 200;

    std::string output_dir = "out";

    // Assigns one key; throws ConfigError on unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    void validate() const;
    // Sorted key=value lines of every setting except output_dir.
    std::string canonical() const;
    // 16 hex digits of the FNV-1a hash of canonical().
    std::string hash() const;

    double effective_sim_lambda_bar() const { return sim_lambda_bar > 0.0 ? sim_lambda_bar : model.lambda_bar; }
    PolicyFunctions functions() const { return family.functions(); }

    static ExperimentConfig from_file(const std::filesystem::path& path);
    static const std::vector<std::string>& keys();
};

// "# hetsq <version> config_hash=<hash> seed=<seed>"
std::string provenance_line(const ExperimentConfig& cfg);

// Equilibrium for the config, staffing with arrival rate n * lambda_bar.
EquilibriumSolution solve_config_equilibrium(const ExperimentConfig& cfg);

// `count` rates from F by inverse CDF at stratified uniforms (one per
// stratum, randomized within), shuffled.
ServerPopulation stratified_population(const RateDistribution& F, int count, std::uint64_t seed,
                                       std::uint64_t replication);

// Servers with sampled attributes playing their best response against L.
ServerPopulation equilibrium_population(const PopulationDistributions& dists, const PolicyFunctions& funcs, double L,
                                        int count, std::uint64_t seed);

struct ValidationRow {
    int n;
    int servers;
    double sup_gap;
    double sup_gap_se;
    double idle_mean;
    double idle_se;
    double idle_theory;
    double idle_gap;
    double tv_gap;
    double tv_gap_se;
};

struct ValidationOptions {
    int replications = 20;
    double horizon = 2000.0;
    double warmup = -1.0;
    int bins = 10;
};

// h-random simulations at alpha = 1 from the equilibrium F. Rates are
// pooled across replications into `bins` equal-width bins over the support.
ValidationRow validate_scale(const ExperimentConfig& cfg, const EquilibriumSolution& eq, int n,
                             const ValidationOptions& opts);

// Subcommands. Each writes its files into `out_dir` and returns the paths.
std::vector<std::filesystem::path> cmd_equilibrium(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
std::vector<std::filesystem::path> cmd_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
std::vector<std::filesystem::path> cmd_simulate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
std::vector<std::filesystem::path> cmd_validate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
std::vector<std::filesystem::path> cmd_fairness(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
std::vector<std::filesystem::path> cmd_limits(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace hetsq
