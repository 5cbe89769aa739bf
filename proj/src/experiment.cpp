#include "hetsq/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "hetsq/error.hpp"
#include "hetsq/fairness.hpp"
#include "hetsq/fairness_measure.hpp"
#include "hetsq/limits.hpp"
#include "hetsq/routing.hpp"
#include "hetsq/sim.hpp"

namespace hetsq {

namespace fs = std::filesystem;

namespace {

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("bad number for " + key + ": '" + v + "'");
    }
}

long long parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long long x = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("bad integer for " + key + ": '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// "a,b,c" or "lo:hi:step".
std::vector<double> parse_grid(const std::string& key, const std::string& v) {
    if (v.find(':') != std::string::npos) {
        const auto parts = split(v, ':');
        if (parts.size() != 3) throw ConfigError(key + " range must be lo:hi:step");
        const double lo = parse_double(key, parts[0]);
        const double hi = parse_double(key, parts[1]);
        const double step = parse_double(key, parts[2]);
        if (!(step > 0.0) || hi < lo) throw ConfigError(key + " range is empty");
        std::vector<double> out;
        const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
        for (long i = 0; i <= count; ++i) out.push_back(lo + static_cast<double>(i) * step);
        return out;
    }
    std::vector<double> out;
    for (const auto& p : split(v, ',')) out.push_back(parse_double(key, p));
    return out;
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
    return s;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Csv {
public:
    Csv(const fs::path& path, const ExperimentConfig& cfg, const std::vector<std::string>& header) : out_(path) {
        if (!out_) throw ConfigError("cannot write " + path.string());
        out_ << provenance_line(cfg) << '\n';
        row(header);
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double se_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

RoutingPolicy make_policy(const std::string& name, const PolicyFunctions& funcs) {
    const PolicyKind kind = parse_policy_kind(name);
    if (kind == PolicyKind::HRandom) return RoutingPolicy::h_random(funcs.h);
    return {kind, {}};
}

double resolve_sim_lambda(const ExperimentConfig& cfg, double mu_bar) {
    return cfg.sim_lambda_bar < 0.0 ? mu_bar : cfg.effective_sim_lambda_bar();
}

}  // namespace

const std::vector<std::string>& ExperimentConfig::keys() {
    static const std::vector<std::string> k{
        "lambda_bar", "beta", "alpha", "gamma", "n", "p", "q", "r", "mu_min", "mu_max", "a_min", "a_max", "seed",
        "policy", "horizon", "warmup", "batches", "replications", "sim_lambda_bar", "n_list", "bins", "epsilon",
        "record_events", "sweep_axis", "sweep_grid", "fluid_horizon", "diffusion_dt", "diffusion_horizon",
        "diffusion_paths", "allocation_cells", "output_dir"};
    return k;
}

void ExperimentConfig::set(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    if (key == "lambda_bar") model.lambda_bar = parse_double(key, v);
    else if (key == "beta") model.beta = parse_double(key, v);
    else if (key == "alpha") model.alpha = parse_double(key, v);
    else if (key == "gamma") model.gamma = parse_double(key, v);
    else if (key == "n") model.n = static_cast<int>(parse_int(key, v));
    else if (key == "p") family.p = parse_double(key, v);
    else if (key == "q") family.q = parse_double(key, v);
    else if (key == "r") family.r = parse_double(key, v);
    else if (key == "mu_min") population.mu_min = parse_double(key, v);
    else if (key == "mu_max") population.mu_max = parse_double(key, v);
    else if (key == "a_min") population.a_min = parse_double(key, v);
    else if (key == "a_max") population.a_max = parse_double(key, v);
    else if (key == "seed") seed = static_cast<std::uint64_t>(parse_int(key, v));
    else if (key == "policy") policy = v;
    else if (key == "horizon") horizon = parse_double(key, v);
    else if (key == "warmup") warmup = parse_double(key, v);
    else if (key == "batches") batches = static_cast<int>(parse_int(key, v));
    else if (key == "replications") replications = static_cast<int>(parse_int(key, v));
    else if (key == "sim_lambda_bar") sim_lambda_bar = v == "mu_bar" ? -1.0 : parse_double(key, v);
    else if (key == "n_list") {
        n_list.clear();
        for (const auto& p : split(v, ',')) n_list.push_back(static_cast<int>(parse_int(key, p)));
    } else if (key == "bins") bins = static_cast<int>(parse_int(key, v));
    else if (key == "epsilon") epsilon = parse_double(key, v);
    else if (key == "record_events") record_events = parse_bool(key, v);
    else if (key == "sweep_axis") sweep_axis = v;
    else if (key == "sweep_grid") sweep_grid = parse_grid(key, v);
    else if (key == "fluid_horizon") fluid_horizon = parse_double(key, v);
    else if (key == "diffusion_dt") diffusion_dt = parse_double(key, v);
    else if (key == "diffusion_horizon") diffusion_horizon = parse_double(key, v);
    else if (key == "diffusion_paths") diffusion_paths = static_cast<int>(parse_int(key, v));
    else if (key == "allocation_cells") allocation_cells = static_cast<int>(parse_int(key, v));
    else if (key == "output_dir") output_dir = v;
    else throw ConfigError("unknown config key '" + key + "'");
}

void ExperimentConfig::validate() const {
    try {
        if (!(model.lambda_bar >= 0.0)) throw DomainError("lambda_bar must be non-negative");
        if (!(model.beta > 0.0)) throw DomainError("beta must be positive");
        if (!(model.alpha >= 0.5 && model.alpha <= 1.0)) throw DomainError("alpha must lie in [1/2, 1]");
        if (!(model.gamma > 0.0)) throw DomainError("gamma must be positive");
        if (model.n < 1) throw DomainError("n must be at least 1");
        population.validate();
        (void)family.functions();
        (void)parse_policy_kind(policy);
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (replications < 1) throw ConfigError("replications must be at least 1");
    if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
    if (batches < 1) throw ConfigError("batches must be at least 1");
    if (bins < 1) throw ConfigError("bins must be at least 1");
    if (epsilon < 0.0) throw ConfigError("epsilon must be non-negative");
    if (n_list.empty()) throw ConfigError("n_list must not be empty");
    for (std::size_t i = 1; i < n_list.size(); ++i) {
        if (n_list[i] <= n_list[i - 1]) throw ConfigError("n_list must be strictly increasing");
    }
    if (sweep_axis != "r" && sweep_axis != "beta") throw ConfigError("sweep_axis must be r or beta");
    if (sweep_grid.empty()) throw ConfigError("sweep_grid must not be empty");
    for (std::size_t i = 1; i < sweep_grid.size(); ++i) {
        if (sweep_grid[i] <= sweep_grid[i - 1]) throw ConfigError("sweep_grid must be strictly increasing");
    }
    if (sweep_axis == "beta" && !(sweep_grid.front() > 0.0)) throw ConfigError("beta grid must be positive");
    if (sweep_axis == "r" && !(sweep_grid.back() < 1.0)) throw ConfigError("r grid must stay below 1");
    if (!(diffusion_dt > 0.0) || !(diffusion_horizon > diffusion_dt)) throw ConfigError("bad diffusion step or horizon");
    if (diffusion_paths < 1) throw ConfigError("diffusion_paths must be at least 1");
    if (allocation_cells < 1) throw ConfigError("allocation_cells must be at least 1");
    if (!(fluid_horizon > 0.0)) throw ConfigError("fluid_horizon must be positive");
}

std::string ExperimentConfig::canonical() const {
    std::map<std::string, std::string> kv{
        {"lambda_bar", fmt(model.lambda_bar)},
        {"beta", fmt(model.beta)},
        {"alpha", fmt(model.alpha)},
        {"gamma", fmt(model.gamma)},
        {"n", std::to_string(model.n)},
        {"p", fmt(family.p)},
        {"q", fmt(family.q)},
        {"r", fmt(family.r)},
        {"mu_min", fmt(population.mu_min)},
        {"mu_max", fmt(population.mu_max)},
        {"a_min", fmt(population.a_min)},
        {"a_max", fmt(population.a_max)},
        {"seed", std::to_string(seed)},
        {"policy", policy},
        {"horizon", fmt(horizon)},
        {"warmup", fmt(warmup)},
        {"batches", std::to_string(batches)},
        {"replications", std::to_string(replications)},
        {"sim_lambda_bar", sim_lambda_bar < 0.0 ? "mu_bar" : fmt(sim_lambda_bar)},
        {"bins", std::to_string(bins)},
        {"epsilon", fmt(epsilon)},
        {"record_events", record_events ? "true" : "false"},
        {"sweep_axis", sweep_axis},
        {"sweep_grid", join(sweep_grid)},
        {"fluid_horizon", fmt(fluid_horizon)},
        {"diffusion_dt", fmt(diffusion_dt)},
        {"diffusion_horizon", fmt(diffusion_horizon)},
        {"diffusion_paths", std::to_string(diffusion_paths)},
        {"allocation_cells", std::to_string(allocation_cells)},
    };
    std::string nl;
    for (std::size_t i = 0; i < n_list.size(); ++i) nl += (i ? "," : "") + std::to_string(n_list[i]);
    kv["n_list"] = nl;
    std::string s;
    for (const auto& [k, v] : kv) s += k + "=" + v + "\n";
    return s;
}

std::string ExperimentConfig::hash() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical())));
    return buf;
}

ExperimentConfig ExperimentConfig::from_file(const fs::path& path) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("cannot read config: ") + e.what());
    }
    ExperimentConfig cfg;
    for (const auto& [key, node] : tree) {
        if (!node.empty()) throw ConfigError("config must be flat; found section [" + key + "]");
        cfg.set(key, node.data());
    }
    return cfg;
}

std::string provenance_line(const ExperimentConfig& cfg) {
    return std::string("# hetsq ") + HETSQ_VERSION + " config_hash=" + cfg.hash() + " seed=" + std::to_string(cfg.seed);
}

EquilibriumSolution solve_config_equilibrium(const ExperimentConfig& cfg) {
    EquilibriumOptions opts;
    const double lambda_n = static_cast<double>(cfg.model.n) * cfg.model.lambda_bar;
    if (lambda_n > 0.0) opts.lambda_n = lambda_n;
    return solve_equilibrium(cfg.population, cfg.functions(), cfg.model.beta, opts);
}

ServerPopulation stratified_population(const RateDistribution& F, int count, std::uint64_t seed,
                                       std::uint64_t replication) {
    if (count < 1) throw DomainError("population count must be at least 1");
    Rng rng = make_rng(seed, replication, Stream::Population);
    std::vector<double> rates(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        rates[static_cast<std::size_t>(k)] = F.quantile((k + uniform_open(rng)) / count);
    }
    std::shuffle(rates.begin(), rates.end(), rng);
    return ServerPopulation::from_rates(rates);
}

ServerPopulation equilibrium_population(const PopulationDistributions& dists, const PolicyFunctions& funcs, double L,
                                        int count, std::uint64_t seed) {
    ServerPopulation pop = sample_population(dists, count, seed);
    const BestResponder respond(funcs, L, dists.interval());
    for (auto& s : pop.servers) s.mu = respond({s.a, s.mu_min, s.mu_max}).mu_star;
    return pop;
}

ValidationRow validate_scale(const ExperimentConfig& cfg, const EquilibriumSolution& eq, int n,
                             const ValidationOptions& opts) {
    if (n < 2) throw DomainError("validation needs n >= 2");
    if (cfg.model.alpha != 1.0) throw UnsupportedError("h-random validation is defined for alpha = 1");
    const auto funcs = cfg.functions();
    const RateDistribution& F = eq.distribution.law();
    const double mu_bar = F.mean();
    const FairnessSolution fair = solve_L(F, funcs.h, cfg.model.beta);

    ModelParams params = cfg.model;
    params.lambda_bar = resolve_sim_lambda(cfg, mu_bar);
    params.n = n;
    const int N = staffing_level(params.arrival_rate(), mu_bar, params.beta, 1.0);
    const auto edges = equal_width_edges(F.lo(), F.hi(), opts.bins);
    const auto nb = static_cast<std::size_t>(opts.bins);
    auto bin_of = [&](double mu) {
        auto it = std::upper_bound(edges.begin(), edges.end(), mu);
        return std::clamp<std::size_t>(static_cast<std::size_t>(it - edges.begin()), 1, nb) - 1;
    };
    auto theory = [&](double mu) { return conditional_idleness_alpha1(mu, fair.L, funcs.h); };

    std::vector<double> emp_sum(nb, 0.0), th_sum(nb, 0.0), cnt(nb, 0.0);
    std::vector<double> rep_sup, rep_idle, rep_tv;
    const RoutingPolicy policy = RoutingPolicy::h_random(funcs.h);
    for (int r = 0; r < opts.replications; ++r) {
        const auto pop = stratified_population(F, N, cfg.seed, static_cast<std::uint64_t>(r));
        SimulationOptions so;
        so.horizon = opts.horizon;
        so.warmup = opts.warmup;
        so.seed = cfg.seed;
        so.replication = static_cast<std::uint64_t>(r);
        so.batches = cfg.batches;
        const auto res = run_simulation(params, pop, policy, so);

        std::vector<double> e(nb, 0.0), t(nb, 0.0), c(nb, 0.0);
        for (std::size_t k = 0; k < pop.size(); ++k) {
            const double mu = pop.servers[k].mu;
            const auto b = bin_of(mu);
            e[b] += res.idle_fraction[k];
            t[b] += theory(mu);
            c[b] += 1.0;
        }
        double sup = 0.0;
        for (std::size_t b = 0; b < nb; ++b) {
            emp_sum[b] += e[b];
            th_sum[b] += t[b];
            cnt[b] += c[b];
            if (c[b] > 0.0) sup = std::max(sup, std::abs(e[b] - t[b]) / c[b]);
        }
        rep_sup.push_back(sup);
        rep_idle.push_back(res.scaled_idleness_mean);

        const auto emp = empirical_fairness(res, pop, 0.0).binned(edges);
        // Theory fairness on this population: idle-time shares proportional
        // to the conditional idleness of each server.
        std::vector<double> tw = t;
        const double tw_total = std::accumulate(tw.begin(), tw.end(), 0.0);
        for (double& w : tw) w /= tw_total;
        rep_tv.push_back(total_variation(emp, tw));
    }

    ValidationRow row{};
    row.n = n;
    row.servers = N;
    for (std::size_t b = 0; b < nb; ++b) {
        if (cnt[b] > 0.0) row.sup_gap = std::max(row.sup_gap, std::abs(emp_sum[b] - th_sum[b]) / cnt[b]);
    }
    row.sup_gap_se = se_of(rep_sup);
    row.idle_mean = mean_of(rep_idle);
    row.idle_se = se_of(rep_idle);
    row.idle_theory = stationary_scaled_idleness(params, mu_bar, fair.density.moment);
    row.idle_gap = std::abs(row.idle_mean - row.idle_theory);
    row.tv_gap = mean_of(rep_tv);
    row.tv_gap_se = se_of(rep_tv);
    return row;
}

std::vector<fs::path> cmd_equilibrium(const ExperimentConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    std::vector<fs::path> written;
    std::optional<EquilibriumSolution> eq;
    try {
        eq.emplace(solve_config_equilibrium(cfg));
    } catch (const SolverError& e) {
        const auto path = out_dir / "equilibrium_failure.txt";
        std::ofstream out(path);
        out << provenance_line(cfg) << '\n' << e.what() << '\n' << e.diagnostics() << '\n';
        throw;
    }
    {
        const auto path = out_dir / "equilibrium.csv";
        Csv csv(path, cfg, {"key", "value"});
        csv.row({"L_star", fmt(eq->L_star)});
        csv.row({"residual", fmt(eq->residual)});
        csv.row({"mu_bar", fmt(eq->mu_bar)});
        csv.row({"sigma2", fmt(eq->sigma2)});
        csv.row({"staffing", std::to_string(eq->staffing)});
        csv.row({"bracket_lo", fmt(eq->bracket_lo)});
        csv.row({"bracket_hi", fmt(eq->bracket_hi)});
        csv.row({"sign_changes", std::to_string(eq->sign_changes)});
        csv.row({"iterations", std::to_string(eq->iterations)});
        csv.row({"fairness_moment", fmt(eq->fairness.moment)});
        written.push_back(path);
    }
    {
        const auto path = out_dir / "distribution.csv";
        Csv csv(path, cfg, {"mu", "cdf", "density"});
        for (const auto& r : eq->distribution.tabulate()) csv.row({fmt(r.mu), fmt(r.cdf), fmt(r.density)});
        written.push_back(path);
    }
    {
        const auto path = out_dir / "scan.csv";
        Csv csv(path, cfg, {"L", "phi"});
        for (const auto& [L, phi] : eq->scan) csv.row({fmt(L), fmt(phi)});
        written.push_back(path);
    }
    return written;
}

std::vector<fs::path> cmd_sweep(const ExperimentConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const auto path = out_dir / ("sweep_" + cfg.sweep_axis + ".csv");
    const auto long_path = out_dir / ("sweep_" + cfg.sweep_axis + "_long.csv");
    Csv csv(path, cfg, {cfg.sweep_axis, "L_star", "mu_bar", "N", "residual", "flag"});
    Csv lng(long_path, cfg, {"axis", "value", "metric", "result"});
    for (double v : cfg.sweep_grid) {
        ExperimentConfig point = cfg;
        if (cfg.sweep_axis == "r") point.family.r = v;
        else point.model.beta = v;
        try {
            const auto eq = solve_config_equilibrium(point);
            const bool ok = std::abs(eq.residual) < 1e-9;
            csv.row({fmt(v), fmt(eq.L_star), fmt(eq.mu_bar), std::to_string(eq.staffing), fmt(eq.residual),
                     ok ? "ok" : "residual"});
            lng.row({cfg.sweep_axis, fmt(v), "L_star", fmt(eq.L_star)});
            lng.row({cfg.sweep_axis, fmt(v), "mu_bar", fmt(eq.mu_bar)});
            lng.row({cfg.sweep_axis, fmt(v), "N", std::to_string(eq.staffing)});
        } catch (const std::exception& e) {
            csv.row({fmt(v), "nan", "nan", "nan", "nan", "failed"});
        }
    }
    return {path, long_path};
}

std::vector<fs::path> cmd_simulate(const ExperimentConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const auto eq = solve_config_equilibrium(cfg);
    const auto funcs = cfg.functions();
    ModelParams params = cfg.model;
    params.lambda_bar = resolve_sim_lambda(cfg, eq.mu_bar);
    params.validate();
    const int N = staffing_level(params.arrival_rate(), eq.mu_bar, params.beta, params.alpha);
    const RoutingPolicy policy = make_policy(cfg.policy, funcs);

    std::vector<fs::path> written;
    const auto summary_path = out_dir / "simulate_summary.csv";
    Csv summary(summary_path, cfg,
                {"replication", "servers", "scaled_idleness_mean", "scaled_idleness_se", "scaled_queue_mean",
                 "scaled_queue_se", "abandonment_fraction", "arrivals", "departures", "abandonments", "in_system"});
    for (int r = 0; r < cfg.replications; ++r) {
        const auto pop = equilibrium_population(cfg.population, funcs, eq.L_star, N,
                                                derive_seed(cfg.seed, static_cast<std::uint64_t>(r), Stream::Population));
        SimulationOptions so;
        so.horizon = cfg.horizon;
        so.warmup = cfg.warmup;
        so.seed = cfg.seed;
        so.replication = static_cast<std::uint64_t>(r);
        so.batches = cfg.batches;
        so.record_events = cfg.record_events && r == 0;
        const auto res = run_simulation(params, pop, policy, so);
        summary.row({std::to_string(r), std::to_string(N), fmt(res.scaled_idleness_mean), fmt(res.scaled_idleness_se),
                     fmt(res.scaled_queue_mean), fmt(res.scaled_queue_se), fmt(res.abandonment_fraction),
                     std::to_string(res.arrivals), std::to_string(res.departures), std::to_string(res.abandonments),
                     std::to_string(res.in_system)});
        if (r != 0) continue;
        const auto servers_path = out_dir / "servers.csv";
        Csv servers(servers_path, cfg, {"index", "a", "mu_min", "mu_max", "mu", "idle_fraction"});
        for (std::size_t k = 0; k < pop.size(); ++k) {
            const auto& s = pop.servers[k];
            servers.row({std::to_string(k), fmt(s.a), fmt(s.mu_min), fmt(s.mu_max), fmt(s.mu),
                         fmt(res.idle_fraction[k])});
        }
        written.push_back(servers_path);
        if (so.record_events) {
            const auto events_path = out_dir / "events.csv";
            Csv events(events_path, cfg, {"time", "kind", "server", "queue_len"});
            static const char* kinds[] = {"arrival", "departure", "abandonment"};
            for (const auto& e : res.events) {
                events.row({fmt(e.time), kinds[static_cast<int>(e.kind)], std::to_string(e.server),
                            std::to_string(e.queue_length)});
            }
            written.push_back(events_path);
        }
    }
    written.insert(written.begin(), summary_path);
    return written;
}

std::vector<fs::path> cmd_validate(const ExperimentConfig& cfg, const fs::path& out_dir) {
    for (int n : cfg.n_list) {
        if (n < 2) throw ConfigError("validation needs every n >= 2");
    }
    fs::create_directories(out_dir);
    const auto eq = solve_config_equilibrium(cfg);
    ValidationOptions vo;
    vo.replications = cfg.replications;
    vo.horizon = cfg.horizon;
    vo.warmup = cfg.warmup;
    vo.bins = cfg.bins;
    const auto path = out_dir / "validation.csv";
    Csv csv(path, cfg,
            {"n", "servers", "sup_gap", "sup_gap_se", "idle_mean", "idle_se", "idle_theory", "idle_gap", "tv_gap",
             "tv_gap_se"});
    for (int n : cfg.n_list) {
        const auto r = validate_scale(cfg, eq, n, vo);
        csv.row({std::to_string(r.n), std::to_string(r.servers), fmt(r.sup_gap), fmt(r.sup_gap_se), fmt(r.idle_mean),
                 fmt(r.idle_se), fmt(r.idle_theory), fmt(r.idle_gap), fmt(r.tv_gap), fmt(r.tv_gap_se)});
    }
    return {path};
}

std::vector<fs::path> cmd_fairness(const ExperimentConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const auto eq = solve_config_equilibrium(cfg);
    const auto funcs = cfg.functions();
    const RateDistribution& F = eq.distribution.law();
    const auto sol = solve_L(F, funcs.h, cfg.model.beta);
    const auto att = check_attainable(sol.density, F, cfg.model.beta, F.mean());
    ModelParams params = cfg.model;
    if (!(params.lambda_bar > 0.0)) throw ConfigError("fairness needs lambda_bar > 0");

    const auto grid_path = out_dir / "fairness.csv";
    {
        Csv csv(grid_path, cfg, {"mu", "g", "conditional_idleness"});
        const int points = 500;
        for (int i = 0; i <= points; ++i) {
            const double mu = F.lo() + (F.hi() - F.lo()) * i / points;
            csv.row({fmt(mu), fmt(sol.density(mu)), fmt(conditional_idleness_alpha1(mu, sol.L, funcs.h))});
        }
    }
    const auto summary_path = out_dir / "fairness_summary.csv";
    {
        Csv csv(summary_path, cfg, {"key", "value"});
        csv.row({"L", fmt(sol.L)});
        csv.row({"residual", fmt(sol.residual)});
        csv.row({"iterations", std::to_string(sol.iterations)});
        csv.row({"bracket_lo", fmt(sol.bracket_lo)});
        csv.row({"bracket_hi", fmt(sol.bracket_hi)});
        csv.row({"moment", fmt(sol.density.moment)});
        csv.row({"attainable", att.attainable ? "true" : "false"});
        csv.row({"slack", fmt(att.slack)});
        csv.row({"stationary_scaled_idleness", fmt(stationary_scaled_idleness(params, F.mean(), sol.density.moment))});
        for (auto kind : {PolicyKind::LongestIdleServerFirst, PolicyKind::UniformRandom, PolicyKind::FastestServerFirst,
                          PolicyKind::SlowestServerFirst}) {
            csv.row({to_string(kind) + "_moment", fmt(special_policy_fairness({kind, {}}, F).moment())});
        }
    }
    return {grid_path, summary_path};
}

std::vector<fs::path> cmd_limits(const ExperimentConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const auto eq = solve_config_equilibrium(cfg);
    const auto funcs = cfg.functions();
    const RateDistribution& F = eq.distribution.law();
    const double moment = solve_L(F, funcs.h, cfg.model.beta).density.moment;
    std::vector<fs::path> written;

    FluidSpec fluid;
    fluid.xi0 = 0.0;
    fluid.beta = cfg.model.beta;
    fluid.lambda_bar = cfg.model.lambda_bar;
    fluid.mu_bar = F.mean();
    fluid.alpha = cfg.model.alpha;
    fluid.moment = moment;
    std::vector<double> grid;
    const int steps = 1000;
    for (int i = 0; i <= steps; ++i) grid.push_back(cfg.fluid_horizon * i / steps);
    const auto traj = fluid_integrate(fluid, grid);
    double fluid_dev = 0.0;
    {
        const auto path = out_dir / "fluid.csv";
        Csv csv(path, cfg, {"t", "closed_form", "rk4"});
        for (const auto& p : traj) {
            const double exact = fluid_closed_form(fluid, p.t);
            fluid_dev = std::max(fluid_dev, std::abs(exact - p.value));
            csv.row({fmt(p.t), fmt(exact), fmt(p.value)});
        }
        written.push_back(path);
    }

    DiffusionSpec ds;
    ds.lambda_bar = cfg.model.lambda_bar;
    ds.mu_bar = F.mean();
    ds.sigma2 = F.variance();
    ds.beta = cfg.model.beta;
    ds.gamma = cfg.model.gamma;
    ds.moment = moment;
    DiffusionOptions dopt;
    dopt.dt = cfg.diffusion_dt;
    dopt.horizon = cfg.diffusion_horizon;
    dopt.paths = cfg.diffusion_paths;
    dopt.seed = cfg.seed;
    dopt.record_every = std::max(1, static_cast<int>(std::lround(0.01 / cfg.diffusion_dt)));
    const auto diff = diffusion_simulate(ds, dopt);
    // With zero noise the path is the Euler solution of the fluid equation
    // with the same drift; compare it to the closed form.
    FluidSpec piecewise = fluid;
    piecewise.alpha = 0.5;
    double diffusion_fluid_dev = std::numeric_limits<double>::quiet_NaN();
    {
        const auto path = out_dir / "diffusion.csv";
        Csv csv(path, cfg, {"t", "value"});
        if (ds.lambda_bar == 0.0) diffusion_fluid_dev = 0.0;
        for (const auto& p : diff.sample_path) {
            csv.row({fmt(p.t), fmt(p.value)});
            if (ds.lambda_bar == 0.0) {
                diffusion_fluid_dev = std::max(diffusion_fluid_dev, std::abs(p.value - fluid_closed_form(piecewise, p.t)));
            }
        }
        written.push_back(path);
    }

    std::optional<AllocationRun> alloc;
    if (cfg.model.lambda_bar > 0.0) {
        const auto start = allocation_grid(F, cfg.model.beta, cfg.model.lambda_bar, cfg.allocation_cells);
        const auto [target, L] = allocation_fixed_point(start, cfg.model, funcs.h);
        alloc = allocation_fluid_converge(start, cfg.model, funcs.h, target);
        const auto path = out_dir / "allocation_trace.csv";
        Csv csv(path, cfg, {"t", "max_drift", "tv"});
        for (const auto& p : alloc->trace) csv.row({fmt(p.t), fmt(p.max_drift), fmt(p.tv)});
        written.push_back(path);
        const auto fpath = out_dir / "allocation.csv";
        Csv fcsv(fpath, cfg, {"t", "cell_mid", "mass", "target"});
        const auto& s = alloc->final_state;
        for (std::size_t i = 0; i < s.cells(); ++i) {
            fcsv.row({fmt(s.t), fmt(s.midpoint(i)), fmt(s.mass[i]), fmt(target.mass[i])});
        }
        written.push_back(fpath);
    }

    const auto path = out_dir / "limits_summary.csv";
    Csv csv(path, cfg, {"key", "value"});
    csv.row({"fluid_max_deviation", fmt(fluid_dev)});
    csv.row({"fluid_limit", fmt(-fluid.drift() / moment)});
    csv.row({"stationary_scaled_idleness", fmt(fluid.drift() / moment)});
    csv.row({"diffusion_mean", fmt(diff.mean)});
    csv.row({"diffusion_mean_se", fmt(diff.mean_se)});
    csv.row({"diffusion_variance", fmt(diff.variance)});
    csv.row({"diffusion_fraction_above", fmt(diff.fraction_above)});
    csv.row({"diffusion_fluid_max_deviation", fmt(diffusion_fluid_dev)});
    if (alloc) {
        csv.row({"allocation_terminal_tv", fmt(alloc->trace.back().tv)});
        csv.row({"allocation_terminal_drift", fmt(alloc->trace.back().max_drift)});
        csv.row({"allocation_converged", alloc->converged ? "true" : "false"});
    } else {
        csv.row({"allocation_terminal_tv", "skipped"});
    }
    written.insert(written.begin(), path);
    return written;
}

}  // namespace hetsq
