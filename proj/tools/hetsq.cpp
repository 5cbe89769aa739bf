// hetsq: command-line front end for the equilibrium solver, simulator and
// limit integrators. Exit codes: 0 ok, 2 config error, 3 solver failure,
// 4 simulation error.

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hetsq/error.hpp"
#include "hetsq/experiment.hpp"

namespace fs = std::filesystem;
using namespace hetsq;

namespace {

using Command = std::function<std::vector<fs::path>(const ExperimentConfig&, const fs::path&)>;

struct Invocation {
    std::string config;
    std::string out;
    std::vector<std::string> sets;
    std::map<std::string, std::string> overrides;
};

void add_common(CLI::App* sub, Invocation& inv) {
    sub->add_option("-c,--config", inv.config, "flat key = value config file")->check(CLI::ExistingFile);
    sub->add_option("-o,--out", inv.out, "output directory (overrides output_dir and HETSQ_OUTPUT_DIR)");
    sub->add_option("--set", inv.sets, "key=value override, repeatable");
    for (const auto& key : ExperimentConfig::keys()) {
        if (key == "output_dir") continue;
        sub->add_option_function<std::string>(
            "--" + key, [&inv, key](const std::string& v) { inv.overrides[key] = v; }, "override " + key);
    }
}

ExperimentConfig load(const Invocation& inv) {
    ExperimentConfig cfg = inv.config.empty() ? ExperimentConfig{} : ExperimentConfig::from_file(inv.config);
    for (const auto& s : inv.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
        cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [k, v] : inv.overrides) cfg.set(k, v);
    cfg.validate();
    return cfg;
}

fs::path output_dir(const Invocation& inv, const ExperimentConfig& cfg) {
    if (!inv.out.empty()) return inv.out;
    if (const char* env = std::getenv("HETSQ_OUTPUT_DIR"); env && *env) return env;
    return cfg.output_dir;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Heterogeneous strategic servers: equilibrium, fairness, simulation and limits"};
    app.set_version_flag("--version", std::string(HETSQ_VERSION));
    app.require_subcommand(1);

    const std::vector<std::pair<std::string, std::pair<std::string, Command>>> commands{
        {"equilibrium", {"solve the rate-distribution fixed point", cmd_equilibrium}},
        {"sweep", {"equilibrium over a grid of r or beta", cmd_sweep}},
        {"simulate", {"simulate the queue with an equilibrium population", cmd_simulate}},
        {"validate", {"h-random simulations against the alpha = 1 theory", cmd_validate}},
        {"fairness", {"stationary fairness density and attainability", cmd_fairness}},
        {"limits", {"fluid, diffusion and allocation-fluid integrators", cmd_limits}},
    };
    Invocation inv;
    std::map<const CLI::App*, Command> run;
    for (const auto& [name, entry] : commands) {
        auto* sub = app.add_subcommand(name, entry.first);
        add_common(sub, inv);
        run[sub] = entry.second;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const ExperimentConfig cfg = load(inv);
        const fs::path dir = output_dir(inv, cfg);
        for (const auto& [sub, fn] : run) {
            if (!sub->parsed()) continue;
            for (const auto& p : fn(cfg, dir)) std::cout << p.string() << '\n';
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const SolverError& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        if (!e.diagnostics().empty()) std::cerr << e.diagnostics() << '\n';
        return 3;
    } catch (const UnsupportedError& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return 3;
    } catch (const SimulationError& e) {
        std::cerr << "simulation error: " << e.what() << '\n';
        return 4;
    } catch (const DomainError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
