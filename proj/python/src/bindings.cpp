#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hetsq/equilibrium.hpp"
#include "hetsq/error.hpp"
#include "hetsq/experiment.hpp"
#include "hetsq/fairness.hpp"
#include "hetsq/limits.hpp"
#include "hetsq/model.hpp"
#include "hetsq/routing.hpp"
#include "hetsq/sim.hpp"

namespace py = pybind11;
using namespace hetsq;

namespace {

RoutingPolicy policy_from(const std::string& name, double r) {
    const PolicyKind kind = parse_policy_kind(name);
    if (kind == PolicyKind::HRandom) return RoutingPolicy::h_random(power_fn(r));
    return {kind, {}};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Equilibrium, fairness, simulation and limit solvers for many-server queues with strategic servers";
    m.attr("__version__") = HETSQ_VERSION;

    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<UnsupportedError>(m, "UnsupportedError", PyExc_RuntimeError);
    py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);
    py::register_exception<SimulationError>(m, "SimulationError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    py::class_<ModelParams>(m, "ModelParams")
        .def(py::init<>())
        .def(py::init([](double lambda_bar, double beta, double alpha, double gamma, int n) {
                 ModelParams p{lambda_bar, beta, alpha, gamma, n};
                 p.validate();
                 return p;
             }),
             py::arg("lambda_bar") = 100.0, py::arg("beta") = 0.3, py::arg("alpha") = 1.0, py::arg("gamma") = 1.0,
             py::arg("n") = 1)
        .def_readwrite("lambda_bar", &ModelParams::lambda_bar)
        .def_readwrite("beta", &ModelParams::beta)
        .def_readwrite("alpha", &ModelParams::alpha)
        .def_readwrite("gamma", &ModelParams::gamma)
        .def_readwrite("n", &ModelParams::n)
        .def("arrival_rate", &ModelParams::arrival_rate);

    py::class_<PowerFamily>(m, "PowerFamily")
        .def(py::init([](double p, double q, double r) { return PowerFamily{p, q, r}; }), py::arg("p") = 1.0,
             py::arg("q") = 2.0, py::arg("r") = -1.0)
        .def_readwrite("p", &PowerFamily::p)
        .def_readwrite("q", &PowerFamily::q)
        .def_readwrite("r", &PowerFamily::r)
        .def("marginal_rate", [](const PowerFamily& f, double mu, double L) {
            return marginal_rate_of_substitution(mu, L, f.functions());
        });

    py::class_<PopulationDistributions>(m, "PopulationDistributions")
        .def(py::init([](double mu_min, double mu_max, double a_min, double a_max) {
                 PopulationDistributions d;
                 d.mu_min = mu_min;
                 d.mu_max = mu_max;
                 d.a_min = a_min;
                 d.a_max = a_max;
                 d.validate();
                 return d;
             }),
             py::arg("mu_min") = 0.01, py::arg("mu_max") = 0.5, py::arg("a_min") = 0.01, py::arg("a_max") = 25.0)
        .def_readonly("mu_min", &PopulationDistributions::mu_min)
        .def_readonly("mu_max", &PopulationDistributions::mu_max)
        .def_readonly("a_min", &PopulationDistributions::a_min)
        .def_readonly("a_max", &PopulationDistributions::a_max);

    py::class_<RateDistribution>(m, "RateDistribution")
        .def_static("point_mass", &RateDistribution::point_mass)
        .def_static("uniform", &RateDistribution::uniform, py::arg("lo"), py::arg("hi"), py::arg("nodes") = 256)
        .def_static("discrete",
                    [](const std::vector<std::pair<double, double>>& atoms) {
                        std::vector<QuadNode> nodes;
                        for (const auto& [x, w] : atoms) nodes.push_back({x, w});
                        return RateDistribution::discrete(std::move(nodes));
                    })
        .def_property_readonly("lo", &RateDistribution::lo)
        .def_property_readonly("hi", &RateDistribution::hi)
        .def_property_readonly("mean", &RateDistribution::mean)
        .def_property_readonly("variance", &RateDistribution::variance)
        .def("cdf", &RateDistribution::cdf)
        .def("pdf", &RateDistribution::pdf)
        .def("quantile", &RateDistribution::quantile);

    py::class_<EquilibriumSolution>(m, "EquilibriumSolution")
        .def_readonly("L_star", &EquilibriumSolution::L_star)
        .def_readonly("residual", &EquilibriumSolution::residual)
        .def_readonly("mu_bar", &EquilibriumSolution::mu_bar)
        .def_readonly("sigma2", &EquilibriumSolution::sigma2)
        .def_readonly("staffing", &EquilibriumSolution::staffing)
        .def_readonly("sign_changes", &EquilibriumSolution::sign_changes)
        .def_readonly("scan", &EquilibriumSolution::scan)
        .def_property_readonly("fairness_moment", [](const EquilibriumSolution& s) { return s.fairness.moment; })
        .def_property_readonly("distribution", [](const EquilibriumSolution& s) { return s.distribution.law(); })
        .def("cdf", [](const EquilibriumSolution& s, double mu) { return s.distribution.cdf(mu); })
        .def("pdf", [](const EquilibriumSolution& s, double mu) { return s.distribution.pdf(mu); });

    m.def(
        "solve_equilibrium",
        [](const PopulationDistributions& d, const PowerFamily& f, double beta, double lambda_n) {
            EquilibriumOptions o;
            o.lambda_n = lambda_n;
            return solve_equilibrium(d, f.functions(), beta, o);
        },
        py::arg("population"), py::arg("family"), py::arg("beta") = 0.3, py::arg("lambda_n") = 100.0);

    m.def(
        "best_response",
        [](double a, double mu_min, double mu_max, double L, const PowerFamily& f) {
            const auto br = best_response({a, mu_min, mu_max}, L, f.functions());
            return py::make_tuple(br.mu_star, std::string(to_string(br.regime)), br.utility);
        },
        py::arg("a"), py::arg("mu_min"), py::arg("mu_max"), py::arg("L"), py::arg("family"));

    m.def(
        "solve_L",
        [](const RateDistribution& F, double r, double beta) {
            const auto s = solve_L(F, power_fn(r), beta);
            return py::dict(py::arg("L") = s.L, py::arg("residual") = s.residual,
                            py::arg("moment") = s.density.moment, py::arg("iterations") = s.iterations);
        },
        py::arg("F"), py::arg("r"), py::arg("beta"));

    m.def("conditional_idleness", [](double mu, double L, double r) {
        return conditional_idleness_alpha1(mu, L, power_fn(r));
    });

    m.def("stationary_scaled_idleness", &stationary_scaled_idleness, py::arg("params"), py::arg("mu_bar"),
          py::arg("fairness_moment"));

    m.def(
        "fluid_closed_form",
        [](double xi0, double beta, double lambda_bar, double mu_bar, double alpha, double moment, double t) {
            FluidSpec s;
            s.xi0 = xi0;
            s.beta = beta;
            s.lambda_bar = lambda_bar;
            s.mu_bar = mu_bar;
            s.alpha = alpha;
            s.moment = moment;
            return fluid_closed_form(s, t);
        },
        py::arg("xi0"), py::arg("beta"), py::arg("lambda_bar"), py::arg("mu_bar"), py::arg("alpha"),
        py::arg("moment"), py::arg("t"));

    m.def(
        "run_simulation",
        [](const ModelParams& params, const std::vector<double>& rates, const std::string& policy, double r,
           double horizon, double warmup, std::uint64_t seed, std::uint64_t replication) {
            SimulationOptions o;
            o.horizon = horizon;
            o.warmup = warmup;
            o.seed = seed;
            o.replication = replication;
            const auto res = run_simulation(params, ServerPopulation::from_rates(rates), policy_from(policy, r), o);
            py::dict d;
            d["idle_fraction"] = res.idle_fraction;
            d["scaled_idleness_mean"] = res.scaled_idleness_mean;
            d["scaled_idleness_se"] = res.scaled_idleness_se;
            d["scaled_queue_mean"] = res.scaled_queue_mean;
            d["abandonment_fraction"] = res.abandonment_fraction;
            d["arrivals"] = res.arrivals;
            d["departures"] = res.departures;
            d["abandonments"] = res.abandonments;
            d["in_system"] = res.in_system;
            return d;
        },
        py::arg("params"), py::arg("rates"), py::arg("policy") = "uniform", py::arg("r") = -1.0,
        py::arg("horizon") = 1000.0, py::arg("warmup") = -1.0, py::arg("seed") = 1, py::arg("replication") = 0);

    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def(py::init<>())
        .def_static("from_file", &ExperimentConfig::from_file)
        .def("set", &ExperimentConfig::set)
        .def("validate", &ExperimentConfig::validate)
        .def("hash", &ExperimentConfig::hash)
        .def("canonical", &ExperimentConfig::canonical);

    m.def("cmd_equilibrium", &cmd_equilibrium);
    m.def("cmd_sweep", &cmd_sweep);
    m.def("cmd_simulate", &cmd_simulate);
    m.def("cmd_validate", &cmd_validate);
    m.def("cmd_fairness", &cmd_fairness);
    m.def("cmd_limits", &cmd_limits);
}
