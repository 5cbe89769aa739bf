#include "hetsq/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hetsq/equilibrium.hpp"
#include "hetsq/error.hpp"

namespace hetsq {

void ModelParams::validate() const {
    if (!(lambda_bar > 0.0)) throw DomainError("lambda_bar must be positive");
    if (!(beta > 0.0)) throw DomainError("beta must be positive");
    if (!(alpha >= 0.5 && alpha <= 1.0)) throw DomainError("alpha must lie in [1/2, 1]");
    if (!(gamma > 0.0)) throw DomainError("gamma must be positive");
    if (n < 1) throw DomainError("system scale n must be at least 1");
}

double offered_staffing(double lambda_n, double mu_bar, double beta, double alpha) {
    if (!(mu_bar > 0.0)) throw DomainError("mean service rate must be positive");
    if (!(lambda_n > 0.0)) throw DomainError("arrival rate must be positive");
    if (!(beta > 0.0)) throw DomainError("beta must be positive");
    if (!(alpha >= 0.5 && alpha <= 1.0)) throw DomainError("alpha must lie in [1/2, 1]");
    const double load = lambda_n / mu_bar;
    return load + beta * std::pow(load, alpha);
}

int staffing_level(double lambda_n, double mu_bar, double beta, double alpha) {
    const double x = offered_staffing(lambda_n, mu_bar, beta, alpha);
    const double nearest = std::round(x);
    if (std::abs(x - nearest) <= 1e-9 * std::max(1.0, x)) return static_cast<int>(nearest);
    return static_cast<int>(std::ceil(x));
}

double ScalarFn::derivative(double x) const {
    if (!d1) throw UnsupportedError("function has no analytic first derivative");
    return d1(x);
}

double ScalarFn::second_derivative(double x) const {
    if (!d2) throw UnsupportedError("function has no analytic second derivative");
    return d2(x);
}

ScalarFn power_fn(double e) {
    return {[e](double x) { return std::pow(x, e); },
            [e](double x) { return e == 0.0 ? 0.0 : e * std::pow(x, e - 1.0); },
            [e](double x) { return (e == 0.0 || e == 1.0) ? 0.0 : e * (e - 1.0) * std::pow(x, e - 2.0); }};
}

ScalarFn log_fn() {
    return {[](double x) { return std::log(x); }, [](double x) { return 1.0 / x; },
            [](double x) { return -1.0 / (x * x); }};
}

ScalarFn negative_power_fn(double s) {
    return {[s](double x) { return -std::pow(x, -s); },
            [s](double x) { return s * std::pow(x, -s - 1.0); },
            [s](double x) { return -s * (s + 1.0) * std::pow(x, -s - 2.0); }};
}

ScalarFn scaled(const ScalarFn& fn, double k) {
    ScalarFn out;
    out.value = [v = fn.value, k](double x) { return k * v(x); };
    if (fn.d1) out.d1 = [d = fn.d1, k](double x) { return k * d(x); };
    if (fn.d2) out.d2 = [d = fn.d2, k](double x) { return k * d(x); };
    return out;
}

double PolicyFunctions::h_tilde_d1(double mu) const {
    return h.derivative(mu) / mu - h(mu) / (mu * mu);
}

double PolicyFunctions::h_tilde_d2(double mu) const {
    const double mu2 = mu * mu;
    return h.second_derivative(mu) / mu - 2.0 * h.derivative(mu) / mu2 + 2.0 * h(mu) / (mu2 * mu);
}

PolicyFunctions PowerFamily::functions() const {
    if (!(q >= 1.0)) throw DomainError("cost exponent q must be at least 1");
    return {power_fn(p), power_fn(q), power_fn(r)};
}

void PopulationDistributions::validate() const {
    if (!(mu_min > 0.0 && mu_min < mu_max)) {
        throw DomainError("population rate bounds need 0 < mu_min < mu_max");
    }
    if (!(a_min > 0.0 && a_min < a_max)) {
        throw DomainError("trade-off bounds need 0 < a_min < a_max");
    }
    if (const auto* ind = std::get_if<IndependentUniformBounds>(&bounds)) {
        if (!(ind->min_upper > mu_min && ind->min_upper <= ind->max_lower && ind->max_lower < mu_max)) {
            throw DomainError("independent bounds need mu_min < min_upper <= max_lower < mu_max");
        }
    }
}

namespace {

double uniform_cdf(double x, double lo, double hi) { return std::clamp((x - lo) / (hi - lo), 0.0, 1.0); }

double uniform_pdf(double x, double lo, double hi) {
    return (x >= lo && x <= hi) ? 1.0 / (hi - lo) : 0.0;
}

}  // namespace

double PopulationDistributions::cdf_individual_min(double mu) const {
    if (std::holds_alternative<OrderedUniformPair>(bounds)) {
        const double u = uniform_cdf(mu, mu_min, mu_max);
        return 1.0 - (1.0 - u) * (1.0 - u);
    }
    const auto& ind = std::get<IndependentUniformBounds>(bounds);
    return uniform_cdf(mu, mu_min, ind.min_upper);
}

double PopulationDistributions::cdf_individual_max(double mu) const {
    if (std::holds_alternative<OrderedUniformPair>(bounds)) {
        const double u = uniform_cdf(mu, mu_min, mu_max);
        return u * u;
    }
    const auto& ind = std::get<IndependentUniformBounds>(bounds);
    return uniform_cdf(mu, ind.max_lower, mu_max);
}

double PopulationDistributions::pdf_individual_min(double mu) const {
    if (std::holds_alternative<OrderedUniformPair>(bounds)) {
        if (mu < mu_min || mu > mu_max) return 0.0;
        const double u = uniform_cdf(mu, mu_min, mu_max);
        return 2.0 * (1.0 - u) / (mu_max - mu_min);
    }
    const auto& ind = std::get<IndependentUniformBounds>(bounds);
    return uniform_pdf(mu, mu_min, ind.min_upper);
}

double PopulationDistributions::pdf_individual_max(double mu) const {
    if (std::holds_alternative<OrderedUniformPair>(bounds)) {
        if (mu < mu_min || mu > mu_max) return 0.0;
        const double u = uniform_cdf(mu, mu_min, mu_max);
        return 2.0 * u / (mu_max - mu_min);
    }
    const auto& ind = std::get<IndependentUniformBounds>(bounds);
    return uniform_pdf(mu, ind.max_lower, mu_max);
}

double PopulationDistributions::cdf_a(double a) const { return uniform_cdf(a, a_min, a_max); }

double PopulationDistributions::pdf_a(double a) const { return uniform_pdf(a, a_min, a_max); }

std::vector<double> PopulationDistributions::kinks() const {
    if (const auto* ind = std::get_if<IndependentUniformBounds>(&bounds)) {
        return {ind->min_upper, ind->max_lower};
    }
    return {};
}

double PopulationDistributions::joint_pdf(double lo, double hi) const {
    if (std::holds_alternative<OrderedUniformPair>(bounds)) {
        if (!(lo >= mu_min && lo < hi && hi <= mu_max)) return 0.0;
        const double w = mu_max - mu_min;
        return 2.0 / (w * w);
    }
    return pdf_individual_min(lo) * pdf_individual_max(hi);
}

double PopulationDistributions::upper_tail_given_min(double lo, double x) const {
    if (std::holds_alternative<OrderedUniformPair>(bounds)) {
        if (lo < mu_min || lo > mu_max) return 0.0;
        const double w = mu_max - mu_min;
        return 2.0 * (mu_max - std::clamp(x, lo, mu_max)) / (w * w);
    }
    return pdf_individual_min(lo) * (1.0 - cdf_individual_max(x));
}

double PopulationDistributions::lower_mass_given_max(double hi, double x) const {
    if (std::holds_alternative<OrderedUniformPair>(bounds)) {
        if (hi < mu_min || hi > mu_max) return 0.0;
        const double w = mu_max - mu_min;
        return 2.0 * (hi - std::clamp(x, mu_min, hi)) / (w * w);
    }
    return pdf_individual_max(hi) * (cdf_individual_min(hi) - cdf_individual_min(x));
}

double PopulationDistributions::box_probability(double a, double b, double c) const {
    if (std::holds_alternative<OrderedUniformPair>(bounds)) {
        const double w = mu_max - mu_min;
        const double lo = std::clamp(a, mu_min, mu_max);
        const double hi = std::clamp(b, mu_min, mu_max);
        const double top = std::clamp(c, mu_min, mu_max);
        return 2.0 * std::max(0.0, hi - lo) * (mu_max - top) / (w * w);
    }
    return std::max(0.0, cdf_individual_min(b) - cdf_individual_min(a)) * (1.0 - cdf_individual_max(c));
}

std::pair<double, double> PopulationDistributions::sample_bounds(Rng& rng) const {
    if (std::holds_alternative<OrderedUniformPair>(bounds)) {
        std::uniform_real_distribution<double> u(mu_min, mu_max);
        double x = u(rng);
        double y = u(rng);
        // A tie has probability zero; redraw to keep mu_min_k < mu_max_k strict.
        while (x == y) y = u(rng);
        return {std::min(x, y), std::max(x, y)};
    }
    const auto& ind = std::get<IndependentUniformBounds>(bounds);
    std::uniform_real_distribution<double> lo(mu_min, ind.min_upper);
    std::uniform_real_distribution<double> hi(ind.max_lower, mu_max);
    const double x = lo(rng);
    const double y = hi(rng);
    return {x, y};
}

double PopulationDistributions::sample_a(Rng& rng) const {
    std::uniform_real_distribution<double> u(a_min, a_max);
    return u(rng);
}

std::vector<double> ServerPopulation::rates() const {
    std::vector<double> out;
    out.reserve(servers.size());
    for (const auto& s : servers) out.push_back(s.mu);
    return out;
}

void ServerPopulation::validate(RateInterval bounds) const {
    for (std::size_t k = 0; k < servers.size(); ++k) {
        const auto& s = servers[k];
        if (!(bounds.lo <= s.mu_min && s.mu_min <= s.mu && s.mu <= s.mu_max && s.mu_max <= bounds.hi)) {
            throw DomainError("server " + std::to_string(k) + " violates the rate box constraints");
        }
    }
}

ServerPopulation ServerPopulation::from_rates(const std::vector<double>& rates) {
    ServerPopulation pop;
    pop.servers.reserve(rates.size());
    for (double mu : rates) {
        if (!(mu > 0.0)) throw DomainError("service rates must be positive");
        pop.servers.push_back({0.0, mu, mu, mu});
    }
    return pop;
}

ServerPopulation sample_population(const PopulationDistributions& dists, int count, std::uint64_t seed) {
    dists.validate();
    if (count < 1) throw DomainError("population count must be at least 1");
    Rng rng = make_rng(seed, 0, Stream::Population);
    ServerPopulation pop;
    pop.servers.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        const auto [lo, hi] = dists.sample_bounds(rng);
        const double a = dists.sample_a(rng);
        pop.servers.push_back({a, lo, hi, lo});
    }
    return pop;
}

bool verify_first_order_monotone(const PolicyFunctions& funcs, double L, RateInterval interval,
                                 int grid_size) {
    if (!(L > 0.0)) throw DomainError("L must be positive");
    if (grid_size < 2) throw DomainError("grid_size must be at least 2");
    const double step = (interval.hi - interval.lo) / (grid_size - 1);
    double prev = marginal_rate_of_substitution(interval.lo, L, funcs);
    if (!std::isfinite(prev)) return false;
    for (int i = 1; i < grid_size; ++i) {
        const double mu = (i + 1 == grid_size) ? interval.hi : interval.lo + i * step;
        const double cur = marginal_rate_of_substitution(mu, L, funcs);
        if (!std::isfinite(cur) || !(cur < prev)) return false;
        prev = cur;
    }
    return true;
}

}  // namespace hetsq
