#include <doctest.h>

#include <cmath>
#include <functional>

#include "hetsq/error.hpp"
#include "hetsq/fairness.hpp"
#include "hetsq/limits.hpp"

using namespace hetsq;

namespace {

// Composite Simpson on [a, b] with an even number of panels.
double simpson(const std::function<double(double)>& f, double a, double b, int panels = 20000) {
    const double h = (b - a) / panels;
    double s = f(a) + f(b);
    for (int i = 1; i < panels; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

// Fairness equation for F uniform on [a, b] and h(mu) = mu^r, solved
// independently of the library: Simpson quadrature and plain bisection.
double oracle_L(double a, double b, double r, double beta) {
    const double mean = 0.5 * (a + b);
    auto G = [&](double L) {
        return (1.0 + beta) / mean *
                   simpson([&](double mu) { return mu / (1.0 + L * std::pow(mu, r - 1.0)) / (b - a); }, a, b) -
               beta;
    };
    double lo = 1e-8, hi = 1e3;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (G(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("special policy fairness") {
    const auto F = RateDistribution::uniform(1.0, 2.0);
    const auto lisf = special_policy_fairness(RoutingPolicy::lisf(), F);
    CHECK(lisf.total() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(lisf.moment() == doctest::Approx(14.0 / 9.0).epsilon(1e-12));
    CHECK(lisf.density(1.2) == doctest::Approx(0.8));
    CHECK(special_policy_fairness(RoutingPolicy::uniform(), F).moment() == doctest::Approx(14.0 / 9.0));
    const auto fsf = special_policy_fairness(RoutingPolicy::fsf(), F);
    const auto ssf = special_policy_fairness(RoutingPolicy::ssf(), F);
    CHECK(fsf.moment() == doctest::Approx(1.0));
    CHECK(ssf.moment() == doctest::Approx(2.0));
    CHECK_THROWS_AS(special_policy_fairness(RoutingPolicy::h_random(power_fn(-1.0)), F), UnsupportedError);
}

TEST_CASE("fairness equation: closed forms and an independent oracle") {
    const double beta = 0.3;
    // Point mass: the rate-weighted idleness must equal beta / (1 + beta).
    {
        const auto F = RateDistribution::point_mass(0.4);
        const auto s = solve_L(F, power_fn(-1.0), beta);
        CHECK(1.0 / (1.0 + s.L / (0.4 * 0.4)) == doctest::Approx(beta / (1.0 + beta)).epsilon(1e-9));
        CHECK(s.density(0.4) == doctest::Approx(1.0));
    }
    // h = 1: L equals <iota, eta> / beta.
    for (const auto& F : {RateDistribution::uniform(0.2, 0.5), RateDistribution::uniform(1.0, 3.0),
                          RateDistribution::discrete({{0.1, 1.0}, {0.3, 2.0}, {0.9, 0.5}})}) {
        const auto s = solve_L(F, power_fn(0.0), beta, 1e-13);
        CHECK(s.L == doctest::Approx(s.density.moment / beta).epsilon(1e-10));
    }
    const double golden = oracle_L(0.2, 0.5, -1.0, beta);
    const auto s = solve_L(RateDistribution::uniform(0.2, 0.5), power_fn(-1.0), beta, 1e-13);
    CHECK(s.L == doctest::Approx(golden).epsilon(1e-9));
    CHECK(std::abs(s.residual) < 1e-13);
    CHECK(oracle_L(0.2, 0.5, 0.5, beta) ==
          doctest::Approx(solve_L(RateDistribution::uniform(0.2, 0.5), power_fn(0.5), beta, 1e-13).L).epsilon(1e-9));
    CHECK_THROWS_AS(solve_L(RateDistribution::uniform(0.2, 0.5), power_fn(-1.0), 0.0), DomainError);
}

TEST_CASE("fairness equation properties") {
    const auto F = RateDistribution::uniform(0.01, 0.5);
    const double beta = 0.3;
    for (double r : {-2.0, -1.0, 0.0, 0.5}) {
        const auto h = power_fn(r);
        double prev = fairness_equation(F, h, beta, 1e-4);
        for (int i = 1; i <= 60; ++i) {
            const double L = 1e-4 * std::pow(1.3, i);
            const double cur = fairness_equation(F, h, beta, L);
            REQUIRE(cur < prev);
            prev = cur;
        }
        const auto s = solve_L(F, h, beta);
        // The density integrates to one.
        CHECK(F.integrate([&](double mu) { return s.density(mu); }) == doctest::Approx(1.0).epsilon(1e-12));
        // Rate-weighted idleness balances the safety capacity.
        const double lambda_bar = 100.0;
        const double mu_bar = F.mean();
        const double balance = (1.0 + beta) * lambda_bar / mu_bar *
                               F.integrate([&](double mu) { return mu * conditional_idleness_alpha1(mu, s.L, h); });
        CHECK(balance == doctest::Approx(lambda_bar * beta).epsilon(1e-9));
        // Rescaling h rescales L and leaves the density unchanged.
        for (double kappa : {0.1, 10.0}) {
            const auto sk = solve_L(F, scaled(h, kappa), beta, 1e-13);
            CHECK(sk.L * kappa == doctest::Approx(s.L).epsilon(1e-8));
            for (double mu : {0.02, 0.2, 0.45}) CHECK(sk.density(mu) == doctest::Approx(s.density(mu)).epsilon(1e-8));
        }
    }
}

TEST_CASE("conditional idleness") {
    CHECK(conditional_idleness_alpha1(0.1, 0.01, power_fn(-1.0)) == doctest::Approx(0.5));
    CHECK(conditional_idleness_alpha1(0.5, 0.0, power_fn(-1.0)) == 1.0);
    CHECK_THROWS_AS(conditional_idleness_alpha1(0.5, -1.0, power_fn(-1.0)), DomainError);

    ModelParams p;
    const auto F = RateDistribution::uniform(0.2, 0.5);
    const auto s1 = solve_L(F, power_fn(0.0), p.beta, 1e-13);
    for (double mu : {0.2, 0.33, 0.5}) {
        CHECK(conditional_idleness_idle_order(mu, p, F) ==
              doctest::Approx(conditional_idleness_alpha1(mu, s1.L, power_fn(0.0))).epsilon(1e-9));
    }
    // Below alpha = 1 with a degenerate F the single server type carries the
    // whole scaled idleness.
    p.alpha = 0.75;
    for (double mu : {0.1, 0.4, 2.0}) {
        const auto P = RateDistribution::point_mass(mu);
        const double per_server = conditional_idleness_idle_order(mu, p, P);
        CHECK(per_server * p.lambda_bar / mu == doctest::Approx(stationary_scaled_idleness(p, mu, mu)).epsilon(1e-12));
        CHECK(per_server == doctest::Approx(p.beta * std::pow(p.lambda_bar / mu, p.alpha - 1.0)).epsilon(1e-12));
    }
}

TEST_CASE("attainable targets and the inverse design") {
    const auto F = RateDistribution::uniform(0.2, 0.5);
    const double beta = 0.3;
    const double lambda_bar = 100.0;
    const std::vector<std::function<double(double)>> targets{
        [](double) { return 1.0; },
        [](double mu) { return mu; },
        [](double mu) { return 2.0 - mu; },
    };
    for (const auto& g : targets) {
        const auto check = check_attainable(g, F, beta, F.mean());
        REQUIRE(check.attainable);
        const auto h = h_for_target_density(g, F, beta, lambda_bar);
        const auto s = solve_L(F, h, beta, 1e-13);
        CHECK(s.L == doctest::Approx(lambda_bar).epsilon(1e-8));
        const double z = F.integrate(g);
        for (double mu : {0.21, 0.3, 0.49}) CHECK(s.density(mu) == doctest::Approx(g(mu) / z).epsilon(1e-8));
    }
    auto steep = [](double mu) { return std::pow(mu, 10.0); };
    const auto bad = check_attainable(steep, F, beta, F.mean());
    CHECK_FALSE(bad.attainable);
    CHECK(bad.upper_slack < 0.0);
    CHECK_THROWS_AS(h_for_target_density(steep, F, beta, lambda_bar), DomainError);
    CHECK_THROWS_AS(h_for_target_density([](double mu) { return mu - 0.3; }, F, beta, lambda_bar), DomainError);
}
