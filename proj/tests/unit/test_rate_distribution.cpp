#include <doctest.h>

#include <cmath>

#include "hetsq/error.hpp"
#include "hetsq/fairness_measure.hpp"
#include "hetsq/rate_distribution.hpp"

using namespace hetsq;

TEST_CASE("uniform law") {
    const auto F = RateDistribution::uniform(1.0, 2.0);
    CHECK(F.mean() == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(F.variance() == doctest::Approx(1.0 / 12.0).epsilon(1e-10));
    CHECK(F.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(F.integrate([](double x) { return x * x; }) == doctest::Approx(7.0 / 3.0).epsilon(1e-12));
    CHECK(F.cdf(0.5) == 0.0);
    CHECK(F.cdf(1.25) == doctest::Approx(0.25));
    CHECK(F.cdf(3.0) == 1.0);
    CHECK(F.quantile(0.25) == doctest::Approx(1.25).epsilon(1e-10));
    CHECK(F.pdf(1.7) == doctest::Approx(1.0));
}

TEST_CASE("discrete laws merge atoms and normalize") {
    const auto F = RateDistribution::discrete({{0.2, 1.0}, {0.4, 2.0}, {0.2, 1.0}});
    CHECK(F.is_discrete());
    CHECK(F.nodes().size() == 2);
    CHECK(F.mean() == doctest::Approx(0.3));
    CHECK(F.cdf(0.2) == doctest::Approx(0.5));
    CHECK(F.cdf(0.1999) == 0.0);
    CHECK(F.quantile(0.5) == doctest::Approx(0.2));
    CHECK(F.quantile(0.50001) == doctest::Approx(0.4));
    CHECK(F.pdf(0.2) == 0.0);
    CHECK_THROWS_AS(RateDistribution::discrete({{0.2, -1.0}}), DomainError);

    const auto P = RateDistribution::point_mass(0.3);
    CHECK(P.mean() == doctest::Approx(0.3));
    CHECK(P.variance() == doctest::Approx(0.0));
}

TEST_CASE("law from a kinked density") {
    // Triangular density on [1, 3] with peak at 2.
    auto cdf = [](double x) { return x <= 2.0 ? 0.5 * (x - 1.0) * (x - 1.0) : 1.0 - 0.5 * (3.0 - x) * (3.0 - x); };
    auto pdf = [](double x) { return x <= 2.0 ? x - 1.0 : 3.0 - x; };
    const auto F = RateDistribution::from_density(1.0, 3.0, cdf, pdf, {2.0});
    CHECK(F.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(F.mean() == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(F.variance() == doctest::Approx(1.0 / 6.0).epsilon(1e-10));
    for (double u : {0.01, 0.3, 0.5, 0.77, 0.99}) CHECK(F.cdf(F.quantile(u)) == doctest::Approx(u).epsilon(1e-9));
    Rng rng(3);
    double s = 0.0;
    for (int i = 0; i < 100000; ++i) s += F.sample(rng);
    CHECK(s / 100000 == doctest::Approx(2.0).epsilon(3e-3));
}

TEST_CASE("fairness measure basics") {
    auto m = FairnessMeasure::from_weights({0.1, 0.2, 0.3}, {1.0, 1.0, 2.0});
    CHECK(m.total() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.moment() == doctest::Approx(0.225));
    CHECK(m.mass(0.15, 0.35) == doctest::Approx(0.75));
    const auto b = m.binned(equal_width_edges(0.1, 0.3, 2));
    CHECK(b[0] == doctest::Approx(0.25));
    CHECK(b[1] == doctest::Approx(0.75));
    CHECK(total_variation({0.5, 0.5}, {1.0, 0.0}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(FairnessMeasure::from_weights({0.1}, {0.0}), DomainError);
    CHECK_THROWS_AS(FairnessMeasure::from_weights({0.1, 0.2}, {1.0, -1.0}), DomainError);
}
