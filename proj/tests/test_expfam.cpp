#include <doctest.h>

#include <cmath>

#include "ewa/error.hpp"
#include "ewa/expfam.hpp"

using namespace ewa;

namespace {
const double kE = std::exp(1.0);
}

TEST_CASE("cumulant examples") {
    CHECK(cumulant(Family::gaussian(), 2.0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(cumulant(Family::bernoulli(), 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(cumulant(Family::poisson(), 1.0) == doctest::Approx(kE).epsilon(1e-15));
}

TEST_CASE("bernoulli cumulant is finite for large theta") {
    const Family f = Family::bernoulli();
    CHECK(cumulant(f, 800.0) == doctest::Approx(800.0));
    CHECK(cumulant(f, -800.0) >= 0.0);
    CHECK(cumulant(f, -800.0) < 1e-300);
    CHECK(mean(f, 800.0) == 1.0);
    CHECK(variance_rate(f, -800.0) >= 0.0);
}

TEST_CASE("mean examples") {
    CHECK(mean(Family::gaussian(), 1.5) == 1.5);
    CHECK(mean(Family::bernoulli(), 0.0) == 0.5);
    CHECK(mean(Family::poisson(), std::log(3.0)) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("variance rate examples") {
    CHECK(variance_rate(Family::bernoulli(), 0.0) == 0.25);
    CHECK(variance_rate(Family::gaussian(), -7.0) == 1.0);
    CHECK(variance_rate(Family::poisson(), 1.0) == doctest::Approx(2.718281828459045).epsilon(1e-14));
}

TEST_CASE("curvature bounds") {
    CHECK(Family::bernoulli().curvature_upper() == 0.25);
    CHECK(Family::bernoulli().curvature_lower() == 0.0);
    CHECK(Family::gaussian(2.0).curvature_upper() == 1.0);
    CHECK(Family::poisson().curvature_upper() == doctest::Approx(std::exp(3.0)));
    const Family shifted = Family::bernoulli({1.0, 2.0});
    CHECK(shifted.curvature_upper() == doctest::Approx(kE / ((1 + kE) * (1 + kE))));
    CHECK(shifted.curvature_lower() == doctest::Approx(std::exp(2.0) / std::pow(1 + std::exp(2.0), 2)));
}

TEST_CASE("configuration errors") {
    CHECK_THROWS_AS(Family::gaussian(0.0), ConfigError);
    CHECK_THROWS_AS(Family::gaussian(-1.0), ConfigError);
    CHECK_THROWS_AS(Family(FamilyKind::Poisson, 1.0, {}), ConfigError);
    CHECK_THROWS_AS(Family::gaussian(1.0, {2.0, 1.0}), ConfigError);
}

TEST_CASE("sampling requires a = 1 outside the Gaussian family") {
    Rng rng = make_rng(1, "scale");
    CHECK_THROWS_AS(sample_response(Family(FamilyKind::Bernoulli, 2.0, {-50.0, 50.0}), 0.0, rng), ConfigError);
    CHECK_THROWS_AS(sample_response(Family(FamilyKind::Poisson, 0.5, {-1.0, 1.0}), 0.0, rng), ConfigError);
}

TEST_CASE("domain errors name the interval") {
    const Family f = Family::poisson();
    CHECK_THROWS_AS(cumulant(f, 3.5), DomainError);
    CHECK_THROWS_AS(mean(f, 4.0), DomainError);
    CHECK_THROWS_AS(variance_rate(f, 10.0), DomainError);
    try {
        cumulant(f, 3.5);
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("3.5") != std::string::npos);
    }
    CHECK_NOTHROW(cumulant(f, 3.0));
}

TEST_CASE("family names") {
    CHECK(parse_family_kind("gaussian") == FamilyKind::Gaussian);
    CHECK(parse_family_kind("bernoulli") == FamilyKind::Bernoulli);
    CHECK(parse_family_kind("logistic") == FamilyKind::Bernoulli);
    CHECK(parse_family_kind("poisson") == FamilyKind::Poisson);
    CHECK_THROWS_AS(parse_family_kind("gamma"), ConfigError);
    CHECK(to_string(FamilyKind::Poisson) == "poisson");
}

TEST_CASE("finite differences: b to b' and b' to b''") {
    Rng rng = make_rng(11, "fd");
    for (const Family& f : {Family::gaussian(), Family::bernoulli(), Family::poisson()}) {
        const double lo = std::max(f.theta_interval().lo, -10.0);
        const double hi = std::min(f.theta_interval().hi, 10.0) - 1e-3;
        for (int i = 0; i < 1000; ++i) {
            const double t = lo + 1e-3 + (hi - lo - 1e-3) * (i + 0.5) / 1000.0;
            const double h = 1e-3;
            const double d1 = (cumulant(f, t + h) - cumulant(f, t - h)) / (2 * h);
            const double d2 = (mean(f, t + h) - mean(f, t - h)) / (2 * h);
            CHECK(std::abs(d1 - mean(f, t)) <= 1e-6 * std::max(std::abs(mean(f, t)), 1e-8));
            CHECK(std::abs(d2 - variance_rate(f, t)) <= 1e-5 * std::max(variance_rate(f, t), 1e-8));
        }
    }
}

TEST_CASE("variance rate stays within curvature bounds") {
    Rng rng = make_rng(12, "bounds");
    const Family fams[] = {Family::gaussian(), Family::bernoulli({-4.0, 6.0}), Family::poisson({-3.0, 2.0})};
    for (const Family& f : fams) {
        const Interval iv = f.theta_interval();
        const double lo = std::max(iv.lo, -20.0), hi = std::min(iv.hi, 20.0);
        for (int i = 0; i < 1000; ++i) {
            const double v = variance_rate(f, lo + (hi - lo) * uniform01(rng));
            CHECK(v <= f.curvature_upper() * (1 + 1e-12));
            CHECK(v >= f.curvature_lower() * (1 - 1e-12));
        }
    }
}

TEST_CASE("cumulant is convex") {
    Rng rng = make_rng(13, "convex");
    for (const Family& f : {Family::gaussian(), Family::bernoulli(), Family::poisson()}) {
        for (int i = 0; i < 1000; ++i) {
            const double a = -10 + 13 * uniform01(rng), b = -10 + 13 * uniform01(rng), t = uniform01(rng);
            CHECK(cumulant(f, t * a + (1 - t) * b) <= t * cumulant(f, a) + (1 - t) * cumulant(f, b) + 1e-12);
        }
    }
}

TEST_CASE("sample_response Monte Carlo mean") {
    const double theta = 0.7;
    for (const Family& f : {Family::gaussian(2.0), Family::bernoulli(), Family::poisson()}) {
        Rng rng = make_rng(14, "mc", static_cast<std::uint64_t>(f.kind()));
        const int N = 100000;
        double s = 0.0;
        for (int i = 0; i < N; ++i) s += sample_response(f, theta, rng);
        const double se = std::sqrt(f.scale() * variance_rate(f, theta) / N);
        CHECK(std::abs(s / N - mean(f, theta)) <= 4 * se);
    }
}

TEST_CASE("sample_response edge cases") {
    Rng rng = make_rng(15, "edge");
    const Family capped = Family::bernoulli({-50.0, 50.0});
    for (int i = 0; i < 100; ++i) CHECK(sample_response(capped, 50.0, rng) == 1.0);
    const Family pois = Family::poisson({-60.0, 3.0});
    double s = 0.0;
    for (int i = 0; i < 1000; ++i) s += sample_response(pois, -50.0, rng);
    CHECK(s == 0.0);
}

TEST_CASE("sample_response is deterministic given the stream") {
    Rng a = make_rng(16, "det"), b = make_rng(16, "det");
    for (int i = 0; i < 100; ++i) CHECK(sample_response(Family::poisson(), 1.0, a) == sample_response(Family::poisson(), 1.0, b));
}
