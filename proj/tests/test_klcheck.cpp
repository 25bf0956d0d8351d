#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bundlecodec/klcheck.hpp"

#include <cmath>

using namespace bundlecodec::kl;

TEST_CASE("closed form agrees with quadrature at the reference points") {
    // sigma = beta = 1
    KlParams unit{1.0, 1.0};
    const double cf1 = kl_closed_form(unit);
    CHECK(cf1 == doctest::Approx(0.229782).epsilon(1e-5));
    CHECK(std::abs(cf1 - kl_quadrature(unit)) < 1e-8);

    // the paper-scale parameters: sigma = 2, beta = 10
    KlParams paper{2.0, 10.0};
    const double cf2 = kl_closed_form(paper);
    CHECK(cf2 == doctest::Approx(1.210700).epsilon(1e-5));
    CHECK(std::abs(cf2 - kl_quadrature(paper)) < 1e-8);
}

TEST_CASE("isolated moment step: E_p[exp(-x/beta)] = exp(sigma^2/(2 beta^2))") {
    KlParams p{2.0, 10.0};
    const double want = std::exp(0.02);
    CHECK(want == doctest::Approx(1.020201).epsilon(1e-5));
    CHECK(std::abs(gumbel_moment_quadrature(p) - want) < 1e-8);
}

TEST_CASE("closed form matches quadrature on the 10x10 grid and stays nonnegative") {
    for (int i = 0; i < 10; ++i) {
        for (int j = 0; j < 10; ++j) {
            KlParams p;
            p.sigma = 0.5 + (4.0 - 0.5) * i / 9.0;
            p.beta = 1.0 + (20.0 - 1.0) * j / 9.0;
            const double cf = kl_closed_form(p);
            const double q = kl_quadrature(p);
            CHECK(std::abs(cf - q) < 1e-8);
            CHECK(cf >= 0.0); // Gibbs' inequality
        }
    }
}

TEST_CASE("Monte Carlo estimate lands within three standard errors") {
    KlParams p{1.5, 4.0};
    const double cf = kl_closed_form(p);
    McResult mc = kl_monte_carlo(p, 1000000, 12345);
    CHECK(std::abs(mc.value - cf) <= 3.0 * mc.std_error);
    // seeded: bitwise reproducible
    McResult mc2 = kl_monte_carlo(p, 1000000, 12345);
    CHECK(mc.value == mc2.value);
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(kl_closed_form({0.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(kl_closed_form({1.0, -2.0}), std::invalid_argument);
    CHECK_THROWS_AS(kl_quadrature({-1.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(kl_monte_carlo({1.0, 1.0}, 10, 0), std::invalid_argument);
}
