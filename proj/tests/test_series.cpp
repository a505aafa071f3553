#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <subpop/series.hpp>

#include "oracles.hpp"

using namespace subpop;

TEST_CASE("n=0 returns the single term") {
    auto r = alternating_binomial_sum(0, [](int) { return 0.731; });
    CHECK(r.value == doctest::Approx(0.731).epsilon(1e-15));
    CHECK_FALSE(r.cancellation_warning);
}

TEST_CASE("binomial theorem check") {
    // Σ C(10,j)(-1)^j 0.5^j = 0.5^10
    auto r = alternating_binomial_sum(10, [](int j) { return std::pow(0.5, j); });
    CHECK(r.value == doctest::Approx(9.765625e-4).epsilon(1e-12));
}

TEST_CASE("constant term collapses to the n=0 indicator") {
    for (int n : {1, 5, 17, 40}) {
        auto r = alternating_binomial_sum(n, [](int) { return 1.0; });
        CHECK(std::abs(r.value) <= r.cancellation_error + 1e-14);
    }
}

TEST_CASE("matches 50-digit oracle on a stretched exponential") {
    auto term = [](int j) { return std::exp(-0.1 * std::sqrt(j + 1.0)); };
    // n=12: moderate cancellation, tight agreement expected
    {
        auto r = alternating_binomial_sum(12, [&](int j) { return term(j); });
        double expected = oracles::alternating_sum_highprec(
            12, [&](double j) { return term(static_cast<int>(j)); });
        CHECK(r.value == doctest::Approx(expected).epsilon(1e-10));
    }
    // n=30: twelve orders of cancellation; the reported error estimate has to
    // cover the actual deviation from the 50-digit value
    {
        auto r = alternating_binomial_sum(30, [&](int j) { return term(j); });
        double expected = oracles::alternating_sum_highprec(
            30, [&](double j) { return term(static_cast<int>(j)); });
        CHECK(std::abs(r.value - expected) <= r.cancellation_error);
        CHECK(r.value == doctest::Approx(expected).epsilon(0.05));
    }
}

TEST_CASE("cancellation estimate flags hopeless sums") {
    // n=80 with slowly varying terms: answer is ~C(80,40)*eps below the
    // largest summand, far past double precision
    auto r = alternating_binomial_sum(80, [](int j) { return std::exp(-1e-3 * (j + 1)); });
    CHECK(r.cancellation_warning);
}
