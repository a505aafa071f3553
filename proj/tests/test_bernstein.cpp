#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <subpop/bernstein.hpp>
#include <subpop/expr.hpp>

using namespace subpop;

namespace {

LevyMeasure stable_measure(double alpha) {
    double c = alpha / std::tgamma(1.0 - alpha);
    return {[c, alpha](double s) { return c * std::pow(s, -alpha - 1.0); }, alpha, 0.0};
}

}  // namespace

TEST_CASE("closed-form families") {
    CHECK(BernsteinFunction::stable(0.5).value(4.0) == doctest::Approx(2.0));
    CHECK(BernsteinFunction::gamma(1.0).value(0.0) == doctest::Approx(0.0));
    auto killed = BernsteinFunction::killed(BernsteinFunction::stable(0.5), 1.0);
    CHECK(killed.value(4.0) == doctest::Approx(3.0));
    CHECK(killed.value(0.0) == doctest::Approx(1.0));
}

TEST_CASE("killed decomposition is exact") {
    auto base = BernsteinFunction::gamma(2.0);
    auto killed = BernsteinFunction::killed(base, 0.75);
    for (double x : {0.0, 0.1, 1.0, 30.0})
        CHECK(killed.value(x) == 0.75 + base.value(x));
}

TEST_CASE("custom quadrature agrees with stable closed form across 12 decades") {
    auto f = BernsteinFunction::custom(stable_measure(0.5));
    for (double x = 1e-6; x <= 1.0000001e6; x *= 100.0) {
        double expected = std::pow(x, 0.5);
        CHECK(f.value(x) == doctest::Approx(expected).epsilon(1e-8));
    }
}

TEST_CASE("custom quadrature agrees with gamma closed form") {
    LevyMeasure gamma_measure{[](double s) { return std::exp(-1.5 * s) / s; }, 0.0, 1.5};
    auto f = BernsteinFunction::custom(gamma_measure);
    for (double x : {1e-4, 0.1, 1.0, 10.0, 1e3})
        CHECK(f.value(x) == doctest::Approx(std::log1p(x / 1.5)).epsilon(1e-8));
}

TEST_CASE("extended evaluation") {
    auto ts = BernsteinFunction::tempered_stable(0.5, 2.0);
    auto v = ts.extended(1.0);
    REQUIRE(v.has_value());
    CHECK(*v == doctest::Approx(1.0 - std::sqrt(2.0)).epsilon(1e-12));

    auto g = BernsteinFunction::gamma(2.0);
    auto vg = g.extended(1.0);
    REQUIRE(vg.has_value());
    CHECK(*vg == doctest::Approx(std::log(0.5)).epsilon(1e-12));

    CHECK_FALSE(BernsteinFunction::stable(0.5).extended(1.0).has_value());
    CHECK_FALSE(ts.extended(2.5).has_value());
}

TEST_CASE("extended evaluation by quadrature matches tempered closed form") {
    double alpha = 0.5, theta = 2.0, c = alpha / std::tgamma(1.0 - alpha);
    LevyMeasure m{[=](double s) {
                      return c * std::exp(-theta * s) * std::pow(s, -alpha - 1.0);
                  },
                  alpha, theta};
    auto f = BernsteinFunction::custom(m);
    auto v = f.extended(1.0);
    REQUIRE(v.has_value());
    CHECK(*v == doctest::Approx(1.0 - std::sqrt(2.0)).epsilon(1e-8));
}

TEST_CASE("derivatives: closed forms and quadrature") {
    CHECK(BernsteinFunction::stable(0.5).derivative(1, 4.0) == doctest::Approx(0.25));
    CHECK(BernsteinFunction::gamma(1.0).derivative(2, 1.0) == doctest::Approx(-0.25));
    auto f = BernsteinFunction::custom(stable_measure(0.5));
    CHECK(f.derivative(1, 4.0) == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(f.derivative(2, 1.0) ==
          doctest::Approx(0.5 * (0.5 - 1.0)).epsilon(1e-8));
}

TEST_CASE("derivative signs alternate (complete monotonicity of f')") {
    for (auto f : {BernsteinFunction::stable(0.3), BernsteinFunction::gamma(2.0),
                   BernsteinFunction::tempered_stable(0.7, 1.5)})
        for (int n = 1; n <= 5; ++n)
            for (double x : {0.2, 1.0, 7.0}) {
                double sign = (n % 2 == 0) ? -1.0 : 1.0;
                CHECK(sign * f.derivative(n, x) > 0.0);
            }
}

TEST_CASE("levy_integral reproduces eval_f and expansion identities") {
    auto st = BernsteinFunction::stable(0.5);
    double x = 4.0;
    double got = st.levy_integral([x](double s) { return -std::expm1(-x * s); });
    CHECK(got == doctest::Approx(2.0).epsilon(1e-9));

    CHECK(st.levy_integral([](double) { return 0.0; }) == doctest::Approx(0.0));

    // (1-e^{-s})^2 = 2(1-e^{-s}) - (1-e^{-2s}):  integral = 2 f(1) - f(2)
    auto ga = BernsteinFunction::gamma(1.0);
    double expect = 2.0 * std::log(2.0) - std::log(3.0);
    double v = ga.levy_integral([](double s) {
        double u = -std::expm1(-s);
        return u * u;
    });
    CHECK(v == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("levy_integral rejects weights that are not O(s)") {
    auto st = BernsteinFunction::stable(0.5);
    CHECK_THROWS_AS(st.levy_integral([](double s) { return std::sqrt(s); }),
                    PreconditionViolation);
}

TEST_CASE("concavity and subadditivity surrogate on a grid") {
    for (auto f : {BernsteinFunction::stable(0.4), BernsteinFunction::gamma(1.0),
                   BernsteinFunction::tempered_stable(0.6, 2.0)}) {
        double prev = 0.0, prev_x = 0.0, prev_slope = 1e308;
        for (double x = 0.25; x <= 32.0; x *= 2.0) {
            double v = f.value(x);
            CHECK(v >= prev);
            double slope = (v - prev) / (x - prev_x);
            CHECK(slope <= prev_slope * (1.0 + 1e-12));
            prev_slope = slope;
            prev = v;
            prev_x = x;
        }
        for (double x : {0.5, 2.0})
            for (double y : {0.7, 3.0})
                CHECK(f.value(x + y) <= f.value(x) + f.value(y) + 1e-12);
    }
}

TEST_CASE("measure invariant validation rejects bad densities") {
    LevyMeasure negative{[](double) { return -1.0; }, 0.5, 0.0};
    CHECK_THROWS_AS(BernsteinFunction::custom(negative), ConfigError);
}

TEST_CASE("custom density from the expression grammar") {
    // stable alpha=0.5 density: (0.5/gamma(0.5)) * s^(-1.5)
    DensityExpression expr("0.5 / gamma(0.5) * s ^ (-1.5)");
    LevyMeasure m{[expr](double s) { return expr(s); }, 0.5, 0.0};
    auto f = BernsteinFunction::custom(m);
    CHECK(f.value(4.0) == doctest::Approx(2.0).epsilon(1e-8));
}
