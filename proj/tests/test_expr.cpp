#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <subpop/expr.hpp>

using namespace subpop;

TEST_CASE("arithmetic and precedence") {
    CHECK(DensityExpression("1 + 2 * 3")(0.0) == doctest::Approx(7.0));
    CHECK(DensityExpression("(1 + 2) * 3")(0.0) == doctest::Approx(9.0));
    CHECK(DensityExpression("2 ^ 3 ^ 2")(0.0) == doctest::Approx(512.0));
    CHECK(DensityExpression("-s + 4")(1.5) == doctest::Approx(2.5));
    CHECK(DensityExpression("6 / s")(3.0) == doctest::Approx(2.0));
}

TEST_CASE("functions") {
    CHECK(DensityExpression("exp(-2*s)")(1.0) == doctest::Approx(std::exp(-2.0)));
    CHECK(DensityExpression("log(s)")(std::exp(1.0)) == doctest::Approx(1.0));
    CHECK(DensityExpression("pow(s, 2.5)")(2.0) == doctest::Approx(std::pow(2.0, 2.5)));
    CHECK(DensityExpression("gamma(0.5)")(0.0) == doctest::Approx(std::sqrt(M_PI)));
}

TEST_CASE("scientific notation") {
    CHECK(DensityExpression("1e-3 * s")(2.0) == doctest::Approx(2e-3));
}

TEST_CASE("parse errors") {
    CHECK_THROWS_AS(DensityExpression("1 +"), ConfigError);
    CHECK_THROWS_AS(DensityExpression("foo(s)"), ConfigError);
    CHECK_THROWS_AS(DensityExpression("(1 + s"), ConfigError);
    CHECK_THROWS_AS(DensityExpression("1 2"), ConfigError);
}
