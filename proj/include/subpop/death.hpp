#pragma once

#include <cmath>

#include "bernstein.hpp"
#include "common.hpp"
#include "series.hpp"

namespace subpop {

enum class DeathVariant { Linear, Sublinear };

struct DeathSpec {
    double mu = 1.0;
    int n0 = 1;
    DeathVariant variant = DeathVariant::Linear;

    void validate() const {
        if (!(mu > 0.0)) throw ConfigError("DeathSpec: mu must be > 0");
        if (n0 < 1) throw ConfigError("DeathSpec: n0 must be >= 1");
    }
};

// Pr{state k at time t | n0 progenitors}.
// Linear: C(n0,k) Σ_j C(n0-k,j)(-1)^j e^{-t f(μ(k+j))}.
// Sublinear: the death intensity grows with deaths already occurred; survivors
// k >= 1 carry weight Σ_j C(n0-k,j)(-1)^j e^{-t f(μ(j+1))} and extinction is
// the alternating sum over all states.
inline SumResult death_pmf_checked(const DeathSpec& spec,
                                   const BernsteinFunction& f, double t, int k) {
    spec.validate();
    if (k < 0 || k > spec.n0)
        throw PreconditionViolation("death_pmf: k must lie in [0, n0]");
    if (!(t >= 0.0)) throw PreconditionViolation("death_pmf: t must be >= 0");
    const double mu = spec.mu;
    const int n0 = spec.n0;
    if (t == 0.0) return {k == n0 ? 1.0 : 0.0, 0.0, false};
    SumResult r;
    if (spec.variant == DeathVariant::Linear) {
        r = alternating_binomial_sum(n0 - k, [&](int j) {
            return std::exp(-t * f.value(mu * (k + j)));
        });
        double c = binomial(n0, k);
        r.value *= c;
        r.cancellation_error *= c;
    } else if (k >= 1) {
        r = alternating_binomial_sum(n0 - k, [&](int j) {
            return std::exp(-t * f.value(mu * (j + 1)));
        });
    } else {
        r = alternating_binomial_sum(
            n0, [&](int j) { return std::exp(-t * f.value(mu * j)); });
    }
    r.value = std::min(std::max(r.value, 0.0), 1.0);
    return r;
}

inline double death_pmf(const DeathSpec& spec, const BernsteinFunction& f,
                        double t, int k) {
    return death_pmf_checked(spec, f, t, k).value;
}

// Pr{extinct by t}; the same expression serves both variants.
inline double death_extinction(const DeathSpec& spec, const BernsteinFunction& f,
                               double t) {
    spec.validate();
    if (!(t >= 0.0)) throw PreconditionViolation("death_extinction: t must be >= 0");
    if (t == 0.0) return 0.0;
    // Σ_j C(n0,j)(-1)^j e^{-t f(μj)}; the j=0 term is e^{-t f(0)}, which is 1
    // for unkilled f and e^{-at} for killed f (defective subordinator mass)
    auto r = alternating_binomial_sum(spec.n0, [&](int j) {
        return std::exp(-t * f.value(spec.mu * j));
    });
    return std::min(std::max(r.value, 0.0), 1.0);
}

// r-th factorial moment of the linear variant: r! C(n0,r) e^{-t f(μr)}.
inline double death_factorial_moment(const DeathSpec& spec,
                                     const BernsteinFunction& f, double t,
                                     int r) {
    spec.validate();
    if (r < 1 || r > spec.n0)
        throw PreconditionViolation("death_factorial_moment: need 1 <= r <= n0");
    if (spec.variant != DeathVariant::Linear)
        throw PreconditionViolation("death_factorial_moment: linear variant only");
    return std::tgamma(r + 1.0) * binomial(spec.n0, r) *
           std::exp(-t * f.value(spec.mu * r));
}

inline double death_mean(const DeathSpec& spec, const BernsteinFunction& f,
                         double t) {
    return death_factorial_moment(spec, f, t, 1);
}

inline double death_variance(const DeathSpec& spec, const BernsteinFunction& f,
                             double t) {
    spec.validate();
    if (spec.variant != DeathVariant::Linear)
        throw PreconditionViolation("death_variance: linear variant only");
    double n0 = spec.n0;
    double e1 = std::exp(-t * f.value(spec.mu));
    double e2 = std::exp(-t * f.value(2.0 * spec.mu));
    return n0 * e1 - n0 * e2 + n0 * n0 * e2 - n0 * n0 * e1 * e1;
}

// Jump intensity r -> k for the linear variant:
// ∫ C(r,k)(1-e^{-μs})^{r-k} e^{-μks} ν(ds); the integrand is O(s^{r-k}) at 0.
inline double death_transition_rate(const DeathSpec& spec,
                                    const BernsteinFunction& f, int r, int k,
                                    const QuadratureSpec& qspec = {}) {
    spec.validate();
    if (!(0 <= k && k < r && r <= spec.n0))
        throw PreconditionViolation("death_transition_rate: need 0 <= k < r <= n0");
    const double mu = spec.mu;
    const double c = binomial(r, k);
    auto g = [&](double s) {
        return c * std::pow(-std::expm1(-mu * s), r - k) * std::exp(-mu * k * s);
    };
    return f.levy_integral(g, qspec);
}

// Residual of the printed pmf relation
//   Pr{k | n0} = Pr{k | n0-1} - (1/n0) Pr{1 | n0},
// a verification quantity.  The relation is exact at k=0 and is reported as
// printed for other k.
inline double death_recursion_check(const DeathSpec& spec,
                                    const BernsteinFunction& f, double t,
                                    int k) {
    spec.validate();
    if (spec.n0 < 2 || !(k < spec.n0))
        throw PreconditionViolation("death_recursion_check: need k < n0, n0 >= 2");
    DeathSpec smaller = spec;
    smaller.n0 = spec.n0 - 1;
    double lhs = death_pmf(spec, f, t, k);
    double rhs = death_pmf(smaller, f, t, k) -
                 death_pmf(spec, f, t, 1) / spec.n0;
    return std::abs(lhs - rhs);
}

}  // namespace subpop
