#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "common.hpp"

namespace subpop {

struct DerivativeResult {
    double value = 0.0;
    double error_estimate = 0.0;
};

namespace detail {

// Central finite difference of order k on a grid of spacing h, O(h²).
template <typename F>
double central_difference(F& f, int k, double x, double h) {
    CompensatedSum acc;
    for (int i = 0; i <= k; ++i) {
        double c = binomial(k, i);
        double node = x + (0.5 * k - i) * h;
        acc.add(((i % 2 == 0) ? c : -c) * f(node));
    }
    return acc.value() / std::pow(h, k);
}

}  // namespace detail

// d^k/dx^k f(x) by Richardson-extrapolated central differences, k <= 6.
template <typename F>
DerivativeResult finite_difference_derivative(F&& f, int k, double x,
                                              double scale = 1.0) {
    if (k < 1) throw PreconditionViolation("finite_difference_derivative: k < 1");
    if (k > 6)
        throw UnsupportedOrder("finite differences are unreliable above order 6");
    const double eps = 2.2e-16;
    double h = std::max(scale, std::abs(x)) * std::pow(eps, 1.0 / (k + 4));
    double d1 = detail::central_difference(f, k, x, h);
    double d2 = detail::central_difference(f, k, x, 0.5 * h);
    DerivativeResult out;
    out.value = (4.0 * d2 - d1) / 3.0;
    out.error_estimate = std::abs(d2 - d1) / 3.0;
    return out;
}

// Derivatives of exp(g) / g from the derivatives of g: returns B_0..B_k with
// (e^g)^{(j)} = e^g B_j, via the complete Bell polynomial recursion
// B_{n+1} = Σ_i C(n,i) B_{n-i} g^{(i+1)}.  gder[i] holds g^{(i+1)}.
inline std::vector<double> bell_exponential(const std::vector<double>& gder) {
    const int k = static_cast<int>(gder.size());
    if (k > 30) throw UnsupportedOrder("bell_exponential: order capped at 30");
    std::vector<double> bell(k + 1);
    bell[0] = 1.0;
    for (int n = 0; n < k; ++n) {
        CompensatedSum acc;
        for (int i = 0; i <= n; ++i)
            acc.add(binomial(n, i) * bell[n - i] * gder[i]);
        bell[n + 1] = acc.value();
    }
    return bell;
}

// Derivatives of 1/f from f and its derivatives: returns r_0..r_k with
// r_j = (1/f)^{(j)}, using r_n = -(1/f) Σ_{i=1..n} C(n,i) f^{(i)} r_{n-i}.
// fder[i] holds f^{(i+1)}.
inline std::vector<double> reciprocal_derivatives(double fval,
                                                  const std::vector<double>& fder) {
    const int k = static_cast<int>(fder.size());
    std::vector<double> rec(k + 1);
    rec[0] = 1.0 / fval;
    for (int n = 1; n <= k; ++n) {
        CompensatedSum acc;
        for (int i = 1; i <= n; ++i)
            acc.add(binomial(n, i) * fder[i - 1] * rec[n - i]);
        rec[n] = -rec[0] * acc.value();
    }
    return rec;
}

// Generic k-th derivative in a scalar parameter.  The exact (Faà di Bruno)
// route for the Bernštein-composite integrands lives with the birth-death
// laws, where the structure of the integrand is known; this entry point is
// the finite-difference fallback used for custom families and cross-checks.
template <typename F>
DerivativeResult parametric_derivative(F&& h, int k, double lambda,
                                       double scale = 1.0) {
    if (!(lambda > 0)) throw PreconditionViolation("parametric_derivative: lambda <= 0");
    return finite_difference_derivative(std::forward<F>(h), k, lambda, scale);
}

}  // namespace subpop
