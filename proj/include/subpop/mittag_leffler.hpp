#pragma once

#include <cmath>

#include "common.hpp"
#include "quadrature.hpp"

namespace subpop {

// Kernel shared by the Mittag-Leffler function and the fractional birth pmf:
//
//   (sin νπ / π) ∫_0^∞ r^{ν-1} φ(r) / (r^{2ν} + 2 r^ν cos νπ + 1) dr
//
// evaluated after the substitution r = u^{1/ν}, which absorbs the r^{ν-1}
// factor and leaves the rational denominator in u:
//
//   (sin νπ / (π ν)) ∫_0^∞ φ(u^{1/ν}) / (u² + 2u cos νπ + 1) du.
template <typename Phi>
double mittag_leffler_kernel(double nu, Phi&& phi, double tol_abs = 1e-13,
                             double tol_rel = 1e-11) {
    if (!(nu > 0.0 && nu < 1.0))
        throw PreconditionViolation("mittag_leffler_kernel: nu must be in (0,1)");
    const double c = std::cos(nu * M_PI);
    auto integrand = [&](double u) {
        return phi(std::pow(u, 1.0 / nu)) / (u * u + 2.0 * u * c + 1.0);
    };
    double head = adaptive_integrate(integrand, 0.0, 1.0, tol_abs, tol_rel);
    auto tail = [&](double v) {  // u = 1/v
        double u = 1.0 / v;
        return integrand(u) * u * u;
    };
    double far = adaptive_integrate(tail, 0.0, 1.0, tol_abs, tol_rel);
    return std::sin(nu * M_PI) / (M_PI * nu) * (head + far);
}

// E_{ν,1}(-x) for ν in (0,1], x >= 0.
inline double mittag_leffler(double nu, double x) {
    if (!(nu > 0.0 && nu <= 1.0))
        throw PreconditionViolation("mittag_leffler: nu must be in (0,1]");
    if (!(x >= 0.0)) throw PreconditionViolation("mittag_leffler: x must be >= 0");
    if (nu == 1.0) return std::exp(-x);
    if (x == 0.0) return 1.0;
    const double xr = std::pow(x, 1.0 / nu);
    return mittag_leffler_kernel(nu, [&](double r) { return std::exp(-r * xr); });
}

}  // namespace subpop
