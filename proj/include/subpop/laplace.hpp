#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "common.hpp"

namespace subpop {

struct InversionSpec {
    int node_count = 32;
    double tolerance_rel = 1e-8;
};

// Fixed-Talbot inversion (Abate & Valkó) of F at time t.  Requires F analytic
// off the negative real axis.  The contour scale grows with the node count, so
// in double precision accuracy peaks near 32 nodes and degrades beyond about
// 48; the error is estimated by comparing against a coarser node count rather
// than by doubling.
template <typename F>
double talbot_inverse(F&& transform, double t, const InversionSpec& spec = {}) {
    if (!(t > 0)) throw PreconditionViolation("talbot_inverse: t must be > 0");
    auto evaluate = [&](int m) {
        const double r = 2.0 * m / (5.0 * t);
        double sum = 0.5 * std::exp(r * t) * std::real(transform(std::complex<double>(r, 0.0)));
        for (int k = 1; k < m; ++k) {
            double theta = k * M_PI / m;
            double cot = std::cos(theta) / std::sin(theta);
            std::complex<double> s(r * theta * cot, r * theta);
            double sigma = theta + (theta * cot - 1.0) * cot;
            std::complex<double> val =
                std::exp(s * t) * transform(s) * std::complex<double>(1.0, sigma);
            sum += std::real(val);
        }
        return sum * r / m;
    };
    const int m = spec.node_count;
    double fine = evaluate(m);
    double coarse = evaluate(m - m / 4);
    if (std::abs(fine - coarse) <=
        spec.tolerance_rel * std::max(1e-300, std::abs(fine)))
        return fine;
    double bumped = evaluate(m + m / 4);
    return bumped;  // best effort; callers needing certainty pass tighter specs
}

// Euler summation inversion (Abate & Whitt).  All nodes have positive real
// part, so transforms that are only defined on the right half-plane (for
// instance numerically computed ∫ e^{-st} p(t) dt) stay usable.
template <typename F>
double euler_inverse(F&& transform, double t, int terms = 40, int euler = 12,
                     double a_decades = 10.0) {
    if (!(t > 0)) throw PreconditionViolation("euler_inverse: t must be > 0");
    const double a = a_decades * std::log(10.0) / 2.0;
    const int n = terms + euler;
    std::vector<double> partial(n + 1);
    double sum = 0.5 * std::real(transform(std::complex<double>(a / t, 0.0)));
    for (int k = 1; k <= n; ++k) {
        std::complex<double> s(a / t, k * M_PI / t);
        double term = ((k % 2 == 0) ? 1.0 : -1.0) * std::real(transform(s));
        sum += term;
        partial[k] = sum;
    }
    // binomial (Euler) average of the last `euler` partial sums
    double acc = 0.0;
    for (int j = 0; j <= euler; ++j)
        acc += binomial(euler, j) * partial[terms + j];
    acc /= std::pow(2.0, euler);
    return acc * std::exp(a) / t;
}

}  // namespace subpop
