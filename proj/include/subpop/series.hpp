#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include "common.hpp"

namespace subpop {

// Σ_{j=0}^{n} C(n,j) (-1)^j term(j) with term(j) in (0,1].
//
// Binomial coefficients go through log-gamma so no intermediate overflows;
// the products are accumulated with compensated summation and the result
// carries an estimate of the cancellation error (eps times the sum of
// absolute terms). The estimate flags results whose relative accuracy has
// degraded past 1e-6.
template <typename Term>
SumResult alternating_binomial_sum(int n, Term&& term) {
    SumResult out;
    if (n < 0) throw PreconditionViolation("alternating_binomial_sum: n < 0");
    // double-double accumulator; with the product split below the computed
    // combination of the term values is exact, so linear identities across
    // several of these sums (for instance pmf normalization) survive the
    // cancellation instead of inheriting one rounding per term
    double hi = 0.0, lo = 0.0;
    auto add = [&](double x) {
        double s = hi + x;
        double b = s - hi;
        lo += (hi - (s - b)) + (x - b);
        hi = s;
    };
    const double eps = std::numeric_limits<double>::epsilon();
    double err = 0.0;
    for (int j = 0; j <= n; ++j) {
        double tj = term(j);
        if (!(tj > 0.0)) continue;
        double signed_t = (j % 2 == 0) ? tj : -tj;
        if (n <= 60) {
            double c = binomial(n, j);
            double p = c * signed_t;
            add(p);
            add(std::fma(c, signed_t, -p));
            // the term values themselves still carry a relative eps each
            err += 2.0 * eps * c * tj;
        } else {
            double lg = log_binomial(n, j) + std::log(tj);
            double mag = std::exp(lg);
            // a log argument known to relative eps perturbs exp(lg) by
            // eps*|lg| relative, and that error survives the cancellation
            err += eps * mag * (1.0 + std::abs(lg));
            add((j % 2 == 0) ? mag : -mag);
        }
    }
    out.value = hi + lo;
    out.cancellation_error = err;
    double denom = std::max(std::abs(out.value), std::numeric_limits<double>::min());
    out.cancellation_warning = out.cancellation_error / denom > 1e-6;
    return out;
}

}  // namespace subpop
