#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <mutex>
#include <type_traits>
#include <utility>
#include <vector>

#include "common.hpp"

namespace subpop {

// ---------------------------------------------------------------------------
// Gauss-Laguerre rules on [0,inf) with weight e^{-x}
// ---------------------------------------------------------------------------

struct LaguerreRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

namespace detail {

// L_m(x) evaluated with exponent tracking so that rules with many nodes do
// not overflow the three-term recurrence at the largest abscissae.
struct ScaledValue {
    double mant = 0.0;
    int exp2 = 0;

    double to_double() const { return std::ldexp(mant, exp2); }
};

inline ScaledValue laguerre_scaled(int m, double x) {
    double p0 = 1.0, p1 = 1.0 - x;
    int e = 0;
    if (m == 0) return {p0, 0};
    for (int k = 1; k < m; ++k) {
        double p2 = ((2.0 * k + 1.0 - x) * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
        double a = std::max(std::abs(p0), std::abs(p1));
        if (a > 1e100) {
            int sh;
            std::frexp(a, &sh);
            p0 = std::ldexp(p0, -sh);
            p1 = std::ldexp(p1, -sh);
            e += sh;
        }
    }
    return {p1, e};
}

inline LaguerreRule build_laguerre(int n) {
    LaguerreRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    double z = 0.0;
    for (int i = 0; i < n; ++i) {
        if (i == 0)
            z = 3.0 / (1.0 + 2.4 * n);
        else if (i == 1)
            z += 15.0 / (1.0 + 2.5 * n);
        else
            z += ((1.0 + 2.55 * (i - 1)) / (1.9 * (i - 1))) * (z - rule.nodes[i - 2]);
        for (int it = 0; it < 200; ++it) {
            // Newton on L_n; common scale factors cancel in the ratio.
            double p0 = 1.0, p1 = 1.0 - z;
            for (int k = 1; k < n; ++k) {
                double p2 = ((2.0 * k + 1.0 - z) * p1 - k * p0) / (k + 1.0);
                p0 = p1;
                p1 = p2;
                double a = std::max(std::abs(p0), std::abs(p1));
                if (a > 1e100) {
                    p0 /= a;
                    p1 /= a;
                }
            }
            double pp = n * (p1 - p0) / z;  // L_n'(z), same scale as p1
            double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) <= 1e-15 * std::max(1.0, std::abs(z))) break;
        }
        rule.nodes[i] = z;
        ScaledValue lnp1 = laguerre_scaled(n + 1, z);
        // w = x / ((n+1) L_{n+1}(x))^2, underflows harmlessly in the far tail
        double denom = (n + 1.0) * lnp1.mant;
        rule.weights[i] = std::ldexp(z / (denom * denom), -2 * lnp1.exp2);
    }
    return rule;
}

}  // namespace detail

inline const LaguerreRule& gauss_laguerre(int n) {
    static std::map<int, LaguerreRule> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, detail::build_laguerre(n)).first;
    return it->second;
}

template <typename T = double, typename F>
T adaptive_integrate(F&& f, double a, double b, double tol_abs = 1e-12,
                     double tol_rel = 1e-10, int max_depth = 55);

// ∫_0^∞ e^{-w} g(w) dw by Gauss-Laguerre, doubling the rule until two
// successive estimates agree.  The node and weight accuracy of rules built in
// double precision bottoms out near 1e-12 past 128 nodes, so instead of
// growing the rule further the integral falls back to adaptive Gauss-Kronrod
// on the effective support of the weight.
template <typename F>
double exp_weighted_integral(F&& g, const QuadratureSpec& spec = {}) {
    spec.validate();
    int n = spec.node_count;
    const int n_cap = 256;
    auto evaluate = [&](int m) {
        const LaguerreRule& rule = gauss_laguerre(m);
        CompensatedSum acc;
        for (int i = 0; i < m; ++i) acc.add(rule.weights[i] * g(rule.nodes[i]));
        return acc.value();
    };
    double prev = evaluate(n);
    for (int r = 0; r < spec.max_refinements && n < n_cap; ++r) {
        n = std::min(2 * n, n_cap);
        double cur = evaluate(n);
        if (std::abs(cur - prev) <=
            std::max(spec.tolerance_abs, spec.tolerance_rel * std::abs(cur)))
            return cur;
        prev = cur;
    }
    auto damped = [&](double w) { return std::exp(-w) * g(w); };
    return adaptive_integrate(damped, 0.0, 745.0, spec.tolerance_abs,
                              spec.tolerance_rel);
}

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod (G7,K15) on finite intervals
// ---------------------------------------------------------------------------

namespace detail {

// K15 abscissae (positive half) and weights; first 4 odd-indexed points form G7.
inline constexpr std::array<double, 8> kronrod_x = {
    0.0,
    0.2077849550078985,
    0.4058451513773972,
    0.5860872354676911,
    0.7415311855993944,
    0.8648644233597691,
    0.9491079123427585,
    0.9914553711208126,
};
inline constexpr std::array<double, 8> kronrod_w = {
    0.2094821410847278,
    0.2044329400752989,
    0.1903505780647854,
    0.1690047266392679,
    0.1406532597155259,
    0.1047900103222502,
    0.0630920926299786,
    0.0229353220105292,
};
inline constexpr std::array<double, 4> gauss_w = {
    0.4179591836734694,
    0.3818300505051189,
    0.2797053914892767,
    0.1294849661688697,
};

template <typename T, typename F>
void gk15(F& f, double a, double b, T& integral, double& error) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    T fk[15];
    fk[7] = f(c);
    for (int i = 1; i < 8; ++i) {
        double dx = h * kronrod_x[i];
        fk[7 - i] = f(c - dx);
        fk[7 + i] = f(c + dx);
    }
    T resk = kronrod_w[0] * fk[7];
    T resg = gauss_w[0] * fk[7];
    for (int i = 1; i < 8; ++i) resk += kronrod_w[i] * (fk[7 - i] + fk[7 + i]);
    for (int i = 1; i < 4; ++i) resg += gauss_w[i] * (fk[7 - 2 * i] + fk[7 + 2 * i]);
    integral = resk * h;
    error = std::abs((resk - resg) * h);
}

// Leaves at the depth cap are accepted with their error contribution; the
// caller checks the accumulated budget once, so an integrable singularity
// can be ground down locally without a per-leaf tolerance that shrinks
// faster than the local error does.
template <typename T, typename F>
void adaptive_gk_rec(F& f, double a, double b, double tol, int depth, T& total,
                     double& err_total, int max_depth, long& leaf_budget) {
    T integral;
    double error;
    gk15<T>(f, a, b, integral, error);
    if (error <= tol || depth >= max_depth || leaf_budget <= 0) {
        total += integral;
        err_total += error;
        --leaf_budget;
        return;
    }
    --leaf_budget;
    double m = 0.5 * (a + b);
    adaptive_gk_rec<T>(f, a, m, 0.5 * tol, depth + 1, total, err_total,
                       max_depth, leaf_budget);
    adaptive_gk_rec<T>(f, m, b, 0.5 * tol, depth + 1, total, err_total,
                       max_depth, leaf_budget);
}

}  // namespace detail

template <typename T, typename F>
T adaptive_integrate(F&& f, double a, double b, double tol_abs, double tol_rel,
                     int max_depth) {
    if (!(b > a)) return T{};
    T coarse;
    double coarse_err;
    detail::gk15<T>(f, a, b, coarse, coarse_err);
    double tol = std::max(tol_abs, tol_rel * std::abs(coarse));
    // a hard cap on subdivisions; integrands whose error estimate is pinned
    // by evaluation noise would otherwise grind toward the full depth-55 tree
    long leaf_budget = 40000;
    T total{};
    double err = 0.0;
    detail::adaptive_gk_rec<T>(f, a, b, tol, 0, total, err, max_depth, leaf_budget);
    // the coarse pass can badly overestimate the magnitude on wide intervals;
    // if the true scale calls for a tighter budget, run once more with it
    double tol2 = std::max(tol_abs, tol_rel * std::abs(total));
    if (tol2 < 0.5 * tol) {
        leaf_budget = 40000;
        total = T{};
        err = 0.0;
        detail::adaptive_gk_rec<T>(f, a, b, tol2, 0, total, err, max_depth,
                                   leaf_budget);
        tol = tol2;
    }
    if (err > 64.0 * std::max(tol, tol_rel * std::abs(total)))
        throw QuadratureFailure("adaptive quadrature: refinement limit hit");
    return total;
}

// ∫_0^1 h(s) ds where h(s) ~ s^{-q} as s -> 0, q < 1. Substitutes s = v^c,
// c = 1/(1-q), which removes the endpoint singularity.
template <typename T = double, typename F>
T integrate_01_singular(F&& h, double q, double tol_abs = 1e-12,
                        double tol_rel = 1e-10) {
    if (q >= 1.0) throw QuadratureFailure("integrate_01_singular: order >= 1");
    if (q <= 0.0) return adaptive_integrate<T>(h, 0.0, 1.0, tol_abs, tol_rel);
    const double c = 1.0 / (1.0 - q);
    auto g = [&](double v) -> T {
        if (v <= 0.0) return T{};
        double s = std::pow(v, c);
        return h(s) * (c * std::pow(v, c - 1.0));
    };
    return adaptive_integrate<T>(g, 0.0, 1.0, tol_abs, tol_rel);
}

// ∫_0^∞ e^{-w} h(w) dw tolerating an integrable power singularity h ~ w^{-q}
// at the origin. Splits at 1; the tail reuses Gauss-Laguerre.
template <typename T = double, typename F>
T exp_weighted_integral_singular(F&& h, double q, const QuadratureSpec& spec = {}) {
    auto head = [&](double w) -> T { return h(w) * std::exp(-w); };
    T near = integrate_01_singular<T>(head, q, spec.tolerance_abs, spec.tolerance_rel);
    auto shifted = [&](double y) -> T { return h(1.0 + y); };
    T far;
    if constexpr (std::is_same_v<T, double>) {
        far = std::exp(-1.0) * exp_weighted_integral(shifted, spec);
    } else {
        // complex-valued tail: integrate real and imaginary parts separately
        auto re = [&](double y) { return std::real(shifted(y)); };
        auto im = [&](double y) { return std::imag(shifted(y)); };
        far = std::exp(-1.0) *
              T(exp_weighted_integral(re, spec), exp_weighted_integral(im, spec));
    }
    return near + far;
}

}  // namespace subpop
