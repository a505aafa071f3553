#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bernstein.hpp"
#include "common.hpp"
#include "mittag_leffler.hpp"
#include "quadrature.hpp"
#include "series.hpp"

namespace subpop {

// ---------------------------------------------------------------------------
// Birth rate schedules
// ---------------------------------------------------------------------------

class RateSchedule {
public:
    static RateSchedule linear(double lambda) {
        if (!(lambda > 0.0)) throw ConfigError("RateSchedule: lambda must be > 0");
        RateSchedule r;
        r.linear_ = true;
        r.lambda_ = lambda;
        return r;
    }

    static RateSchedule general(std::function<double(int)> rates,
                                bool distinct = true) {
        RateSchedule r;
        r.linear_ = false;
        r.rates_ = std::move(rates);
        r.distinct_ = distinct;
        return r;
    }

    bool is_linear() const { return linear_; }
    double lambda() const { return lambda_; }
    bool distinct_declared() const { return linear_ || distinct_; }

    // λ_k, k >= 1
    double rate(int k) const {
        if (k < 1) throw PreconditionViolation("RateSchedule: state index must be >= 1");
        double v = linear_ ? lambda_ * k : rates_(k);
        if (!(v > 0.0))
            throw ConfigError("RateSchedule: rate at k=" + std::to_string(k) +
                              " is not positive");
        return v;
    }

private:
    bool linear_ = true;
    double lambda_ = 1.0;
    bool distinct_ = true;
    std::function<double(int)> rates_;
};

struct RegularityDeclaration {
    bool diverges = true;  // user-declared truth of Σ 1/λ_j = ∞
    std::string rationale;
};

// A probability mass accompanied by the truncation bound of its summation.
struct MassEstimate {
    double value = 0.0;
    double truncation_bound = 0.0;
};

namespace detail {

// w_m = 1 / Π_{l≠m}(λ_l - λ_m) for the supplied rate values.
// Near-coincident rates make the weights explode; when `reject_degenerate`
// the gap check throws, otherwise the caller inspects the cancellation flag.
inline std::vector<double> vandermonde_weights(const std::vector<double>& lam,
                                               bool reject_degenerate = true) {
    const int n = static_cast<int>(lam.size());
    std::vector<double> w(n, 1.0);
    for (int m = 0; m < n; ++m) {
        for (int l = 0; l < n; ++l) {
            if (l == m) continue;
            double gap = lam[l] - lam[m];
            // the degeneracy test is relative to the pair involved, not to
            // the largest rate; schedules spanning many decades have gaps
            // that are tiny globally yet perfectly well conditioned
            double local = std::max(std::abs(lam[l]), std::abs(lam[m]));
            if (gap == 0.0 || (reject_degenerate && std::abs(gap) < 1e-6 * local))
                throw DegenerateRates("rates " + std::to_string(lam[l]) + " and " +
                                      std::to_string(lam[m]) +
                                      " are equal or nearly so");
            w[m] /= gap;
        }
    }
    return w;
}

// Same weights in log magnitude and sign; products with the rate prefactor
// Π λ_j overflow well before the combined term does, so the pmf assembles
// each term as sign * exp(log|w| + log Π λ_j - decay).
struct VandermondeLogWeights {
    std::vector<double> log_abs;
    std::vector<double> sign;
};

inline VandermondeLogWeights vandermonde_log_weights(const std::vector<double>& lam) {
    const int n = static_cast<int>(lam.size());
    VandermondeLogWeights w{std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)};
    for (int m = 0; m < n; ++m) {
        for (int l = 0; l < n; ++l) {
            if (l == m) continue;
            double gap = lam[l] - lam[m];
            double local = std::max(std::abs(lam[l]), std::abs(lam[m]));
            if (gap == 0.0 || std::abs(gap) < 1e-6 * local)
                throw DegenerateRates("rates " + std::to_string(lam[l]) + " and " +
                                      std::to_string(lam[m]) +
                                      " are equal or nearly so");
            w.log_abs[m] -= std::log(std::abs(gap));
            if (gap < 0.0) w.sign[m] = -w.sign[m];
        }
    }
    return w;
}

inline std::vector<double> collect_rates(const RateSchedule& rates, int from,
                                         int to) {
    std::vector<double> lam;
    lam.reserve(to - from + 1);
    for (int j = from; j <= to; ++j) lam.push_back(rates.rate(j));
    return lam;
}

}  // namespace detail

// c_{r,k} = Σ_{m=r}^{r+k} 1/Π_{l≠m}(λ_l - λ_m); identically zero for distinct
// rates.  Exposed as a numerical health check, so near-degenerate schedules
// are evaluated (with a cancellation flag) instead of rejected.
inline SumResult vandermonde_residual(const RateSchedule& rates, int r, int k) {
    if (r < 1 || k < 1) throw PreconditionViolation("vandermonde_residual: r,k >= 1");
    auto lam = detail::collect_rates(rates, r, r + k);
    auto w = detail::vandermonde_weights(lam, false);
    CompensatedSum acc;
    for (double v : w) acc.add(v);
    SumResult out;
    out.value = acc.value();
    out.cancellation_error = 2.2e-16 * acc.abs_sum();
    // the residual is identically zero for distinct rates, so the flag keys
    // off the gap structure: near-coincident rates blow the weights up and
    // leave the computed value noise-dominated
    double scale = 0.0, min_gap = std::numeric_limits<double>::infinity();
    for (double v : lam) scale = std::max(scale, std::abs(v));
    for (size_t a = 0; a < lam.size(); ++a)
        for (size_t b = a + 1; b < lam.size(); ++b)
            min_gap = std::min(min_gap, std::abs(lam[a] - lam[b]));
    out.cancellation_warning = min_gap < 1e-6 * scale;
    return out;
}

// Classical (unsubordinated) nonlinear birth pmf Pr{N(s)=k | N(0)=r}.
inline double classical_birth_pmf(const RateSchedule& rates, double s, int r,
                                  int k) {
    if (r < 1 || k < r) throw PreconditionViolation("classical_birth_pmf: need k >= r >= 1");
    if (k == r) return std::exp(-s * rates.rate(r));
    auto lam = detail::collect_rates(rates, r, k);
    auto w = detail::vandermonde_log_weights(lam);
    double logprod = 0.0;
    for (int j = r; j <= k - 1; ++j) logprod += std::log(rates.rate(j));
    CompensatedSum acc;
    for (size_t m = 0; m < lam.size(); ++m)
        acc.add(w.sign[m] * std::exp(w.log_abs[m] + logprod - s * lam[m]));
    return acc.value();
}

// Pr{N^f(t)=k | N^f(0)=r}: the classical law with e^{-λ_m s} replaced by
// e^{-t f(λ_m)}.
inline double nonlinear_pmf(const RateSchedule& rates, const BernsteinFunction& f,
                            double t, int r, int k) {
    if (r < 1 || k < r) throw PreconditionViolation("nonlinear_pmf: need k >= r >= 1");
    if (!(t >= 0.0)) throw PreconditionViolation("nonlinear_pmf: t must be >= 0");
    if (k == r) return std::exp(-t * f.value(rates.rate(r)));
    if (t == 0.0) return 0.0;
    auto lam = detail::collect_rates(rates, r, k);
    auto w = detail::vandermonde_log_weights(lam);
    double logprod = 0.0;
    for (int j = r; j <= k - 1; ++j) logprod += std::log(rates.rate(j));
    CompensatedSum acc;
    for (size_t m = 0; m < lam.size(); ++m)
        acc.add(w.sign[m] * std::exp(w.log_abs[m] + logprod - t * f.value(lam[m])));
    return std::max(acc.value(), 0.0);
}

// Jump intensity r -> k: ∫ Pr{N(s)=k | N(0)=r} ν(ds).  The integrand is O(s)
// near 0 once the Vandermonde weights cancel the constant term.
inline double birth_transition_rate(const RateSchedule& rates,
                                    const BernsteinFunction& f, int r, int k,
                                    const QuadratureSpec& spec = {}) {
    if (!(k > r) || r < 1)
        throw PreconditionViolation("birth_transition_rate: need k > r >= 1");
    // materialize the weights once; the integrand reuses them per sample
    auto lam = detail::collect_rates(rates, r, k);
    auto w = detail::vandermonde_log_weights(lam);
    double logprod = 0.0;
    for (int j = r; j <= k - 1; ++j) logprod += std::log(rates.rate(j));
    auto g = [&](double s) {
        CompensatedSum acc;
        for (size_t m = 0; m < lam.size(); ++m)
            acc.add(w.sign[m] * std::exp(w.log_abs[m] + logprod - s * lam[m]));
        return acc.value();
    };
    return f.levy_integral(g, spec);
}

// Exponential rate of the sojourn in state r.
inline double holding_rate(const RateSchedule& rates, const BernsteinFunction& f,
                           int r) {
    return f.value(rates.rate(r));
}

// Pr{N^f(t) < ∞}.  Exact for regular schedules (declared Σ 1/λ_j = ∞);
// otherwise a truncated pmf sum with its bound.
inline MassEstimate survival_mass(const RateSchedule& rates,
                                  const RegularityDeclaration& decl,
                                  const BernsteinFunction& f, double t,
                                  int k_cap = 4096) {
    if (!(t >= 0.0)) throw PreconditionViolation("survival_mass: t must be >= 0");
    bool regular = rates.is_linear() || decl.diverges;
    if (regular) return {std::exp(-f.kill_rate() * t), 0.0};
    CompensatedSum acc;
    double last = 0.0;
    bool converged = false;
    for (int k = 1; k <= k_cap; ++k) {
        last = nonlinear_pmf(rates, f, t, 1, k);
        acc.add(last);
        if (k > 16 && last < 1e-14) {
            converged = true;
            break;
        }
    }
    // once terms reach 1e-14 the rest is negligible; when the cap is hit
    // first, allow for an algebraically decaying tail of total last * k_cap
    double bound = converged ? last * 2.0 : last * 2.0 * k_cap;
    return {acc.value(), bound};
}

// Subordinated Yule-Furry pmf, one progenitor, rates λk.
// Small k goes through the alternating sum; once cancellation exceeds the
// target accuracy the composition integral against the subordinator density
// takes over (named families only).
inline double yule_pmf(double lambda, const BernsteinFunction& f, double t,
                       int k) {
    if (k < 1) throw PreconditionViolation("yule_pmf: k must be >= 1");
    if (!(lambda > 0.0)) throw PreconditionViolation("yule_pmf: lambda must be > 0");
    if (!(t >= 0.0)) throw PreconditionViolation("yule_pmf: t must be >= 0");
    if (t == 0.0) return k == 1 ? 1.0 : 0.0;
    auto r = alternating_binomial_sum(
        k - 1, [&](int j) { return std::exp(-t * f.value(lambda * (j + 1))); });
    if (!r.cancellation_warning) return std::max(r.value, 0.0);
    if (!f.has_complex()) return std::max(r.value, 0.0);  // best available
    double s_max = 60.0 / lambda;
    auto integrand = [&](double s) {
        double p = std::exp(-lambda * s) *
                   std::pow(-std::expm1(-lambda * s), k - 1.0);
        return p == 0.0 ? 0.0 : p * subordinator_density(f, t, s);
    };
    // the inverted density carries absolute noise near 1e-9, so asking the
    // outer integral for more would pin every leaf at the refinement cap
    return adaptive_integrate(integrand, 0.0, s_max, 3e-9, 1e-6);
}

// r-th factorial moment of the subordinated Yule process; nullopt when the
// extended Bernštein evaluations diverge (all moments infinite for stable).
inline std::optional<double> yule_factorial_moment(double lambda,
                                                   const BernsteinFunction& f,
                                                   double t, int r) {
    if (r < 1) throw PreconditionViolation("yule_factorial_moment: r must be >= 1");
    CompensatedSum acc;
    for (int m = 0; m <= r - 1; ++m) {
        auto fe = f.extended(lambda * (r - m));
        if (!fe) return std::nullopt;
        acc.add(binomial(r - 1, m) * ((m % 2 == 0) ? 1.0 : -1.0) *
                std::exp(-t * *fe));
    }
    return std::tgamma(r + 1.0) * acc.value();
}

inline std::optional<double> yule_mean(double lambda, const BernsteinFunction& f,
                                       double t) {
    return yule_factorial_moment(lambda, f, t, 1);
}

inline std::optional<double> yule_variance(double lambda,
                                           const BernsteinFunction& f, double t) {
    auto f2 = f.extended(2.0 * lambda);
    auto f1 = f.extended(lambda);
    if (!f1 || !f2) return std::nullopt;
    return 2.0 * std::exp(-t * *f2) - std::exp(-t * *f1) -
           std::exp(-2.0 * t * *f1);
}

// Fractional nonlinear birth run at the subordinated clock: the exponential
// inside the Mittag-Leffler integral representation picks up the Laplace
// exponent, e^{-r λ_m^{1/ν} t} -> e^{-t f(r λ_m^{1/ν})}.
inline double fractional_pmf(const RateSchedule& rates, double nu_frac,
                             const BernsteinFunction& f, double t, int k) {
    if (k < 1) throw PreconditionViolation("fractional_pmf: k must be >= 1");
    if (!(nu_frac > 0.0 && nu_frac <= 1.0))
        throw PreconditionViolation("fractional_pmf: order must be in (0,1]");
    if (nu_frac == 1.0) return nonlinear_pmf(rates, f, t, 1, k);
    if (t == 0.0) return k == 1 ? 1.0 : 0.0;
    auto lam = detail::collect_rates(rates, 1, k);
    auto w = detail::vandermonde_log_weights(lam);
    double logprod = 0.0;
    for (int j = 1; j <= k - 1; ++j) logprod += std::log(rates.rate(j));
    CompensatedSum acc;
    for (size_t m = 0; m < lam.size(); ++m) {
        double lroot = std::pow(lam[m], 1.0 / nu_frac);
        double kernel = mittag_leffler_kernel(
            nu_frac, [&](double rr) { return std::exp(-t * f.value(rr * lroot)); });
        acc.add(w.sign[m] * std::exp(w.log_abs[m] + logprod) * kernel);
    }
    return std::max(acc.value(), 0.0);
}

// |d/dt p_k - (-f(λ_k) p_k + Σ_{r<k} p_r · rate(r,k))|, the master-equation
// defect of the computed laws; a verification quantity expected near 0.
inline double birth_master_equation_residual(const RateSchedule& rates,
                                             const BernsteinFunction& f, double t,
                                             int k, int r0 = 1) {
    if (!(t > 0.0))
        throw PreconditionViolation("birth_master_equation_residual: t must be > 0");
    auto pk = [&](double u) { return nonlinear_pmf(rates, f, u, r0, k); };
    double h = std::max(1e-5, t * 1e-5);
    double lhs = (pk(t + h) - pk(t - h)) / (2.0 * h);
    double rhs = -f.value(rates.rate(k)) * pk(t);
    for (int r = r0; r < k; ++r)
        rhs += nonlinear_pmf(rates, f, t, r0, r) *
               birth_transition_rate(rates, f, r, k);
    return std::abs(lhs - rhs);
}

}  // namespace subpop
