#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <vector>

#include "bernstein.hpp"
#include "common.hpp"
#include "derivative.hpp"
#include "laplace.hpp"
#include "quadrature.hpp"
#include "series.hpp"

namespace subpop {

struct BDSpec {
    double lambda = 1.0;
    double mu = 1.0;
    int r0 = 1;

    void validate() const {
        if (!(lambda > 0.0) || !(mu > 0.0))
            throw ConfigError("BDSpec: rates must be > 0");
        if (r0 < 1) throw ConfigError("BDSpec: r0 must be >= 1");
    }
    bool balanced() const { return lambda == mu; }
};

// ---------------------------------------------------------------------------
// Classical (unsubordinated) linear birth-death law
// ---------------------------------------------------------------------------

// Pr{L(s)=n | L(0)=r0}; all three regimes, any r0 >= 1.
inline double bd_classical_pmf(const BDSpec& spec, double s, int n) {
    spec.validate();
    if (n < 0) throw PreconditionViolation("bd_classical_pmf: n must be >= 0");
    if (!(s >= 0.0)) throw PreconditionViolation("bd_classical_pmf: s must be >= 0");
    if (s == 0.0) return n == spec.r0 ? 1.0 : 0.0;
    const double lam = spec.lambda, mu = spec.mu;
    const int r = spec.r0;
    double a, b;  // death- and birth-side geometric weights
    if (lam == mu) {
        a = b = lam * s / (1.0 + lam * s);
    } else {
        double e = std::exp((lam - mu) * s);
        a = mu * (e - 1.0) / (lam * e - mu);
        b = lam * (e - 1.0) / (lam * e - mu);
    }
    if (r == 1) {
        if (n == 0) return a;
        return (1.0 - a) * (1.0 - b) * std::pow(b, n - 1.0);
    }
    CompensatedSum acc;
    int jmax = std::min(r, n);
    for (int j = 0; j <= jmax; ++j) {
        double term = binomial(r, j) * binomial(r + n - j - 1, r - 1) *
                      std::pow(a, r - j) * std::pow(b, n - j) *
                      std::pow(1.0 - a - b, j);
        acc.add(term);
    }
    return std::max(acc.value(), 0.0);
}

// ---------------------------------------------------------------------------
// λ = μ machinery: Φ(λ,t) = ∫ e^{-w} e^{-t f(λw)} dw and its λ-derivatives
// ---------------------------------------------------------------------------

namespace detail {

// d^j/dλ^j Φ for j = 0..m, by differentiating under the integral sign; the
// exponential derivatives come from the complete Bell recursion with
// g(λ) = -t f(λw), g^{(i)} = -t w^i f^{(i)}(λw).
inline std::vector<double> phi_derivatives(double lambda,
                                           const BernsteinFunction& f, double t,
                                           int m, const QuadratureSpec& spec = {}) {
    std::vector<double> out(m + 1);
    for (int j = 0; j <= m; ++j) {
        auto integrand = [&](double w) {
            double F = f.value(lambda * w);
            double E = std::exp(-t * F);
            if (j == 0) return E;
            std::vector<double> gder(j);
            for (int i = 0; i < j; ++i)
                gder[i] = -t * std::pow(w, i + 1.0) * f.derivative(i + 1, lambda * w);
            auto bell = bell_exponential(gder);
            return E * bell[j];
        };
        out[j] = exp_weighted_integral(integrand, spec);
    }
    return out;
}

}  // namespace detail

inline double bd_survival_kernel(double lambda, const BernsteinFunction& f,
                                 double t, const QuadratureSpec& spec = {}) {
    return exp_weighted_integral(
        [&](double w) { return std::exp(-t * f.value(lambda * w)); }, spec);
}

// ---------------------------------------------------------------------------
// Extinction
// ---------------------------------------------------------------------------

inline double bd_extinction(const BDSpec& spec, const BernsteinFunction& f,
                            double t, const SeriesTruncation& trunc = {}) {
    spec.validate();
    trunc.validate();
    if (spec.r0 != 1)
        throw PreconditionViolation("bd_extinction: printed series need r0=1");
    if (!(t >= 0.0)) throw PreconditionViolation("bd_extinction: t must be >= 0");
    if (t == 0.0) return 0.0;
    const double lam = spec.lambda, mu = spec.mu;
    if (spec.balanced())
        return 1.0 - bd_survival_kernel(lam, f, t);
    const double q = std::min(lam, mu) / std::max(lam, mu);
    const double gap = std::abs(lam - mu);
    CompensatedSum acc;
    double qm = 1.0;
    int small_streak = 0;
    for (int m = 1; m <= trunc.max_terms; ++m) {
        qm *= q;
        double term = qm * std::exp(-t * f.value(gap * m));
        acc.add(term);
        if (m >= trunc.min_terms && term < trunc.epsilon * std::max(std::abs(acc.value()), 1e-16)) {
            if (++small_streak >= 3) break;
        } else {
            small_streak = 0;
        }
        if (m == trunc.max_terms)
            throw TruncationFailure("bd_extinction: series did not converge");
    }
    double p;
    if (lam > mu)
        p = (mu - lam) / lam * acc.value() + mu / lam;
    else
        p = 1.0 - (mu - lam) / lam * acc.value();
    return std::min(std::max(p, 0.0), 1.0);
}

// Density of the extinction time when λ = μ.
inline double extinction_time_density(double lambda, const BernsteinFunction& f,
                                      double t, const QuadratureSpec& spec = {}) {
    if (!(lambda > 0.0) || !(t > 0.0))
        throw PreconditionViolation("extinction_time_density: need lambda, t > 0");
    return exp_weighted_integral(
        [&](double w) {
            double F = f.value(lambda * w);
            return F * std::exp(-t * F);
        },
        spec);
}

// ---------------------------------------------------------------------------
// State probabilities of the subordinated process, one progenitor
// ---------------------------------------------------------------------------

// λ = μ route: p_n = ((-1)^{n-1} λ^{n-1}/n!) d^n/dλ^n [λ Φ(λ,t)], with
// d^n[λ e^g] = e^g (λ B_n + n B_{n-1}) pointwise in w.
inline double bd_pmf_balanced(double lambda, const BernsteinFunction& f, double t,
                              int n, const QuadratureSpec& spec = {}) {
    if (n == 0) return 1.0 - bd_survival_kernel(lambda, f, t, spec);
    if (n > 30)
        throw UnsupportedOrder("bd_pmf: derivative route capped at n = 30");
    auto integrand = [&](double w) {
        double F = f.value(lambda * w);
        double E = std::exp(-t * F);
        std::vector<double> gder(n);
        for (int i = 0; i < n; ++i)
            gder[i] = -t * std::pow(w, i + 1.0) * f.derivative(i + 1, lambda * w);
        auto bell = bell_exponential(gder);
        return E * (lambda * bell[n] + n * bell[n - 1]);
    };
    double d = exp_weighted_integral(integrand, spec);
    double sign = (n % 2 == 1) ? 1.0 : -1.0;
    double v = sign * std::pow(lambda, n - 1.0) / std::tgamma(n + 1.0) * d;
    return std::min(std::max(v, 0.0), 1.0);
}

// Composition route against the subordinator marginal density; used to
// cross-check the derivative route and to reach states beyond its order cap.
inline double bd_pmf_by_density(const BDSpec& spec, const BernsteinFunction& f,
                                double t, int n) {
    if (!f.has_complex())
        throw UnsupportedFamily("bd_pmf_by_density: named families only");
    auto integrand = [&](double s) {
        double p = bd_classical_pmf(spec, s, n);
        return p == 0.0 ? 0.0 : p * subordinator_density(f, t, s);
    };
    // the classical pmf vanishes at both ends for n >= 1; wide split capture.
    // tolerances sit above the ~1e-9 absolute noise of the inverted density
    double head = adaptive_integrate(integrand, 0.0, 1.0, 3e-9, 1e-6);
    auto tail = [&](double u) {
        double s = 1.0 / u;
        return integrand(s) * s * s;
    };
    double far = adaptive_integrate(tail, 1e-7, 1.0, 3e-9, 1e-6);
    return head + far;
}

inline double bd_pmf(const BDSpec& spec, const BernsteinFunction& f, double t,
                     int n, const SeriesTruncation& trunc = {},
                     const QuadratureSpec& qspec = {}) {
    spec.validate();
    trunc.validate();
    if (n < 0) throw PreconditionViolation("bd_pmf: n must be >= 0");
    if (spec.r0 != 1)
        throw PreconditionViolation("bd_pmf: printed laws need r0=1");
    if (!(t >= 0.0)) throw PreconditionViolation("bd_pmf: t must be >= 0");
    if (t == 0.0) return n == 1 ? 1.0 : 0.0;
    if (n == 0) return bd_extinction(spec, f, t, trunc);
    if (spec.balanced()) {
        double v = bd_pmf_balanced(spec.lambda, f, t, n, qspec);
        // high orders overflow the Bell coefficients; the density route has
        // no order cap and takes over
        if (std::isfinite(v)) return v;
        if (f.has_complex()) return bd_pmf_by_density(spec, f, t, n);
        throw UnsupportedOrder("bd_pmf: derivative route overflowed");
    }
    const double lam = spec.lambda, mu = spec.mu;
    const double q = std::min(lam, mu) / std::max(lam, mu);
    const double gap = std::abs(lam - mu);
    CompensatedSum acc;
    double logq = std::log(q);
    int small_streak = 0;
    for (int l = 0;; ++l) {
        if (l > trunc.max_terms)
            throw TruncationFailure("bd_pmf: series did not converge");
        auto inner = alternating_binomial_sum(n - 1, [&](int r) {
            return std::exp(-t * f.value(gap * (l + r + 1)));
        });
        double weight = std::exp(log_binomial(l + n, l) + l * logq);
        acc.add(weight * inner.value);
        if (l >= trunc.min_terms &&
            weight < trunc.epsilon * std::max(std::abs(acc.value()), 1e-16)) {
            if (++small_streak >= 3) break;
        } else {
            small_streak = 0;
        }
    }
    double pre = (lam > mu)
                     ? std::pow((lam - mu) / lam, 2.0)
                     : std::pow((mu - lam) / mu, 2.0) * std::pow(lam / mu, n - 1.0);
    return std::min(std::max(pre * acc.value(), 0.0), 1.0);
}

// ---------------------------------------------------------------------------
// Transitions from r progenitors, λ = μ
// ---------------------------------------------------------------------------

namespace detail {

// d^m/dλ^m [(1/λ)(1 - Φ)] assembled by Leibniz from the Φ derivatives.
inline std::vector<double> psi_derivatives(double lambda,
                                           const BernsteinFunction& f, double t,
                                           int m, const QuadratureSpec& spec = {}) {
    auto phi = phi_derivatives(lambda, f, t, m, spec);
    std::vector<double> out(m + 1);
    for (int j = 0; j <= m; ++j) {
        double inv_j = std::tgamma(j + 1.0) / std::pow(lambda, j + 1.0);
        if (j % 2 == 1) inv_j = -inv_j;  // d^j (1/λ)
        CompensatedSum acc;
        acc.add(inv_j);
        for (int i = 0; i <= j; ++i) {
            double inv_i = std::tgamma(i + 1.0) / std::pow(lambda, i + 1.0);
            if (i % 2 == 1) inv_i = -inv_i;
            acc.add(-binomial(j, i) * inv_i * phi[j - i]);
        }
        out[j] = acc.value();
    }
    return out;
}

}  // namespace detail

// Pr{L^f(t0+t)=n | L^f(t0)=r} for λ = μ, via the double binomial sum over
// λ-derivatives of (1/λ)(1 - Φ).
inline double bd_transition(const BDSpec& spec, const BernsteinFunction& f,
                            double t, int r, int n,
                            const QuadratureSpec& qspec = {}) {
    spec.validate();
    if (!spec.balanced())
        throw PreconditionViolation("bd_transition: requires lambda == mu");
    if (r < 1 || n < 0) throw PreconditionViolation("bd_transition: need r >= 1, n >= 0");
    if (!(t >= 0.0)) throw PreconditionViolation("bd_transition: t must be >= 0");
    const double lambda = spec.lambda;
    int m_max = r + n - 1;
    if (m_max > 30)
        throw UnsupportedOrder("bd_transition: derivative order above 30");
    auto psi = detail::psi_derivatives(lambda, f, t, std::max(m_max, 0), qspec);
    double sign = ((r + n - 1) % 2 == 0) ? 1.0 : -1.0;
    CompensatedSum acc;
    for (int j = 0; j <= std::min(r, n); ++j) {
        for (int k = 0; k <= j; ++k) {
            int order = r + n - 2 * j + k - 1;
            double base = binomial(r, j) * binomial(r + n - j - 1, r - 1) *
                          binomial(j, k);
            if (order < 0) {
                // power zero of λs/(1+λs); only reachable when n = r, where
                // the summand is a constant with no derivative representation
                acc.add(base * std::pow(-2.0, k));
                continue;
            }
            double coef = base * std::pow(2.0, k) * sign *
                          std::pow(lambda, r + n + k - 2.0 * j) /
                          std::tgamma(order + 1.0);
            acc.add(coef * psi[order]);
        }
    }
    return std::min(std::max(acc.value(), 0.0), 1.0);
}

// Jump intensity r -> n for λ = μ: ∫ Pr{L(s)=n | L(0)=r} ν(ds).
inline double bd_infinitesimal_rate(const BDSpec& spec,
                                    const BernsteinFunction& f, int r, int n,
                                    const QuadratureSpec& qspec = {}) {
    spec.validate();
    if (!spec.balanced())
        throw PreconditionViolation("bd_infinitesimal_rate: requires lambda == mu");
    if (n == r)
        throw PreconditionViolation("bd_infinitesimal_rate: need n != r");
    BDSpec from = spec;
    from.r0 = r;
    auto g = [&](double s) { return bd_classical_pmf(from, s, n); };
    return f.levy_integral(g, qspec);
}

// Exponential rate of the first jump out of state 1 (λ = μ):
// d/dλ [λ ∫ e^{-w} f(λw) dw] = ∫ e^{-w} (f(λw) + λw f'(λw)) dw.
inline double first_jump_rate(double lambda, const BernsteinFunction& f,
                              const QuadratureSpec& spec = {}) {
    if (!(lambda > 0.0)) throw PreconditionViolation("first_jump_rate: lambda <= 0");
    return exp_weighted_integral(
        [&](double w) {
            double x = lambda * w;
            return f.value(x) + x * f.derivative(1, x);
        },
        spec);
}

// ---------------------------------------------------------------------------
// Sojourn times, λ = μ
// ---------------------------------------------------------------------------

inline constexpr double kInfiniteTime = std::numeric_limits<double>::infinity();

/// E V_k^f(t): expected time spent in state k up to t, starting from one
// progenitor.  t = ∞ gives the asymptotic value; the stable family has the
// closed form Γ(2-α)Γ(α+k-1)/(k! Γ(α) λ^α).
inline double mean_sojourn(double lambda, const BernsteinFunction& f, double t,
                           int k, bool use_closed_form = true,
                           const QuadratureSpec& spec = {}) {
    if (k < 1) throw PreconditionViolation("mean_sojourn: k must be >= 1");
    if (!(lambda > 0.0)) throw PreconditionViolation("mean_sojourn: lambda <= 0");
    if (!(t >= 0.0)) throw PreconditionViolation("mean_sojourn: t must be >= 0");
    if (t == 0.0) return 0.0;
    const bool infinite_horizon = std::isinf(t);
    if (infinite_horizon) {
        double rho = f.small_x_order();
        if (use_closed_form && f.family() == BernsteinFamily::Stable &&
            !f.is_killed()) {
            double a = f.alpha();
            // log space keeps the ratio finite for large k
            return std::exp(std::lgamma(2.0 - a) + std::lgamma(a + k - 1.0) -
                            std::lgamma(k + 1.0) - std::lgamma(a) -
                            a * std::log(lambda));
        }
        // 1/f(λw) ~ w^{-ρ} at the origin; ρ >= 1 makes the asymptotic mean
        // sojourn diverge (the process lingers too long near extinction)
        if (rho >= 1.0) return std::numeric_limits<double>::infinity();
    }
    auto integrand = [&](double w) {
        double F = f.value(lambda * w);
        std::vector<double> Fder(k);
        for (int i = 0; i < k; ++i)
            Fder[i] = std::pow(w, i + 1.0) * f.derivative(i + 1, lambda * w);
        auto rec = reciprocal_derivatives(F, Fder);
        std::vector<double> psi(k + 1);
        if (infinite_horizon) {
            psi = rec;
        } else {
            std::vector<double> gder(k);
            for (int i = 0; i < k; ++i) gder[i] = -t * Fder[i];
            auto bell = bell_exponential(gder);
            double E = std::exp(-t * F);
            for (int j = 0; j <= k; ++j) {
                CompensatedSum acc;
                acc.add(-std::expm1(-t * F) * rec[j]);  // (1-E) rec[j]
                for (int i = 1; i <= j; ++i)
                    acc.add(-binomial(j, i) * E * bell[i] * rec[j - i]);
                psi[j] = acc.value();
            }
        }
        return lambda * psi[k] + k * psi[k - 1];
    };
    double integral =
        infinite_horizon
            ? exp_weighted_integral_singular(integrand, f.small_x_order(), spec)
            : exp_weighted_integral(integrand, spec);
    double sign = (k % 2 == 1) ? 1.0 : -1.0;
    return sign * std::pow(lambda, k - 1.0) / std::tgamma(k + 1.0) * integral;
}

// Laplace transform r_k(μ̂) = ∫ e^{-μ̂ t} Pr{L^f_k(t)=k} dt of the state-k
// occupancy starting from k progenitors.  k=1 has the closed derivative form;
// larger k integrates the transition probability numerically.
struct SojournTransform {
    int k = 1;
    std::function<std::complex<double>(std::complex<double>)> transform;

    double operator()(double mu_hat) const {
        return std::real(transform(std::complex<double>(mu_hat, 0.0)));
    }
};

inline SojournTransform sojourn_transform(double lambda,
                                          const BernsteinFunction& f, int k,
                                          const QuadratureSpec& spec = {}) {
    if (k < 1) throw PreconditionViolation("sojourn_transform: k must be >= 1");
    if (!(lambda > 0.0))
        throw PreconditionViolation("sojourn_transform: lambda <= 0");
    SojournTransform out;
    out.k = k;
    if (k == 1) {
        // r_1(μ̂) = d/dλ [λ ∫ e^{-w} / (μ̂ + f(λw)) dw]
        out.transform = [lambda, f, spec](std::complex<double> mu_hat) {
            auto integrand = [&](double w) {
                double F = f.value(lambda * w);
                double x = lambda * w;
                std::complex<double> denom = mu_hat + F;
                return 1.0 / denom - x * f.derivative(1, x) / (denom * denom);
            };
            auto re = [&](double w) { return std::real(integrand(w)); };
            auto im = [&](double w) { return std::imag(integrand(w)); };
            return std::complex<double>(exp_weighted_integral(re, spec),
                                        exp_weighted_integral(im, spec));
        };
        return out;
    }
    out.transform = [lambda, f, k, spec](std::complex<double> mu_hat) {
        double re_mu = std::real(mu_hat);
        if (!(re_mu > 0.0))
            throw InversionFailure(
                "sojourn_transform: numeric transform needs Re(mu_hat) > 0");
        BDSpec bspec;
        bspec.lambda = bspec.mu = lambda;
        bspec.r0 = k;
        auto occupancy = [&](double u) {
            return bd_transition(bspec, f, u, k, k, spec);
        };
        double horizon = 40.0 / re_mu;
        auto g = [&](double u) {
            return std::exp(-mu_hat * u) * occupancy(u);
        };
        return adaptive_integrate<std::complex<double>>(g, 1e-10, horizon, 1e-11,
                                                        1e-8);
    };
    return out;
}

// Total jump intensity out of state k for the subordinated process.
inline double state_exit_rate(double lambda, const BernsteinFunction& f, int k,
                              const QuadratureSpec& spec = {}) {
    if (k < 1) throw PreconditionViolation("state_exit_rate: k must be >= 1");
    if (k == 1) return first_jump_rate(lambda, f, spec);
    BDSpec bspec;
    bspec.lambda = bspec.mu = lambda;
    bspec.r0 = k;
    return f.levy_integral(
        [&](double s) { return 1.0 - bd_classical_pmf(bspec, s, k); }, spec);
}

// Density at x of the absolutely continuous part of the sojourn time V_k(t),
// by inverting L_t[density](μ̂) = e^{-x/r_k(μ̂)} / (μ̂ r_k(μ̂)) on a
// right-half-plane contour (the numerically built r_k exists only for
// Re μ̂ > 0).  The law also has an atom of mass e^{-t ρ_k} at x = t, where
// ρ_k is the exit rate of state k; its transform term e^{-(μ̂+ρ_k)x} is
// removed before inversion, since inverting a point mass numerically smears
// it over the whole upper range of x.
inline double sojourn_density(double lambda, const BernsteinFunction& f, int k,
                              double t, double x,
                              const InversionSpec& inv = {}) {
    if (!(t > 0.0) || !(x > 0.0))
        throw PreconditionViolation("sojourn_density: need t, x > 0");
    if (x >= t) return 0.0;
    auto rk = sojourn_transform(lambda, f, k);
    double exit = state_exit_rate(lambda, f, k);
    auto transform = [&](std::complex<double> mu_hat) {
        std::complex<double> r = rk.transform(mu_hat);
        return std::exp(-x / r) / (mu_hat * r) - std::exp(-(mu_hat + exit) * x);
    };
    int terms = std::max(inv.node_count, 16);
    double v = euler_inverse(transform, t, terms, 12);
    if (!std::isfinite(v))
        throw InversionFailure("sojourn_density: inversion did not converge");
    return std::max(v, 0.0);
}

}  // namespace subpop
