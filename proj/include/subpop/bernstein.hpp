#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>

#include "common.hpp"
#include "laplace.hpp"
#include "quadrature.hpp"

namespace subpop {

// ---------------------------------------------------------------------------
// Lévy measures
// ---------------------------------------------------------------------------

struct LevyMeasure {
    // density(s) for s > 0, per unit s
    std::function<double(double)> density;
    // p with ν(s) ~ C s^{-1-p} as s -> 0; quadrature metadata
    double singularity_order = 0.0;
    // θ with ν(s) <= C e^{-θ s} for large s; 0 means heavy tail
    double exponential_tail_rate = 0.0;

    // Checks ∫ (s ∧ 1) ν(ds) < ∞ numerically and nonnegativity on a sample
    // grid.  Run at construction for user-supplied densities.
    void validate() const {
        if (!(singularity_order < 1.0))
            throw ConfigError("LevyMeasure: singularity_order must be < 1");
        for (double s = 1e-8; s < 1e4; s *= 10.0) {
            double v = density(s);
            if (!(v >= 0.0) || std::isnan(v))
                throw ConfigError("LevyMeasure: density negative or NaN at s=" +
                                  std::to_string(s));
        }
        // head: ∫_0^1 s ν(ds), integrand ~ s^{-p}
        auto head = [&](double s) { return s * density(s); };
        double h = integrate_01_singular(head, singularity_order, 1e-10, 1e-8);
        // tail: ∫_1^∞ ν(ds)
        double t;
        if (exponential_tail_rate > 0.0) {
            auto mapped = [&](double u) {
                double nu = density(1.0 / u);
                return nu == 0.0 ? 0.0 : nu / (u * u);
            };
            t = adaptive_integrate(mapped, 0.0, 1.0, 1e-10, 1e-8);
        } else {
            auto mapped = [&](double u) {
                double nu = density(1.0 / u);
                return nu == 0.0 ? 0.0 : nu / (u * u);
            };
            t = integrate_01_singular(mapped, 1.0 - singularity_order, 1e-10, 1e-8);
        }
        if (!std::isfinite(h) || !std::isfinite(t))
            throw ConfigError("LevyMeasure: ∫ (s ∧ 1) ν(ds) does not converge");
    }
};

// ---------------------------------------------------------------------------
// Bernštein functions f(x) = kill + ∫ (1 - e^{-xs}) ν(ds), drift fixed to 0
// ---------------------------------------------------------------------------

enum class BernsteinFamily { Stable, TemperedStable, Gamma, Custom };

class BernsteinFunction {
public:
    static BernsteinFunction stable(double alpha) {
        require(alpha > 0.0 && alpha < 1.0, "stable index must be in (0,1)");
        BernsteinFunction f;
        f.family_ = BernsteinFamily::Stable;
        f.alpha_ = alpha;
        return f;
    }

    static BernsteinFunction tempered_stable(double alpha, double theta) {
        require(alpha > 0.0 && alpha < 1.0, "tempered stable index must be in (0,1)");
        require(theta > 0.0, "tempering rate must be > 0");
        BernsteinFunction f;
        f.family_ = BernsteinFamily::TemperedStable;
        f.alpha_ = alpha;
        f.theta_ = theta;
        return f;
    }

    static BernsteinFunction gamma(double a) {
        require(a > 0.0, "gamma parameter must be > 0");
        BernsteinFunction f;
        f.family_ = BernsteinFamily::Gamma;
        f.gamma_a_ = a;
        return f;
    }

    static BernsteinFunction custom(LevyMeasure measure) {
        measure.validate();
        BernsteinFunction f;
        f.family_ = BernsteinFamily::Custom;
        f.measure_ = std::make_shared<LevyMeasure>(std::move(measure));
        return f;
    }

    static BernsteinFunction killed(BernsteinFunction base, double kill_rate) {
        require(kill_rate >= 0.0, "killing rate must be >= 0");
        base.kill_rate_ += kill_rate;
        return base;
    }

    BernsteinFamily family() const { return family_; }
    double kill_rate() const { return kill_rate_; }
    bool is_killed() const { return kill_rate_ > 0.0; }
    double alpha() const { return alpha_; }
    double theta() const { return theta_; }
    double gamma_a() const { return gamma_a_; }

    // f(x), x >= 0
    double value(double x, const QuadratureSpec& spec = {}) const {
        if (!(x >= 0.0)) throw PreconditionViolation("eval_f: x must be >= 0");
        if (x == 0.0) return kill_rate_;
        double base;
        switch (family_) {
            case BernsteinFamily::Stable:
                base = std::pow(x, alpha_);
                break;
            case BernsteinFamily::TemperedStable:
                base = std::pow(x + theta_, alpha_) - std::pow(theta_, alpha_);
                break;
            case BernsteinFamily::Gamma:
                base = std::log1p(x / gamma_a_);
                break;
            case BernsteinFamily::Custom:
                base = levy_integral_raw([x](double s) { return -std::expm1(-x * s); },
                                         spec);
                break;
        }
        return kill_rate_ + base;
    }

    double operator()(double x) const { return value(x); }

    // Extended Bernštein function f(-x) = ∫ (1 - e^{sx}) ν(ds), x > 0.
    // Returns nullopt when the integral diverges; decided from family
    // metadata, never by probing a divergent integral.
    std::optional<double> extended(double x, const QuadratureSpec& spec = {}) const {
        if (!(x > 0.0)) throw PreconditionViolation("eval_f_extended: x must be > 0");
        if (is_killed())
            throw PreconditionViolation("eval_f_extended: defined for unkilled f only");
        switch (family_) {
            case BernsteinFamily::Stable:
                return std::nullopt;
            case BernsteinFamily::TemperedStable:
                if (x >= theta_) return std::nullopt;
                return std::pow(theta_ - x, alpha_) - std::pow(theta_, alpha_);
            case BernsteinFamily::Gamma:
                if (x >= gamma_a_) return std::nullopt;
                return std::log1p(-x / gamma_a_);
            case BernsteinFamily::Custom: {
                if (!(measure_->exponential_tail_rate > x)) return std::nullopt;
                return levy_integral_raw(
                    [x](double s) { return -std::expm1(x * s); }, spec);
            }
        }
        return std::nullopt;
    }

    // f^{(n)}(x) = (-1)^{n+1} ∫ s^n e^{-xs} ν(ds), n >= 1, x > 0
    double derivative(int n, double x, const QuadratureSpec& spec = {}) const {
        if (n < 1) throw PreconditionViolation("eval_f_derivative: n must be >= 1");
        if (!(x > 0.0)) throw PreconditionViolation("eval_f_derivative: x must be > 0");
        switch (family_) {
            case BernsteinFamily::Stable:
                return falling_power(alpha_, n) * std::pow(x, alpha_ - n);
            case BernsteinFamily::TemperedStable:
                return falling_power(alpha_, n) * std::pow(x + theta_, alpha_ - n);
            case BernsteinFamily::Gamma: {
                double sign = (n % 2 == 1) ? 1.0 : -1.0;
                return sign * std::tgamma(static_cast<double>(n)) /
                       std::pow(gamma_a_ + x, static_cast<double>(n));
            }
            case BernsteinFamily::Custom: {
                double sign = (n % 2 == 0) ? -1.0 : 1.0;
                return sign * levy_integral_raw(
                                  [n, x](double s) {
                                      return std::pow(s, static_cast<double>(n)) *
                                             std::exp(-x * s);
                                  },
                                  spec);
            }
        }
        return 0.0;
    }

    // f on the right complex half-plane; used by the transform-inversion
    // routes.  Named families only.
    std::complex<double> value_complex(std::complex<double> u) const {
        using C = std::complex<double>;
        switch (family_) {
            case BernsteinFamily::Stable:
                return C(kill_rate_) + std::pow(u, alpha_);
            case BernsteinFamily::TemperedStable:
                return C(kill_rate_) + std::pow(u + theta_, alpha_) -
                       std::pow(theta_, alpha_);
            case BernsteinFamily::Gamma:
                return C(kill_rate_) + std::log(1.0 + u / gamma_a_);
            case BernsteinFamily::Custom:
                throw UnsupportedFamily(
                    "complex evaluation is unavailable for custom Lévy measures");
        }
        return {};
    }

    bool has_complex() const { return family_ != BernsteinFamily::Custom; }

    // ρ with f(x) - f(0) ~ c x^ρ as x -> 0+; 0 when killed (f(0) > 0).
    double small_x_order() const {
        if (is_killed()) return 0.0;
        switch (family_) {
            case BernsteinFamily::Stable:
                return alpha_;
            case BernsteinFamily::TemperedStable:
            case BernsteinFamily::Gamma:
                return 1.0;
            case BernsteinFamily::Custom: {
                double p = measure_->singularity_order;
                bool heavy = measure_->exponential_tail_rate == 0.0;
                return (heavy && p > 0.0) ? p : 1.0;
            }
        }
        return 1.0;
    }

    LevyMeasure levy_measure() const {
        switch (family_) {
            case BernsteinFamily::Stable: {
                double a = alpha_, c = a / std::tgamma(1.0 - a);
                return {[a, c](double s) { return c * std::pow(s, -a - 1.0); }, a, 0.0};
            }
            case BernsteinFamily::TemperedStable: {
                double a = alpha_, th = theta_, c = a / std::tgamma(1.0 - a);
                return {[a, th, c](double s) {
                            return c * std::exp(-th * s) * std::pow(s, -a - 1.0);
                        },
                        a, th};
            }
            case BernsteinFamily::Gamma: {
                double a = gamma_a_;
                return {[a](double s) { return std::exp(-a * s) / s; }, 0.0, a};
            }
            case BernsteinFamily::Custom:
                return *measure_;
        }
        return {};
    }

    // ∫_0^∞ g(s) ν(ds) for the Lévy measure of this function.  The caller
    // certifies g(s) = O(s) near 0 (probed numerically) and that the tail
    // product g·ν is integrable.
    template <typename G>
    double levy_integral(G&& g, const QuadratureSpec& spec = {}) const {
        probe_origin(g);
        return levy_integral_raw(std::forward<G>(g), spec);
    }

private:
    BernsteinFamily family_ = BernsteinFamily::Stable;
    double alpha_ = 0.5;
    double theta_ = 0.0;
    double gamma_a_ = 1.0;
    double kill_rate_ = 0.0;
    std::shared_ptr<LevyMeasure> measure_;

    static void require(bool ok, const char* msg) {
        if (!ok) throw ConfigError(msg);
    }

    static double falling_power(double a, int n) {
        double r = 1.0;
        for (int i = 0; i < n; ++i) r *= a - i;
        return r;
    }

    template <typename G>
    static void probe_origin(G& g) {
        // an O(s) weight scales down at least linearly between the probes;
        // the additive allowance keeps weights that vanish faster than s,
        // whose probe values are pure cancellation noise, from being
        // mistaken for constants
        if (std::abs(g(1e-4)) > 3e-2 * std::abs(g(1e-2)) + 1e-10)
            throw PreconditionViolation("levy_integral: weight is not O(s) near 0");
    }

    template <typename G>
    double levy_integral_raw(G&& g, const QuadratureSpec& spec) const {
        LevyMeasure m = levy_measure();
        const double p = m.singularity_order;
        auto product = [&](double s) {
            double nu = m.density(s);
            return nu == 0.0 ? 0.0 : g(s) * nu;
        };
        // (0,1]: integrand ~ s^{-p} since g = O(s)
        double head = integrate_01_singular(product, p, spec.tolerance_abs,
                                            spec.tolerance_rel);
        // [1,∞): map s = 1/u
        double tail;
        auto mapped = [&](double u) {
            double s = 1.0 / u;
            double nu = m.density(s);
            return nu == 0.0 ? 0.0 : g(s) * nu / (u * u);
        };
        if (m.exponential_tail_rate > 0.0) {
            tail = adaptive_integrate(mapped, 0.0, 1.0, spec.tolerance_abs,
                                      spec.tolerance_rel);
        } else {
            // heavy tail ν ~ s^{-1-p}: mapped integrand ~ u^{p-1}
            tail = integrate_01_singular(mapped, 1.0 - p, spec.tolerance_abs,
                                         spec.tolerance_rel);
        }
        return head + tail;
    }
};

namespace detail {

// Unit-time density of the one-sided stable law with index a, through the
// positive-integrand representation
//   rho(x) = a/((1-a) pi) x^{-1/(1-a)} ∫_0^pi A(phi) e^{-x^{-a/(1-a)} A(phi)} dphi,
//   A(phi) = [sin(a phi)^a sin((1-a) phi)^{1-a} / sin(phi)]^{1/(1-a)}.
// Every factor is nonnegative, so there is no cancellation anywhere: the deep
// left tail underflows gracefully to zero and the result carries the relative
// accuracy of the quadrature at every x.
inline double stable_unit_density(double a, double x, double rtol) {
    const double p = 1.0 / (1.0 - a);
    const double b = std::pow(x, -a * p);
    auto g = [&](double phi) {
        if (phi <= 0.0 || phi >= M_PI) return 0.0;
        double log_A = p * (a * std::log(std::sin(a * phi)) +
                            (1.0 - a) * std::log(std::sin((1.0 - a) * phi)) -
                            std::log(std::sin(phi)));
        if (log_A > 690.0) return 0.0;  // b A overflows; the weight is 0 anyway
        double A = std::exp(log_A);
        double e = -b * A;
        return e < -700.0 ? 0.0 : A * std::exp(e);
    };
    // A grows like (pi - phi)^{-1/(1-a)} at the right endpoint; past the
    // split point integrate in y = -log(pi - phi), where the power spike
    // becomes a single smooth bump
    const double d0 = 0.1;
    double value = adaptive_integrate(g, 0.0, M_PI - d0, 1e-300, rtol);
    double log_C = p * (a * std::log(std::sin(a * M_PI)) +
                        (1.0 - a) * std::log(std::sin((1.0 - a) * M_PI)));
    double y0 = std::log(1.0 / d0);
    double y1 = (std::log(745.0 / b) - log_C) / p + 2.0;
    if (y1 > y0) {
        auto h = [&](double y) {
            double u = std::exp(-y);
            return g(M_PI - u) * u;
        };
        value += adaptive_integrate(h, y0, y1, 1e-300, rtol);
    }
    return a * p / M_PI * std::pow(x, -p) * value;
}

}  // namespace detail

// Marginal density of the subordinator H^f at time t.  The stable family has
// the self-similar form t^{-1/a} rho_1(s t^{-1/a}) with rho_1 computed from a
// positive integral; the other named families go through fixed-Talbot
// inversion of u ↦ e^{-t f(u)}.  For killed f this is the defective density
// e^{-at} h_t(s).  Named families only.
inline double subordinator_density(const BernsteinFunction& f, double t, double s,
                                   const InversionSpec& spec = {}) {
    if (!f.has_complex())
        throw UnsupportedFamily("subordinator_density: named families only");
    if (!(s > 0.0)) return 0.0;
    if (f.family() == BernsteinFamily::Stable) {
        double a = f.alpha();
        double scale = std::pow(t, -1.0 / a);
        double decay = f.is_killed() ? std::exp(-f.kill_rate() * t) : 1.0;
        double x = s * scale;
        try {
            return decay * scale * detail::stable_unit_density(a, x, 1e-10);
        } catch (const QuadratureFailure&) {
            // extreme right-tail arguments narrow the endpoint bump past the
            // refinement budget; a looser pass still carries far more digits
            // than anything at that magnitude needs
            return decay * scale * detail::stable_unit_density(a, x, 1e-7);
        }
    }
    // far inside the left tail (s much below the typical scale) the combined
    // exponent s u - t f(u) turns large and positive on part of the contour
    // and the sum is pure cancellation noise of that size; track the excess
    // over the nominal 2m/5 so the noise floor scales with it
    double max_re = 0.0;
    double v = talbot_inverse(
        [&](std::complex<double> u) {
            std::complex<double> e = -t * f.value_complex(u);
            max_re = std::max(max_re, (s * u + e).real());
            // e^{s u} damps these nodes to nothing; exp(e) alone would
            // overflow to inf and poison the sum with inf * 0
            if (e.real() > 700.0) return std::complex<double>(0.0, 0.0);
            return std::exp(e);
        },
        s, spec);
    double m = spec.node_count;
    // a contour whose combined exponent runs far above the nominal 2m/5 sums
    // nothing but cancellation noise of that size; this happens deep in the
    // left tail, where the true density is far below anything representable
    if (!std::isfinite(v) || max_re > 0.4 * m + 30.0) return 0.0;
    // the contour sum carries terms of size e^{2m/5} r/m, so results below
    // eps times that are indistinguishable from zero; clamping them (and the
    // matching negative overshoot) keeps tail integrals from chasing noise
    double noise_floor = std::numeric_limits<double>::epsilon() * m *
                         std::exp(0.4 * m) * 4.0 / s;
    return v <= noise_floor ? 0.0 : v;
}

}  // namespace subpop
