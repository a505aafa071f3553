#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace subpop {

// ---------------------------------------------------------------------------
// Error types
// ---------------------------------------------------------------------------

struct QuadratureFailure : std::runtime_error {
    explicit QuadratureFailure(const std::string& what) : std::runtime_error(what) {}
};

struct PreconditionViolation : std::runtime_error {
    explicit PreconditionViolation(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateRates : std::runtime_error {
    explicit DegenerateRates(const std::string& what) : std::runtime_error(what) {}
};

struct TruncationFailure : std::runtime_error {
    explicit TruncationFailure(const std::string& what) : std::runtime_error(what) {}
};

struct UnsupportedOrder : std::runtime_error {
    explicit UnsupportedOrder(const std::string& what) : std::runtime_error(what) {}
};

struct UnsupportedFamily : std::runtime_error {
    explicit UnsupportedFamily(const std::string& what) : std::runtime_error(what) {}
};

struct InversionFailure : std::runtime_error {
    explicit InversionFailure(const std::string& what) : std::runtime_error(what) {}
};

struct GridTooCoarse : std::runtime_error {
    explicit GridTooCoarse(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Shared tuning knobs
// ---------------------------------------------------------------------------

struct QuadratureSpec {
    int node_count = 64;
    double tolerance_abs = 1e-12;
    double tolerance_rel = 1e-10;
    int max_refinements = 20;

    void validate() const {
        if (node_count < 8) throw ConfigError("QuadratureSpec: node_count must be >= 8");
        if (!(tolerance_abs > 0) || !(tolerance_rel > 0))
            throw ConfigError("QuadratureSpec: tolerances must be positive");
    }
};

struct SeriesTruncation {
    double epsilon = 1e-12;
    int min_terms = 16;
    int max_terms = 1000000;

    void validate() const {
        if (!(epsilon > 0 && epsilon < 1))
            throw ConfigError("SeriesTruncation: epsilon must be in (0,1)");
        if (min_terms > max_terms)
            throw ConfigError("SeriesTruncation: min_terms > max_terms");
    }
};

// A numeric value together with warning/error bookkeeping carried out of
// cancellation-prone summations.
struct SumResult {
    double value = 0.0;
    double cancellation_error = 0.0;  // estimated absolute error
    bool cancellation_warning = false;
};

// Neumaier compensated accumulator.
class CompensatedSum {
public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
        abs_sum_ += std::abs(x);
    }
    double value() const { return sum_ + comp_; }
    double abs_sum() const { return abs_sum_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
    double abs_sum_ = 0.0;
};

inline double log_binomial(int n, int k) {
    if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// Exact for small arguments, falls back to exp(log) beyond.
inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    k = std::min(k, n - k);
    if (n <= 60) {
        double r = 1.0;
        for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
        return r;
    }
    return std::exp(log_binomial(n, k));
}

}  // namespace subpop
