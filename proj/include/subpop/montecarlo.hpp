#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <subpop/bernstein.hpp>
#include <subpop/birth.hpp>
#include <subpop/birthdeath.hpp>
#include <subpop/death.hpp>

namespace subpop {

// ---------------------------------------------------------------------------
// Deterministic generator
// ---------------------------------------------------------------------------

struct Seed {
    std::uint64_t root = 0;
    std::uint64_t stream_id = 0;
};

// splitmix64 with hand-rolled transforms only, so identical seeds give
// identical draws on every platform (std:: distributions do not promise that)
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t s) : state_(s) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // uniform on the open interval (0,1)
    double uniform() {
        return (double(next() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    double exponential() { return -std::log(uniform()); }

    // Box-Muller without caching the sine companion, so the call sequence is
    // one draw per call
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

  private:
    std::uint64_t state_;
};

inline SplitMix64 make_generator(const Seed& seed) {
    SplitMix64 scramble(seed.root);
    std::uint64_t a = scramble.next();
    return SplitMix64(a ^ (seed.stream_id * 0xD1342543DE82EF95ull +
                           0x9E3779B97F4A7C15ull));
}

// ---------------------------------------------------------------------------
// Subordinator sampling
// ---------------------------------------------------------------------------

namespace detail {

// one-sided stable draw with E e^{-uX} = e^{-u^alpha} (Kanter's form)
inline double sample_standard_stable(double alpha, SplitMix64& gen) {
    double u = M_PI * gen.uniform();
    double w = gen.exponential();
    double ratio = (1.0 - alpha) / alpha;
    return std::sin(alpha * u) *
           std::pow(std::sin((1.0 - alpha) * u) / w, ratio) /
           std::pow(std::sin(u), 1.0 / alpha);
}

// Marsaglia-Tsang, extended below shape 1 by the boost U^{1/shape}
inline double sample_gamma(double shape, double rate, SplitMix64& gen) {
    double boost = 1.0;
    if (shape < 1.0) {
        boost = std::pow(gen.uniform(), 1.0 / shape);
        shape += 1.0;
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = gen.normal();
        double v = 1.0 + c * x;
        if (v <= 0.0) continue;
        v = v * v * v;
        double u = gen.uniform();
        if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v))
            return boost * d * v / rate;
    }
}

}  // namespace detail

// One draw of H^f(t).  A killed subordinator has been sent to +∞ by time t
// with probability 1 - e^{-a t}; that outcome is reported as nullopt.
inline std::optional<double> sample_subordinator(const BernsteinFunction& f,
                                                 double t, SplitMix64& gen) {
    if (!(t >= 0.0))
        throw PreconditionViolation("sample_subordinator: t must be >= 0");
    if (f.is_killed()) {
        if (gen.uniform() > std::exp(-f.kill_rate() * t)) return std::nullopt;
    }
    if (t == 0.0) return 0.0;
    switch (f.family()) {
        case BernsteinFamily::Stable:
            return std::pow(t, 1.0 / f.alpha()) *
                   detail::sample_standard_stable(f.alpha(), gen);
        case BernsteinFamily::Gamma:
            return detail::sample_gamma(t, f.gamma_a(), gen);
        case BernsteinFamily::TemperedStable: {
            // stable proposal thinned by e^{-theta X}; acceptance rate is
            // exactly e^{-t theta^alpha}
            double log_tries = t * std::pow(f.theta(), f.alpha());
            if (log_tries > std::log(1e4))
                throw TruncationFailure(
                    "sample_subordinator: tempered-stable rejection would need "
                    "more than 1e4 expected tries");
            double scale = std::pow(t, 1.0 / f.alpha());
            for (;;) {
                double x = scale * detail::sample_standard_stable(f.alpha(), gen);
                if (gen.uniform() < std::exp(-f.theta() * x)) return x;
            }
        }
        default:
            throw UnsupportedFamily(
                "sample_subordinator: custom Levy measures are not samplable");
    }
}

// ---------------------------------------------------------------------------
// Classical process simulation
// ---------------------------------------------------------------------------

enum class ProcessKind { Birth, Death, BirthDeath };

struct ProcessSpec {
    ProcessKind kind = ProcessKind::Birth;
    double lambda = 1.0;
    double mu = 1.0;
    int n0 = 1;
    DeathVariant death_variant = DeathVariant::Linear;
    // optional general birth schedule; linear lambda*k when absent
    std::function<double(int)> birth_rates;

    static ProcessSpec yule(double lambda, int n0 = 1) {
        ProcessSpec p;
        p.kind = ProcessKind::Birth;
        p.lambda = lambda;
        p.n0 = n0;
        return p;
    }
    static ProcessSpec birth(std::function<double(int)> rates, int n0 = 1) {
        ProcessSpec p;
        p.kind = ProcessKind::Birth;
        p.birth_rates = std::move(rates);
        p.n0 = n0;
        return p;
    }
    static ProcessSpec death(double mu, int n0,
                             DeathVariant variant = DeathVariant::Linear) {
        ProcessSpec p;
        p.kind = ProcessKind::Death;
        p.mu = mu;
        p.n0 = n0;
        p.death_variant = variant;
        return p;
    }
    static ProcessSpec birth_death(double lambda, double mu, int r0 = 1) {
        ProcessSpec p;
        p.kind = ProcessKind::BirthDeath;
        p.lambda = lambda;
        p.mu = mu;
        p.n0 = r0;
        return p;
    }

    void validate() const {
        if (n0 < 0) throw ConfigError("ProcessSpec: n0 must be >= 0");
        if (kind != ProcessKind::Birth || !birth_rates) {
            if (!(lambda > 0.0) && kind != ProcessKind::Death)
                throw ConfigError("ProcessSpec: lambda must be > 0");
        }
        if (kind != ProcessKind::Birth && !(mu > 0.0))
            throw ConfigError("ProcessSpec: mu must be > 0");
    }

    double birth_rate_at(int k) const {
        if (kind == ProcessKind::Death || k < 1) return 0.0;
        if (kind == ProcessKind::Birth && birth_rates) {
            double r = birth_rates(k);
            if (!(r > 0.0) || !std::isfinite(r))
                throw ConfigError("ProcessSpec: birth rate at k=" +
                                  std::to_string(k) + " must be positive");
            return r;
        }
        return lambda * k;
    }

    double death_rate_at(int k) const {
        if (kind == ProcessKind::Birth || k < 1) return 0.0;
        if (kind == ProcessKind::Death &&
            death_variant == DeathVariant::Sublinear)
            return mu * (n0 - k + 1);
        return mu * k;
    }
};

struct ClassicalDraw {
    int state = 0;
    bool hit_cutoff = false;
};

inline constexpr int kDefaultStateCutoff = 1000000;

// jump-chain simulation with exponential holding times and unit steps
inline ClassicalDraw sample_classical(const ProcessSpec& proc, double duration,
                                      SplitMix64& gen,
                                      int k_max = kDefaultStateCutoff) {
    proc.validate();
    if (!(duration >= 0.0) || !std::isfinite(duration))
        throw PreconditionViolation("sample_classical: duration must be finite");
    int k = proc.n0;
    double t = 0.0;
    for (;;) {
        if (k >= k_max) return {k_max, true};
        double b = proc.birth_rate_at(k);
        double d = proc.death_rate_at(k);
        double total = b + d;
        if (total <= 0.0) return {k, false};
        t += gen.exponential() / total;
        if (t > duration) return {k, false};
        if (gen.uniform() * total < b)
            ++k;
        else
            --k;
    }
}

// ---------------------------------------------------------------------------
// Composition estimator
// ---------------------------------------------------------------------------

// analytic pmf of the subordinated process named by the spec, used as the
// reference for statistical verdicts and by the CLI tables
inline double analytic_subordinated_pmf(const ProcessSpec& proc,
                                        const BernsteinFunction& f, double t,
                                        int k) {
    proc.validate();
    switch (proc.kind) {
        case ProcessKind::Birth:
            if (k < proc.n0) return 0.0;
            if (!proc.birth_rates && proc.n0 == 1)
                return yule_pmf(proc.lambda, f, t, k);
            return nonlinear_pmf(proc.birth_rates
                                     ? RateSchedule::general(proc.birth_rates)
                                     : RateSchedule::linear(proc.lambda),
                                 f, t, proc.n0, k);
        case ProcessKind::Death: {
            DeathSpec spec{proc.mu, proc.n0, proc.death_variant};
            return death_pmf(spec, f, t, k);
        }
        case ProcessKind::BirthDeath: {
            BDSpec spec{proc.lambda, proc.mu, proc.n0};
            if (proc.n0 == 1) return bd_pmf(spec, f, t, k);
            if (!spec.balanced())
                throw UnsupportedOrder(
                    "analytic_subordinated_pmf: multi-progenitor laws need "
                    "lambda == mu");
            BDSpec unit{proc.lambda, proc.mu, 1};
            return bd_transition(unit, f, t, proc.n0, k);
        }
    }
    throw ConfigError("analytic_subordinated_pmf: unknown process kind");
}

struct StateEstimate {
    std::int64_t count = 0;
    double freq = 0.0;
    double halfwidth = 0.0;  // 3 sigma binomial half width
};

struct StateVerdict {
    int state = 0;
    double analytic = 0.0;
    double freq = 0.0;
    double halfwidth = 0.0;
    bool pass = false;
};

struct SimulationReport {
    ProcessSpec process;
    std::string family;
    double t = 0.0;
    int n_paths = 0;
    Seed seed;
    std::map<int, StateEstimate> empirical_pmf;
    std::int64_t killed_paths = 0;    // subordinator sent to infinity
    std::int64_t cutoff_paths = 0;    // classical state cap reached
    double killed_fraction = 0.0;
    double cutoff_fraction = 0.0;
    double extinction_fraction = 0.0;
    double mean = 0.0;      // over finite, uncapped paths
    double variance = 0.0;
    std::vector<StateVerdict> verdicts;
    bool all_passed = true;
    double wall_clock_seconds = 0.0;  // never serialized; timing only
};

inline std::string family_label(const BernsteinFunction& f) {
    std::string base;
    switch (f.family()) {
        case BernsteinFamily::Stable:
            base = "stable(" + std::to_string(f.alpha()) + ")";
            break;
        case BernsteinFamily::TemperedStable:
            base = "tempered_stable(" + std::to_string(f.alpha()) + "," +
                   std::to_string(f.theta()) + ")";
            break;
        case BernsteinFamily::Gamma:
            base = "gamma(" + std::to_string(f.gamma_a()) + ")";
            break;
        default:
            base = "custom";
            break;
    }
    if (f.is_killed())
        base += "+kill(" + std::to_string(f.kill_rate()) + ")";
    return base;
}

// Samples n_paths of the subordinated process by composition: draw H^f(t),
// then run the classical process for that duration.  Path i always uses the
// substream (root, stream_id + 1 + i), so the aggregate is byte-identical
// for every worker count.
inline SimulationReport estimate_subordinated_pmf(
    const ProcessSpec& proc, const BernsteinFunction& f, double t, int n_paths,
    const Seed& seed, int n_workers = 1,
    const std::function<double(int)>& analytic_override = {},
    int k_max = kDefaultStateCutoff) {
    proc.validate();
    if (n_paths < 1000)
        throw PreconditionViolation(
            "estimate_subordinated_pmf: need at least 1000 paths");
    if (n_workers < 1) n_workers = 1;
    auto start = std::chrono::steady_clock::now();

    struct Tally {
        std::map<int, std::int64_t> counts;
        std::int64_t killed = 0;
        std::int64_t cutoff = 0;
    };
    std::vector<Tally> tallies(n_workers);
    auto run_chunk = [&](int worker, int lo, int hi) {
        Tally& tally = tallies[worker];
        for (int i = lo; i < hi; ++i) {
            Seed path_seed{seed.root,
                           seed.stream_id + 1 + std::uint64_t(i)};
            SplitMix64 gen = make_generator(path_seed);
            auto h = sample_subordinator(f, t, gen);
            if (!h.has_value()) {
                ++tally.killed;
                continue;
            }
            ClassicalDraw draw = sample_classical(proc, *h, gen, k_max);
            if (draw.hit_cutoff)
                ++tally.cutoff;
            else
                ++tally.counts[draw.state];
        }
    };
    if (n_workers == 1) {
        run_chunk(0, 0, n_paths);
    } else {
        std::vector<std::thread> threads;
        int chunk = (n_paths + n_workers - 1) / n_workers;
        for (int w = 0; w < n_workers; ++w) {
            int lo = w * chunk;
            int hi = std::min(n_paths, lo + chunk);
            if (lo >= hi) break;
            threads.emplace_back(run_chunk, w, lo, hi);
        }
        for (auto& th : threads) th.join();
    }

    SimulationReport report;
    report.process = proc;
    report.family = family_label(f);
    report.t = t;
    report.n_paths = n_paths;
    report.seed = seed;
    std::map<int, std::int64_t> counts;
    for (const auto& tally : tallies) {
        report.killed_paths += tally.killed;
        report.cutoff_paths += tally.cutoff;
        for (auto [state, c] : tally.counts) counts[state] += c;
    }
    double n = double(n_paths);
    report.killed_fraction = double(report.killed_paths) / n;
    report.cutoff_fraction = double(report.cutoff_paths) / n;
    CompensatedSum mean_acc;
    CompensatedSum sq_acc;
    for (auto [state, c] : counts) {
        StateEstimate est;
        est.count = c;
        est.freq = double(c) / n;
        est.halfwidth = 3.0 * std::sqrt(est.freq * (1.0 - est.freq) / n);
        report.empirical_pmf[state] = est;
        mean_acc.add(est.freq * state);
        sq_acc.add(est.freq * double(state) * double(state));
    }
    if (counts.count(0))
        report.extinction_fraction = double(counts.at(0)) / n;
    report.mean = mean_acc.value();
    report.variance = sq_acc.value() - report.mean * report.mean;

    double min_freq = std::max(1e-4, 10.0 / n);
    for (const auto& [state, est] : report.empirical_pmf) {
        if (est.freq <= min_freq) continue;
        double analytic;
        try {
            analytic = analytic_override
                           ? analytic_override(state)
                           : analytic_subordinated_pmf(proc, f, t, state);
        } catch (const std::runtime_error&) {
            continue;  // state out of reach of the analytic route
        }
        StateVerdict v;
        v.state = state;
        v.analytic = analytic;
        v.freq = est.freq;
        v.halfwidth = est.halfwidth;
        v.pass = std::abs(est.freq - analytic) <= est.halfwidth;
        report.all_passed = report.all_passed && v.pass;
        report.verdicts.push_back(v);
    }
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    return report;
}

// ---------------------------------------------------------------------------
// Holding times of the subordinated chain
// ---------------------------------------------------------------------------

struct HoldingTimeSample {
    std::vector<double> draws;
    double grid_step = 0.0;
    double bias_bound = 0.0;  // each draw overstates the true time by <= this
};

// Draws of the time the subordinated process spends in state r before its
// first jump.  The classical first-jump clock tau is exponential with the
// total classical rate; the subordinated holding time is the first passage
// of H^f above tau, located on a grid that is refined until the empirical
// mean settles to 0.1%.
inline HoldingTimeSample sample_holding_times(const ProcessSpec& proc,
                                              const BernsteinFunction& f, int r,
                                              int n, const Seed& seed) {
    proc.validate();
    if (r < 1)
        throw PreconditionViolation("sample_holding_times: r must be >= 1");
    if (n < 1)
        throw PreconditionViolation("sample_holding_times: n must be >= 1");
    if (f.family() == BernsteinFamily::Custom)
        throw UnsupportedFamily(
            "sample_holding_times: custom Levy measures are not samplable");
    double total_rate = proc.birth_rate_at(r) + proc.death_rate_at(r);
    if (!(total_rate > 0.0))
        throw PreconditionViolation(
            "sample_holding_times: state r is absorbing");

    auto sample_at_step = [&](double step, std::uint64_t stream) {
        std::vector<double> draws(n);
        for (int i = 0; i < n; ++i) {
            SplitMix64 gen =
                make_generator({seed.root, stream + std::uint64_t(i)});
            double tau = gen.exponential() / total_rate;
            double h = 0.0;
            int steps = 0;
            while (h <= tau) {
                auto inc = sample_subordinator(f, step, gen);
                ++steps;
                if (!inc.has_value()) break;  // killed clock passes instantly
                h += *inc;
            }
            draws[i] = steps * step;
        }
        return draws;
    };

    // the recorded crossing exceeds the true passage time by at most one
    // step, so the mean shifts by less than the step itself; halving until
    // the step falls to 0.1% of the running mean bounds the bias directly
    double step = 0.1 / f.value(total_rate);
    std::uint64_t stream = seed.stream_id + 1;
    auto mean_of = [](const std::vector<double>& v) {
        CompensatedSum acc;
        for (double x : v) acc.add(x);
        return acc.value() / double(v.size());
    };
    std::vector<double> draws = sample_at_step(step, stream);
    double mean = mean_of(draws);
    const int max_halvings = 20;
    for (int iter = 0; iter < max_halvings && step > 1e-3 * mean; ++iter) {
        step /= 2.0;
        stream += std::uint64_t(n);
        draws = sample_at_step(step, stream);
        mean = mean_of(draws);
    }
    if (!(step <= 0.01 * mean))
        throw GridTooCoarse(
            "sample_holding_times: grid bias bound above 1% of the mean");
    return {std::move(draws), step, step};
}

}  // namespace subpop
