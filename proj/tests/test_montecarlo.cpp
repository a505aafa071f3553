#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <subpop/montecarlo.hpp>

#include "oracles.hpp"

using namespace subpop;

namespace {

struct Audit {
    double mean;
    double sigma;  // standard error of the mean
};

template <typename Fn>
Audit sample_mean(int n, Fn&& draw) {
    CompensatedSum acc, sq;
    for (int i = 0; i < n; ++i) {
        double x = draw(i);
        acc.add(x);
        sq.add(x * x);
    }
    double mean = acc.value() / n;
    double var = sq.value() / n - mean * mean;
    return {mean, std::sqrt(std::max(var, 0.0) / n)};
}

void laplace_audit(const BernsteinFunction& f, double t, int n) {
    for (double u : {0.5, 1.0, 2.0}) {
        auto audit = sample_mean(n, [&](int i) {
            SplitMix64 gen = make_generator({77, std::uint64_t(i)});
            auto h = sample_subordinator(f, t, gen);
            REQUIRE(h.has_value());
            return std::exp(-u * *h);
        });
        double expect = std::exp(-t * f.value(u));
        CHECK(std::abs(audit.mean - expect) <= 3.0 * audit.sigma);
    }
}

}  // namespace

TEST_CASE("generator determinism and stream separation") {
    SplitMix64 a = make_generator({42, 7});
    SplitMix64 b = make_generator({42, 7});
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
    SplitMix64 c = make_generator({42, 8});
    bool differs = false;
    for (int i = 0; i < 10; ++i) differs = differs || (b.next() != c.next());
    CHECK(differs);
    SplitMix64 u = make_generator({1, 1});
    for (int i = 0; i < 1000; ++i) {
        double x = u.uniform();
        CHECK(x > 0.0);
        CHECK(x < 1.0);
    }
}

TEST_CASE("subordinator samplers pass the Laplace-transform audit") {
    laplace_audit(BernsteinFunction::stable(0.5), 1.0, 1000000);
    laplace_audit(BernsteinFunction::stable(0.7), 0.8, 1000000);
    laplace_audit(BernsteinFunction::gamma(1.0), 2.0, 1000000);
    laplace_audit(BernsteinFunction::tempered_stable(0.6, 1.5), 1.0, 200000);
}

TEST_CASE("gamma subordinator marginal moments") {
    auto f = BernsteinFunction::gamma(1.0);
    auto audit = sample_mean(400000, [&](int i) {
        SplitMix64 gen = make_generator({5, std::uint64_t(i)});
        return *sample_subordinator(f, 2.0, gen);
    });
    CHECK(std::abs(audit.mean - 2.0) <= 3.0 * audit.sigma);
}

TEST_CASE("killed subordinators report the explosion symbol") {
    auto f = BernsteinFunction::killed(BernsteinFunction::stable(0.5), 1.0);
    int n = 200000, killed = 0;
    for (int i = 0; i < n; ++i) {
        SplitMix64 gen = make_generator({9, std::uint64_t(i)});
        if (!sample_subordinator(f, 1.0, gen).has_value()) ++killed;
    }
    double frac = double(killed) / n;
    double expect = -std::expm1(-1.0);
    CHECK(std::abs(frac - expect) <=
          3.0 * std::sqrt(expect * (1.0 - expect) / n));

    // short horizons are almost never killed
    int early = 0;
    for (int i = 0; i < 20000; ++i) {
        SplitMix64 gen = make_generator({10, std::uint64_t(i)});
        if (!sample_subordinator(f, 1e-4, gen).has_value()) ++early;
    }
    CHECK(early <= 10);
}

TEST_CASE("tempered rejection refuses infeasible parameters") {
    auto f = BernsteinFunction::tempered_stable(0.5, 4.0);
    SplitMix64 gen = make_generator({1, 1});
    // expected tries e^{t theta^alpha} = e^{40}
    CHECK_THROWS_AS(sample_subordinator(f, 20.0, gen), TruncationFailure);
    auto custom = BernsteinFunction::custom(
        LevyMeasure{[](double s) { return std::exp(-s); }, 0.0, 1.0});
    CHECK_THROWS_AS(sample_subordinator(custom, 1.0, gen), UnsupportedFamily);
}

TEST_CASE("classical simulation matches closed-form laws") {
    auto yule = ProcessSpec::yule(1.0);
    SplitMix64 gen = make_generator({3, 0});
    CHECK(sample_classical(yule, 0.0, gen).state == 1);

    // Yule at s=1 is geometric with p = e^{-1}; chi-square over 10 bins plus
    // the tail, critical value 23.2 at the 0.01 level for 10 degrees
    const int n = 100000;
    std::vector<int> counts(12, 0);
    for (int i = 0; i < n; ++i) {
        SplitMix64 g = make_generator({3, 1 + std::uint64_t(i)});
        int k = sample_classical(yule, 1.0, g).state;
        counts[std::min(k, 11)] += 1;
    }
    double p = std::exp(-1.0);
    double chi2 = 0.0;
    double tail_prob = 1.0;
    for (int k = 1; k <= 10; ++k) {
        double pk = p * std::pow(1.0 - p, k - 1.0);
        tail_prob -= pk;
        double expect = n * pk;
        chi2 += (counts[k] - expect) * (counts[k] - expect) / expect;
    }
    double expect_tail = n * tail_prob;
    chi2 += (counts[11] - expect_tail) * (counts[11] - expect_tail) / expect_tail;
    CHECK(chi2 < 23.2);

    // linear death mean n0 e^{-mu s}
    auto death = ProcessSpec::death(1.0, 5);
    auto audit = sample_mean(100000, [&](int i) {
        SplitMix64 g = make_generator({4, std::uint64_t(i)});
        return double(sample_classical(death, 1.0, g).state);
    });
    CHECK(std::abs(audit.mean - 5.0 * std::exp(-1.0)) <= 3.0 * audit.sigma);
}

TEST_CASE("composition estimator validates against the analytic laws") {
    auto f = BernsteinFunction::stable(0.5);
    auto proc = ProcessSpec::yule(1.0);
    // explosive paths only need to be identified, not chased to the default
    // cutoff, so a smaller cap keeps the run short
    const int cap = 50000;
    auto report =
        estimate_subordinated_pmf(proc, f, 1.0, 20000, {11, 0}, 1, {}, cap);
    CHECK(report.all_passed);
    CHECK_FALSE(report.verdicts.empty());
    std::int64_t total = report.killed_paths + report.cutoff_paths;
    for (const auto& [state, est] : report.empirical_pmf) total += est.count;
    CHECK(total == report.n_paths);

    // the same paths split over four workers give the same report
    auto report4 =
        estimate_subordinated_pmf(proc, f, 1.0, 20000, {11, 0}, 4, {}, cap);
    CHECK(report4.empirical_pmf.size() == report.empirical_pmf.size());
    for (const auto& [state, est] : report.empirical_pmf)
        CHECK(report4.empirical_pmf.at(state).count == est.count);
    CHECK(report4.killed_paths == report.killed_paths);
    CHECK(report4.cutoff_paths == report.cutoff_paths);

    // a deliberately wrong reference must be caught
    auto wrong = estimate_subordinated_pmf(
        proc, f, 1.0, 20000, {11, 0}, 1,
        [&](int k) { return 1.1 * yule_pmf(1.0, f, 1.0, k); }, cap);
    CHECK_FALSE(wrong.all_passed);
}

TEST_CASE("composition estimator covers death and birth-death processes") {
    auto f = BernsteinFunction::gamma(1.0);
    auto death = ProcessSpec::death(1.0, 5, DeathVariant::Sublinear);
    auto rd = estimate_subordinated_pmf(death, f, 1.0, 20000, {13, 0}, 2);
    CHECK(rd.all_passed);
    CHECK(rd.extinction_fraction > 0.0);

    auto bd = ProcessSpec::birth_death(1.0, 1.0);
    auto rb = estimate_subordinated_pmf(bd, BernsteinFunction::stable(0.5), 1.0,
                                        20000, {14, 0}, 2);
    CHECK(rb.all_passed);

    // t=0 keeps all mass at the initial state
    auto r0 = estimate_subordinated_pmf(death, f, 0.0, 1000, {15, 0}, 1);
    CHECK(r0.empirical_pmf.at(5).count == 1000);
}

TEST_CASE("killed subordinated paths land in the infinite bucket") {
    auto f = BernsteinFunction::killed(BernsteinFunction::gamma(1.0), 0.5);
    auto proc = ProcessSpec::death(1.0, 3);
    double t = 1.0;
    auto report = estimate_subordinated_pmf(proc, f, t, 50000, {16, 0}, 2);
    double expect = -std::expm1(-0.5 * t);
    double hw = 3.0 * std::sqrt(expect * (1.0 - expect) / 50000.0);
    CHECK(std::abs(report.killed_fraction - expect) <= hw);
}

TEST_CASE("holding times in a state are exponential with rate f(rate)") {
    auto f = BernsteinFunction::stable(0.5);
    auto proc = ProcessSpec::yule(1.0);
    auto sample = sample_holding_times(proc, f, 1, 2000, {21, 0});
    REQUIRE(sample.draws.size() == 2000);
    CHECK(sample.bias_bound > 0.0);

    double rate = f.value(1.0);
    auto audit = sample_mean(2000, [&](int i) { return sample.draws[i]; });
    CHECK(std::abs(audit.mean - 1.0 / rate) <=
          3.0 * audit.sigma + sample.bias_bound);

    // Kolmogorov-Smirnov against Exp(rate), 0.01 level, with an allowance for
    // the grid discretization of the draws
    std::vector<double> sorted = sample.draws;
    std::sort(sorted.begin(), sorted.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        double cdf = -std::expm1(-rate * sorted[i]);
        double lo = double(i) / sorted.size();
        double hi = double(i + 1) / sorted.size();
        ks = std::max({ks, std::abs(cdf - lo), std::abs(cdf - hi)});
    }
    double critical = 1.63 / std::sqrt(double(sorted.size()));
    CHECK(ks <= critical + rate * sample.grid_step);

    // faster states hold for less time
    auto s4 = sample_holding_times(proc, f, 4, 500, {22, 0});
    auto s16 = sample_holding_times(proc, f, 16, 500, {23, 0});
    auto m4 = sample_mean(500, [&](int i) { return s4.draws[i]; });
    auto m16 = sample_mean(500, [&](int i) { return s16.draws[i]; });
    CHECK(audit.mean > m4.mean);
    CHECK(m4.mean > m16.mean);
}
