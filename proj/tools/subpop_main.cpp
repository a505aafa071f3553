#include <algorithm>
#include <clocale>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <subpop/birth.hpp>
#include <subpop/birthdeath.hpp>
#include <subpop/death.hpp>
#include <subpop/mittag_leffler.hpp>
#include <subpop/montecarlo.hpp>

#include "runconfig.hpp"
#include "table.hpp"

namespace subpop::cli {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> sorted_times(const RunConfig& cfg) {
    std::vector<double> ts = cfg.times;
    std::sort(ts.begin(), ts.end());
    return ts;
}

std::vector<int> sorted_states(const RunConfig& cfg) {
    std::vector<int> ks = cfg.states.values();
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    return ks;
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

Table run_pmf(const RunConfig& cfg) {
    ProcessSpec proc = build_process(cfg.process);
    BernsteinFunction f = build_subordinator(cfg.subordinator);
    Table table;
    table.columns = {"t", "k", "probability", "abs_error_bound", "warnings"};
    for (double t : sorted_times(cfg)) {
        if (std::isinf(t)) throw ConfigError("pmf: times must be finite");
        for (int k : sorted_states(cfg)) {
            if (proc.kind == ProcessKind::Death && k > proc.n0) continue;
            double bound = kNaN;
            std::string warning;
            double p;
            if (proc.kind == ProcessKind::Death) {
                DeathSpec spec{proc.mu, proc.n0, proc.death_variant};
                SumResult res = death_pmf_checked(spec, f, t, k);
                p = res.value;
                bound = res.cancellation_error;
                if (res.cancellation_warning) warning = "cancellation";
            } else {
                p = analytic_subordinated_pmf(proc, f, t, k);
            }
            table.add_row({t, k, p, bound, warning});
        }
    }
    return table;
}

Table run_extinction(const RunConfig& cfg) {
    ProcessSpec proc = build_process(cfg.process);
    BernsteinFunction f = build_subordinator(cfg.subordinator);
    Table table;
    table.columns = {"t", "extinction_probability"};
    for (double t : sorted_times(cfg)) {
        if (std::isinf(t)) throw ConfigError("extinction: times must be finite");
        double p;
        switch (proc.kind) {
            case ProcessKind::Death:
                p = death_extinction({proc.mu, proc.n0, proc.death_variant}, f,
                                     t);
                break;
            case ProcessKind::BirthDeath:
                p = bd_extinction({proc.lambda, proc.mu, proc.n0}, f, t,
                                  cfg.series);
                break;
            default:
                p = 0.0;  // pure birth never goes extinct from n0 >= 1
                break;
        }
        table.add_row({t, p});
    }
    return table;
}

Table run_moments(const RunConfig& cfg) {
    ProcessSpec proc = build_process(cfg.process);
    BernsteinFunction f = build_subordinator(cfg.subordinator);
    bool yule = proc.kind == ProcessKind::Birth && !proc.birth_rates &&
                proc.n0 == 1;
    bool death = proc.kind == ProcessKind::Death;
    if (!yule && !death)
        throw ConfigError(
            "moments: closed moments exist for yule (n0=1, linear) and death "
            "processes only");
    Table table;
    table.columns = {"t", "r", "factorial_moment", "mean", "variance",
                     "status"};
    for (double t : sorted_times(cfg)) {
        if (std::isinf(t)) throw ConfigError("moments: times must be finite");
        for (int r : sorted_states(cfg)) {
            if (r < 1) continue;
            std::optional<double> fm, mean, var;
            if (yule) {
                fm = yule_factorial_moment(proc.lambda, f, t, r);
                mean = yule_mean(proc.lambda, f, t);
                var = yule_variance(proc.lambda, f, t);
            } else {
                DeathSpec spec{proc.mu, proc.n0, proc.death_variant};
                if (r > proc.n0) continue;
                if (proc.death_variant == DeathVariant::Linear) {
                    fm = death_factorial_moment(spec, f, t, r);
                    mean = death_mean(spec, f, t);
                    var = death_variance(spec, f, t);
                } else {
                    // the state space is finite, so the exact pmf sums give
                    // every moment of the sublinear variant
                    CompensatedSum facc, macc, sacc;
                    for (int k = 0; k <= proc.n0; ++k) {
                        double p = death_pmf(spec, f, t, k);
                        double falling = 1.0;
                        for (int j = 0; j < r; ++j) falling *= k - j;
                        facc.add(falling * p);
                        macc.add(k * p);
                        sacc.add(double(k) * k * p);
                    }
                    fm = facc.value();
                    mean = macc.value();
                    var = sacc.value() - macc.value() * macc.value();
                }
            }
            std::string status = fm.has_value() ? "FINITE" : "INFINITE";
            table.add_row({t, r, fm.value_or(kNaN), mean.value_or(kNaN),
                           var.value_or(kNaN), status});
        }
    }
    return table;
}

Table run_sojourn(const RunConfig& cfg) {
    ProcessSpec proc = build_process(cfg.process);
    BernsteinFunction f = build_subordinator(cfg.subordinator);
    if (proc.kind != ProcessKind::BirthDeath || proc.lambda != proc.mu)
        throw ConfigError(
            "sojourn: mean sojourn times need a birth_death process with "
            "lambda == mu");
    Table table;
    table.columns = {"k", "t", "mean", "lower_bound", "upper_bound"};
    for (double t : sorted_times(cfg)) {
        for (int k : sorted_states(cfg)) {
            if (k < 1) continue;
            double mean =
                mean_sojourn(proc.lambda, f, t, k, true, cfg.quadrature);
            // the quadrature route brackets the closed form within the
            // integration tolerances
            double check =
                mean_sojourn(proc.lambda, f, t, k, false, cfg.quadrature);
            double slack = cfg.quadrature.tolerance_abs +
                           cfg.quadrature.tolerance_rel * std::abs(check);
            table.add_row(
                {k, t, mean, check - slack, check + slack});
        }
    }
    return table;
}

Table run_explode(const RunConfig& cfg) {
    ProcessSpec proc = build_process(cfg.process);
    BernsteinFunction f = build_subordinator(cfg.subordinator);
    Table table;
    table.columns = {"t", "survival_mass", "truncation_bound",
                     "explosion_probability"};
    for (double t : sorted_times(cfg)) {
        if (std::isinf(t)) throw ConfigError("explode: times must be finite");
        MassEstimate mass;
        if (proc.kind == ProcessKind::Birth) {
            RateSchedule rates = build_schedule(cfg.process);
            RegularityDeclaration decl{cfg.process.regular,
                                       cfg.process.regularity_reason};
            mass = survival_mass(rates, decl, f, t);
        } else {
            // finite or downward-bounded state spaces cannot explode through
            // the chain; only subordinator killing removes mass
            mass = {std::exp(-f.kill_rate() * t), 0.0};
        }
        table.add_row({t, mass.value, mass.truncation_bound,
                       1.0 - mass.value});
    }
    return table;
}

// ---------------------------------------------------------------------------
// Simulation report
// ---------------------------------------------------------------------------

json report_to_json(const SimulationReport& report, const RunConfig& cfg) {
    json j;
    j["process"] = serialize_process(cfg.process);
    j["family"] = report.family;
    j["t"] = report.t;
    j["n_paths"] = report.n_paths;
    j["seed"] = {{"root", report.seed.root}, {"stream", report.seed.stream_id}};
    json pmf = json::array();
    for (const auto& [state, est] : report.empirical_pmf)
        pmf.push_back({{"state", state},
                       {"count", est.count},
                       {"freq", est.freq},
                       {"halfwidth", est.halfwidth}});
    j["empirical_pmf"] = pmf;
    j["killed_paths"] = report.killed_paths;
    j["cutoff_paths"] = report.cutoff_paths;
    j["killed_fraction"] = report.killed_fraction;
    j["cutoff_fraction"] = report.cutoff_fraction;
    j["extinction_fraction"] = report.extinction_fraction;
    j["mean"] = report.mean;
    j["variance"] = report.variance;
    json verdicts = json::array();
    for (const auto& v : report.verdicts)
        verdicts.push_back({{"state", v.state},
                            {"analytic", v.analytic},
                            {"freq", v.freq},
                            {"halfwidth", v.halfwidth},
                            {"pass", v.pass}});
    j["verdicts"] = verdicts;
    j["all_passed"] = report.all_passed;
    return j;
}

int run_simulate(const RunConfig& cfg, std::string& out) {
    if (cfg.subordinator.family == "custom")
        throw ConfigError("simulate: custom Levy measures are not samplable");
    if (cfg.times.size() != 1)
        throw ConfigError("simulate: exactly one time is required");
    ProcessSpec proc = build_process(cfg.process);
    BernsteinFunction f = build_subordinator(cfg.subordinator);
    std::function<double(int)> reference;
    if (cfg.reference_scale != 1.0) {
        double scale = cfg.reference_scale;
        reference = [proc, f, t = cfg.times[0], scale](int k) {
            return scale * analytic_subordinated_pmf(proc, f, t, k);
        };
    }
    SimulationReport report = estimate_subordinated_pmf(
        proc, f, cfg.times[0], cfg.paths, {cfg.seed_root, cfg.seed_stream},
        cfg.workers, reference, cfg.state_cutoff);
    out = report_to_json(report, cfg).dump(2) + "\n";
    return report.all_passed ? 0 : 4;
}

// ---------------------------------------------------------------------------
// Invariant suite
// ---------------------------------------------------------------------------

struct Invariant {
    std::string name;
    double residual = 0.0;
    double threshold = 0.0;
    bool relative = false;
};

std::vector<Invariant> invariant_suite() {
    std::vector<Invariant> rows;

    {
        // partial-fraction weights of distinct-rate schedules sum to zero
        SplitMix64 gen(12345);
        double worst = 0.0;
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> lam;
            int r = 1 + int(gen.next() % 5);
            int k = 1 + int(gen.next() % 8);
            for (int j = 0; j <= r + k + 1; ++j)
                lam.push_back(0.3 + 0.9 * j + 0.5 * gen.uniform());
            auto rates = RateSchedule::general(
                [lam](int j) { return lam[std::size_t(j)]; });
            worst = std::max(worst,
                             std::abs(vandermonde_residual(rates, r, k).value));
        }
        rows.push_back({"vandermonde_residual_max", worst, 1e-10, false});
    }

    {
        auto f = BernsteinFunction::gamma(1.0);
        double worst = 0.0;
        for (auto variant : {DeathVariant::Linear, DeathVariant::Sublinear}) {
            DeathSpec spec{1.0, 10, variant};
            CompensatedSum acc;
            for (int k = 0; k <= 10; ++k) acc.add(death_pmf(spec, f, 1.0, k));
            worst = std::max(worst, std::abs(acc.value() - 1.0));
        }
        rows.push_back({"death_normalization", worst, 1e-10, false});
    }

    {
        auto f = BernsteinFunction::gamma(3.0);
        CompensatedSum acc;
        for (int k = 1; k <= 400; ++k) acc.add(yule_pmf(1.0, f, 1.0, k));
        rows.push_back(
            {"yule_normalization", std::abs(acc.value() - 1.0), 1e-6, false});
    }

    {
        auto f = BernsteinFunction::stable(0.5);
        double worst = 0.0;
        double prev = death_extinction({1.0, 1, DeathVariant::Linear}, f, 1.0);
        for (int n0 = 2; n0 <= 20; ++n0) {
            double cur =
                death_extinction({1.0, n0, DeathVariant::Linear}, f, 1.0);
            worst = std::max(worst, cur - prev);
            prev = cur;
        }
        rows.push_back({"death_extinction_monotone", worst, 1e-14, false});
    }

    {
        auto f = BernsteinFunction::stable(0.5);
        double worst = 0.0;
        for (int n0 = 1; n0 <= 10; ++n0)
            worst = std::max(
                worst,
                std::abs(
                    death_extinction({1.0, n0, DeathVariant::Linear}, f, 1.0) -
                    death_extinction({1.0, n0, DeathVariant::Sublinear}, f,
                                     1.0)));
        rows.push_back({"death_variant_extinction_match", worst, 1e-12, false});
    }

    {
        auto f = BernsteinFunction::stable(0.5);
        double expect = std::tgamma(2.5);
        double got = first_jump_rate(1.0, f);
        rows.push_back({"first_jump_rate_stable",
                        std::abs(got - expect) / expect, 1e-6, true});
    }

    rows.push_back({"mittag_leffler_exponential",
                    std::abs(mittag_leffler(1.0, 2.0) - std::exp(-2.0)), 1e-12,
                    false});

    {
        auto f = BernsteinFunction::stable(0.5);
        double res = birth_master_equation_residual(RateSchedule::linear(1.0),
                                                    f, 1.0, 3);
        rows.push_back({"birth_master_equation", res, 1e-6, false});
    }

    {
        auto f = BernsteinFunction::stable(0.5);
        BDSpec unit{1.0, 1.0, 1};
        double worst = 0.0;
        for (int n = 0; n <= 4; ++n)
            worst = std::max(worst, std::abs(bd_transition(unit, f, 1.0, 1, n) -
                                             bd_pmf(unit, f, 1.0, n)));
        rows.push_back({"bd_transition_reduction", worst, 1e-8, false});
    }

    {
        auto f = BernsteinFunction::stable(0.5);
        BDSpec spec{1.0, 1.0, 1};
        double lo = 0.2, hi = 2.0;
        int n = 2000;
        double h = (hi - lo) / n;
        CompensatedSum acc;
        for (int i = 0; i <= n; ++i) {
            double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
            acc.add(w * extinction_time_density(1.0, f, lo + i * h));
        }
        double integral = acc.value() * h / 3.0;
        double increment =
            bd_extinction(spec, f, hi) - bd_extinction(spec, f, lo);
        rows.push_back({"extinction_density_consistency",
                        std::abs(integral - increment), 1e-8, false});
    }

    return rows;
}

int run_validate(std::optional<double> tol_abs, std::optional<double> tol_rel,
                 std::string& out, const std::string& format) {
    Table table;
    table.columns = {"name", "residual", "threshold", "pass"};
    bool all = true;
    for (Invariant row : invariant_suite()) {
        if (row.relative && tol_rel)
            row.threshold = std::min(row.threshold, *tol_rel);
        if (!row.relative && tol_abs)
            row.threshold = std::min(row.threshold, *tol_abs);
        bool pass = row.residual <= row.threshold;
        all = all && pass;
        table.add_row({row.name, row.residual, row.threshold, pass});
    }
    out = table.render(format);
    return all ? 0 : 4;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_output(const std::string& out_path, const std::string& payload) {
    if (out_path.empty()) {
        std::cout << payload;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw ConfigError("output: cannot open '" + out_path + "'");
    out << payload;
}

int run(int argc, char** argv) {
    CLI::App app{"laws of population processes at subordinated times"};
    app.require_subcommand(1);

    std::string config_path, out_path, format_flag;
    std::uint64_t seed_flag = 0;
    int paths_flag = 0;
    double tol_abs_flag = 0.0, tol_rel_flag = 0.0;

    std::vector<CLI::App*> subs;
    for (const char* name : {"pmf", "extinction", "moments", "sojourn",
                             "explode", "simulate", "validate"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "RunConfig JSON file");
        sub->add_option("--out", out_path, "output file (default stdout)");
        sub->add_option("--format", format_flag, "csv or json")
            ->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--seed", seed_flag, "override the seed root");
        sub->add_option("--paths", paths_flag, "override the path count");
        sub->add_option("--tol-abs", tol_abs_flag, "absolute tolerance");
        sub->add_option("--tol-rel", tol_rel_flag, "relative tolerance");
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    std::string cmd = sub->get_name();

    try {
        std::optional<double> tol_abs, tol_rel;
        if (sub->count("--tol-abs")) tol_abs = tol_abs_flag;
        if (sub->count("--tol-rel")) tol_rel = tol_rel_flag;

        if (cmd == "validate") {
            std::string payload;
            std::string format = format_flag.empty() ? "csv" : format_flag;
            int code = run_validate(tol_abs, tol_rel, payload, format);
            write_output(out_path, payload);
            return code;
        }

        if (config_path.empty())
            throw ConfigError(cmd + ": --config is required");
        RunConfig cfg = parse_config(read_file(config_path));
        if (!format_flag.empty()) cfg.output = format_flag;
        if (sub->count("--seed")) cfg.seed_root = seed_flag;
        if (sub->count("--paths")) {
            if (paths_flag < 1) throw ConfigError("config: paths must be >= 1");
            cfg.paths = paths_flag;
        }
        if (tol_abs) cfg.quadrature.tolerance_abs = *tol_abs;
        if (tol_rel) cfg.quadrature.tolerance_rel = *tol_rel;
        cfg.quadrature.validate();

        if (cmd == "simulate") {
            std::string payload;
            int code = run_simulate(cfg, payload);
            write_output(out_path, payload);
            return code;
        }

        Table table;
        if (cmd == "pmf")
            table = run_pmf(cfg);
        else if (cmd == "extinction")
            table = run_extinction(cfg);
        else if (cmd == "moments")
            table = run_moments(cfg);
        else if (cmd == "sojourn")
            table = run_sojourn(cfg);
        else
            table = run_explode(cfg);
        write_output(out_path, table.render(cfg.output));
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const PreconditionViolation& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace
}  // namespace subpop::cli

int main(int argc, char** argv) {
    std::setlocale(LC_ALL, "C");
    return subpop::cli::run(argc, argv);
}
