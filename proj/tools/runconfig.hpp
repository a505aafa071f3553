#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include <subpop/expr.hpp>
#include <subpop/montecarlo.hpp>

namespace subpop::cli {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Config document
// ---------------------------------------------------------------------------

struct ProcessConfig {
    std::string kind = "yule";  // yule | birth | death | birth_death
    double lambda = 1.0;
    double mu = 1.0;
    int n0 = 1;
    std::string variant = "linear";  // death only: linear | sublinear
    std::string rates;               // birth only: rate expression in s = state
    bool regular = true;             // birth only: sum of 1/rates diverges
    std::string regularity_reason;
};

struct SubordinatorConfig {
    std::string family = "stable";  // stable | tempered_stable | gamma | custom
    double alpha = 0.5;
    double theta = 1.0;
    double a = 1.0;
    double kill_rate = 0.0;
    std::string density;  // custom only: Levy density expression in s
    double singularity_order = 0.0;
    double tail_rate = 0.0;
};

struct StateSelection {
    bool is_range = true;
    int from = 0;
    int to = 10;
    std::vector<int> list;

    std::vector<int> values() const {
        if (!is_range) return list;
        std::vector<int> out;
        for (int k = from; k <= to; ++k) out.push_back(k);
        return out;
    }
};

struct RunConfig {
    ProcessConfig process;
    SubordinatorConfig subordinator;
    std::vector<double> times{1.0};
    StateSelection states;
    std::string output = "csv";  // csv | json
    std::uint64_t seed_root = 1;
    std::uint64_t seed_stream = 0;
    int paths = 100000;
    int workers = 1;
    int state_cutoff = kDefaultStateCutoff;
    double reference_scale = 1.0;  // test hook: scales the analytic reference
    QuadratureSpec quadrature;
    SeriesTruncation series;
};

// ---------------------------------------------------------------------------
// Parsing; every object rejects keys it does not define
// ---------------------------------------------------------------------------

namespace detail {

inline void reject_unknown(const json& j, const char* where,
                           std::initializer_list<const char*> allowed) {
    if (!j.is_object())
        throw ConfigError(std::string(where) + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* key : allowed) known = known || it.key() == key;
        if (!known)
            throw ConfigError(std::string(where) + ": unknown key '" +
                              it.key() + "'");
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline ProcessConfig parse_process(const json& j) {
    detail::reject_unknown(j, "process",
                           {"kind", "lambda", "mu", "n0", "variant", "rates",
                            "regular", "regularity_reason"});
    ProcessConfig p;
    detail::read(j, "kind", p.kind);
    detail::read(j, "lambda", p.lambda);
    detail::read(j, "mu", p.mu);
    detail::read(j, "n0", p.n0);
    detail::read(j, "variant", p.variant);
    detail::read(j, "rates", p.rates);
    detail::read(j, "regular", p.regular);
    detail::read(j, "regularity_reason", p.regularity_reason);
    if (p.kind != "yule" && p.kind != "birth" && p.kind != "death" &&
        p.kind != "birth_death")
        throw ConfigError("process: unknown kind '" + p.kind + "'");
    if (p.variant != "linear" && p.variant != "sublinear")
        throw ConfigError("process: unknown variant '" + p.variant + "'");
    if (!p.rates.empty() && p.kind != "birth")
        throw ConfigError("process: rates expression needs kind birth");
    return p;
}

inline SubordinatorConfig parse_subordinator(const json& j) {
    detail::reject_unknown(j, "subordinator",
                           {"family", "alpha", "theta", "a", "kill_rate",
                            "density", "singularity_order", "tail_rate"});
    SubordinatorConfig s;
    detail::read(j, "family", s.family);
    detail::read(j, "alpha", s.alpha);
    detail::read(j, "theta", s.theta);
    detail::read(j, "a", s.a);
    detail::read(j, "kill_rate", s.kill_rate);
    detail::read(j, "density", s.density);
    detail::read(j, "singularity_order", s.singularity_order);
    detail::read(j, "tail_rate", s.tail_rate);
    if (s.family != "stable" && s.family != "tempered_stable" &&
        s.family != "gamma" && s.family != "custom")
        throw ConfigError("subordinator: unknown family '" + s.family + "'");
    if (s.family == "custom" && s.density.empty())
        throw ConfigError("subordinator: custom family needs a density");
    return s;
}

inline StateSelection parse_states(const json& j) {
    StateSelection sel;
    if (j.is_array()) {
        sel.is_range = false;
        for (const auto& v : j) {
            int k = v.get<int>();
            if (k < 0) throw ConfigError("states: entries must be >= 0");
            sel.list.push_back(k);
        }
        return sel;
    }
    detail::reject_unknown(j, "states", {"from", "to"});
    detail::read(j, "from", sel.from);
    detail::read(j, "to", sel.to);
    if (sel.from < 0 || sel.to < sel.from)
        throw ConfigError("states: need 0 <= from <= to");
    return sel;
}

inline std::vector<double> parse_times(const json& j) {
    if (!j.is_array()) throw ConfigError("times: expected an array");
    std::vector<double> out;
    for (const auto& v : j) {
        double t;
        if (v.is_string()) {
            if (v.get<std::string>() != "inf")
                throw ConfigError("times: only the string 'inf' is accepted");
            t = kInfiniteTime;
        } else {
            t = v.get<double>();
        }
        if (!(t >= 0.0)) throw ConfigError("times: entries must be >= 0");
        out.push_back(t);
    }
    if (out.empty()) throw ConfigError("times: must not be empty");
    return out;
}

inline RunConfig parse_config_doc(const json& j) {
    detail::reject_unknown(
        j, "config",
        {"process", "subordinator", "times", "states", "output", "seed",
         "paths", "workers", "state_cutoff", "reference_scale", "tolerances"});
    RunConfig cfg;
    if (!j.contains("process")) throw ConfigError("config: missing 'process'");
    if (!j.contains("subordinator"))
        throw ConfigError("config: missing 'subordinator'");
    cfg.process = parse_process(j.at("process"));
    cfg.subordinator = parse_subordinator(j.at("subordinator"));
    if (j.contains("times")) cfg.times = parse_times(j.at("times"));
    if (j.contains("states")) cfg.states = parse_states(j.at("states"));
    detail::read(j, "output", cfg.output);
    if (cfg.output != "csv" && cfg.output != "json")
        throw ConfigError("config: output must be csv or json");
    if (j.contains("seed")) {
        const json& s = j.at("seed");
        detail::reject_unknown(s, "seed", {"root", "stream"});
        detail::read(s, "root", cfg.seed_root);
        detail::read(s, "stream", cfg.seed_stream);
    }
    detail::read(j, "paths", cfg.paths);
    detail::read(j, "workers", cfg.workers);
    detail::read(j, "state_cutoff", cfg.state_cutoff);
    detail::read(j, "reference_scale", cfg.reference_scale);
    if (cfg.paths < 1) throw ConfigError("config: paths must be >= 1");
    if (cfg.workers < 1) throw ConfigError("config: workers must be >= 1");
    if (cfg.state_cutoff < 1)
        throw ConfigError("config: state_cutoff must be >= 1");
    if (j.contains("tolerances")) {
        const json& tol = j.at("tolerances");
        detail::reject_unknown(tol, "tolerances", {"quadrature", "series"});
        if (tol.contains("quadrature")) {
            const json& q = tol.at("quadrature");
            detail::reject_unknown(q, "tolerances.quadrature",
                                   {"node_count", "tolerance_abs",
                                    "tolerance_rel", "max_refinements"});
            detail::read(q, "node_count", cfg.quadrature.node_count);
            detail::read(q, "tolerance_abs", cfg.quadrature.tolerance_abs);
            detail::read(q, "tolerance_rel", cfg.quadrature.tolerance_rel);
            detail::read(q, "max_refinements", cfg.quadrature.max_refinements);
        }
        if (tol.contains("series")) {
            const json& s = tol.at("series");
            detail::reject_unknown(s, "tolerances.series",
                                   {"epsilon", "min_terms", "max_terms"});
            detail::read(s, "epsilon", cfg.series.epsilon);
            detail::read(s, "min_terms", cfg.series.min_terms);
            detail::read(s, "max_terms", cfg.series.max_terms);
        }
        cfg.quadrature.validate();
        cfg.series.validate();
    }
    return cfg;
}

inline RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    try {
        return parse_config_doc(j);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Canonical serialization; parse(serialize(cfg)) reproduces cfg exactly
// ---------------------------------------------------------------------------

inline json serialize_process(const ProcessConfig& p) {
    json j;
    j["kind"] = p.kind;
    bool scheduled = p.kind == "birth" && !p.rates.empty();
    if (!scheduled && p.kind != "death") j["lambda"] = p.lambda;
    if (p.kind == "death" || p.kind == "birth_death") j["mu"] = p.mu;
    j["n0"] = p.n0;
    if (p.kind == "death") j["variant"] = p.variant;
    if (scheduled) {
        j["rates"] = p.rates;
        j["regular"] = p.regular;
        j["regularity_reason"] = p.regularity_reason;
    }
    return j;
}

inline json serialize_subordinator(const SubordinatorConfig& s) {
    json j;
    j["family"] = s.family;
    if (s.family == "stable" || s.family == "tempered_stable")
        j["alpha"] = s.alpha;
    if (s.family == "tempered_stable") j["theta"] = s.theta;
    if (s.family == "gamma") j["a"] = s.a;
    if (s.family == "custom") {
        j["density"] = s.density;
        j["singularity_order"] = s.singularity_order;
        j["tail_rate"] = s.tail_rate;
    }
    if (s.kill_rate > 0.0) j["kill_rate"] = s.kill_rate;
    return j;
}

inline json serialize_config(const RunConfig& cfg) {
    json j;
    j["process"] = serialize_process(cfg.process);
    j["subordinator"] = serialize_subordinator(cfg.subordinator);
    json times = json::array();
    for (double t : cfg.times) {
        if (std::isinf(t))
            times.push_back("inf");
        else
            times.push_back(t);
    }
    j["times"] = times;
    if (cfg.states.is_range)
        j["states"] = {{"from", cfg.states.from}, {"to", cfg.states.to}};
    else
        j["states"] = cfg.states.list;
    j["output"] = cfg.output;
    j["seed"] = {{"root", cfg.seed_root}, {"stream", cfg.seed_stream}};
    j["paths"] = cfg.paths;
    j["workers"] = cfg.workers;
    j["state_cutoff"] = cfg.state_cutoff;
    j["reference_scale"] = cfg.reference_scale;
    j["tolerances"] = {
        {"quadrature",
         {{"node_count", cfg.quadrature.node_count},
          {"tolerance_abs", cfg.quadrature.tolerance_abs},
          {"tolerance_rel", cfg.quadrature.tolerance_rel},
          {"max_refinements", cfg.quadrature.max_refinements}}},
        {"series",
         {{"epsilon", cfg.series.epsilon},
          {"min_terms", cfg.series.min_terms},
          {"max_terms", cfg.series.max_terms}}}};
    return j;
}

// ---------------------------------------------------------------------------
// Library object construction
// ---------------------------------------------------------------------------

inline BernsteinFunction build_subordinator(const SubordinatorConfig& s) {
    BernsteinFunction f = [&] {
        if (s.family == "stable") return BernsteinFunction::stable(s.alpha);
        if (s.family == "tempered_stable")
            return BernsteinFunction::tempered_stable(s.alpha, s.theta);
        if (s.family == "gamma") return BernsteinFunction::gamma(s.a);
        auto expr = std::make_shared<DensityExpression>(s.density);
        LevyMeasure m{[expr](double x) { return (*expr)(x); },
                      s.singularity_order, s.tail_rate};
        return BernsteinFunction::custom(m);
    }();
    if (s.kill_rate > 0.0)
        f = BernsteinFunction::killed(std::move(f), s.kill_rate);
    return f;
}

inline ProcessSpec build_process(const ProcessConfig& p) {
    if (p.kind == "yule") return ProcessSpec::yule(p.lambda, p.n0);
    if (p.kind == "death")
        return ProcessSpec::death(p.mu, p.n0,
                                  p.variant == "sublinear"
                                      ? DeathVariant::Sublinear
                                      : DeathVariant::Linear);
    if (p.kind == "birth_death")
        return ProcessSpec::birth_death(p.lambda, p.mu, p.n0);
    if (p.rates.empty()) return ProcessSpec::yule(p.lambda, p.n0);
    auto expr = std::make_shared<DensityExpression>(p.rates);
    return ProcessSpec::birth([expr](int k) { return (*expr)(double(k)); },
                              p.n0);
}

inline RateSchedule build_schedule(const ProcessConfig& p) {
    if (p.kind != "birth" && p.kind != "yule")
        throw ConfigError("config: a rate schedule needs a birth process");
    if (p.rates.empty()) return RateSchedule::linear(p.lambda);
    auto expr = std::make_shared<DensityExpression>(p.rates);
    return RateSchedule::general(
        [expr](int k) { return (*expr)(double(k)); });
}

}  // namespace subpop::cli
