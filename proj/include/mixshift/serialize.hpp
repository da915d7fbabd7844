#pragma once

// JSON encodings for schemas, policies, learner rosters, structural models
// and result records. Readers are strict: unknown keys are rejected.

#include "mixshift/dataset.hpp"
#include "mixshift/density.hpp"
#include "mixshift/estimators.hpp"
#include "mixshift/hull.hpp"
#include "mixshift/inference.hpp"
#include "mixshift/learners.hpp"
#include "mixshift/policy.hpp"
#include "mixshift/simulate.hpp"

#include <nlohmann/json.hpp>

#include <set>
#include <string>
#include <vector>

namespace mixshift {

using json = nlohmann::json;

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <typename T>
T get_as(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + " is missing '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + ": '" + key + "' has the wrong type");
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
    return j.contains(key) ? get_as<T>(j, key, where) : fallback;
}

inline json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace detail

// ============================================================================
// Schema
// ============================================================================

inline json to_json(const Schema& s) {
    json j;
    if (s.layout == Schema::Layout::long_format) {
        j = {{"layout", "long"}, {"id", s.id}, {"time", s.time}, {"outcome", s.outcome},
             {"covariates", s.covariates}, {"exposures", s.exposures}};
        if (!s.censoring.empty()) j["censoring"] = s.censoring;
    } else {
        j = {{"layout", "wide"}, {"outcome", s.outcome}, {"covariates", s.wide_covariates}, {"exposures", s.wide_exposures}};
        if (!s.id.empty()) j["id"] = s.id;
        if (!s.wide_censoring.empty()) j["censoring"] = s.wide_censoring;
        if (!s.exposure_names.empty()) j["exposure_names"] = s.exposure_names;
    }
    return j;
}

inline Schema schema_from_json(const json& j) {
    using detail::get_as;
    using detail::get_or;
    const std::string where = "schema";
    const auto layout = get_or<std::string>(j, "layout", "long", where);
    Schema s;
    if (layout == "long") {
        detail::check_keys(j, {"layout", "id", "time", "outcome", "censoring", "covariates", "exposures"}, where);
        s.layout = Schema::Layout::long_format;
        s.id = get_as<std::string>(j, "id", where);
        s.time = get_as<std::string>(j, "time", where);
        s.outcome = get_as<std::string>(j, "outcome", where);
        s.censoring = get_or<std::string>(j, "censoring", "", where);
        s.covariates = get_or<std::vector<std::string>>(j, "covariates", {}, where);
        s.exposures = get_as<std::vector<std::string>>(j, "exposures", where);
    } else if (layout == "wide") {
        detail::check_keys(j, {"layout", "id", "outcome", "censoring", "covariates", "exposures", "exposure_names"}, where);
        s.layout = Schema::Layout::wide;
        s.id = get_or<std::string>(j, "id", "", where);
        s.outcome = get_as<std::string>(j, "outcome", where);
        s.wide_exposures = get_as<std::vector<std::vector<std::string>>>(j, "exposures", where);
        s.wide_covariates = get_or<std::vector<std::vector<std::string>>>(j, "covariates", {}, where);
        s.wide_censoring = get_or<std::vector<std::string>>(j, "censoring", {}, where);
        s.exposure_names = get_or<std::vector<std::string>>(j, "exposure_names", {}, where);
    } else {
        throw ConfigError("schema layout must be 'long' or 'wide'");
    }
    return s;
}

// ============================================================================
// Policies
// ============================================================================

namespace detail {

inline std::vector<int> select_times(const json& j, int n_times, const std::string& where) {
    std::vector<int> out;
    if (!j.contains("times") || (j["times"].is_string() && j["times"] == "all")) {
        for (int t = 0; t < n_times; ++t) out.push_back(t);
        return out;
    }
    const auto& v = j["times"];
    const auto push = [&](const json& x) {
        if (!x.is_number_integer()) throw ConfigError(where + ": times must be integers or \"all\"");
        const int t = x.get<int>();
        if (t < 0 || t >= n_times) throw ConfigError(where + ": time " + std::to_string(t) + " out of range");
        out.push_back(t);
    };
    if (v.is_array()) for (const auto& x : v) push(x);
    else push(v);
    return out;
}

inline std::vector<Index> select_components(const json& j, const std::vector<std::string>& names, const std::string& where) {
    std::vector<Index> out;
    if (!j.contains("components") || (j["components"].is_string() && j["components"] == "all")) {
        for (Index k = 0; k < static_cast<Index>(names.size()); ++k) out.push_back(k);
        return out;
    }
    const auto& v = j["components"];
    const auto push = [&](const json& x) {
        if (!x.is_string()) throw ConfigError(where + ": components are named by string");
        const auto it = std::find(names.begin(), names.end(), x.get<std::string>());
        if (it == names.end()) throw ConfigError(where + ": unknown component '" + x.get<std::string>() + "'");
        out.push_back(static_cast<Index>(it - names.begin()));
    };
    if (v.is_array()) for (const auto& x : v) push(x);
    else push(v);
    return out;
}

inline ComponentShift shift_from_json(const json& j, const std::string& where) {
    const auto kind = get_as<std::string>(j, "kind", where);
    if (kind == "identity") return ComponentShift::identity();
    if (kind == "additive") return ComponentShift::additive(get_as<double>(j, "value", where));
    if (kind == "multiplicative") return ComponentShift::multiplicative(get_as<double>(j, "value", where));
    if (kind == "piecewise_affine") {
        if (!j.contains("knots")) throw ConfigError(where + ": piecewise_affine needs 'knots'");
        const auto& k = j["knots"];
        check_keys(k, {"x", "y"}, where + ".knots");
        return ComponentShift::piecewise_affine(get_as<std::vector<double>>(k, "x", where + ".knots"),
                                                get_as<std::vector<double>>(k, "y", where + ".knots"));
    }
    throw ConfigError(where + ": unknown shift kind '" + kind + "'");
}

}  // namespace detail

/// Checks the keys of a policy definition without resolving names.
inline void check_policy_json(const json& j) {
    const std::string where = "policy '" + (j.is_object() && j.contains("name") && j["name"].is_string() ? j["name"].get<std::string>() : std::string("?")) + "'";
    detail::check_keys(j, {"name", "shifts", "guard"}, where);
    detail::get_as<std::string>(j, "name", where);
    if (j.contains("shifts")) {
        if (!j["shifts"].is_array()) throw ConfigError(where + ": 'shifts' must be a list");
        for (const auto& s : j["shifts"]) {
            detail::check_keys(s, {"times", "components", "kind", "value", "knots"}, where + " shift");
            detail::get_as<std::string>(s, "kind", where + " shift");
        }
    }
    if (j.contains("guard")) detail::check_keys(j["guard"], {"type", "epsilon"}, where + ".guard");
}

/// Resolves a policy definition against component names and the number of
/// times. Later shift entries override earlier ones.
inline ShiftPolicy policy_from_json(const json& j, const std::vector<std::string>& components, int n_times) {
    check_policy_json(j);
    const auto name = j["name"].get<std::string>();
    const std::string where = "policy '" + name + "'";
    std::vector<std::vector<ComponentShift>> table(static_cast<std::size_t>(n_times),
                                                   std::vector<ComponentShift>(components.size()));
    if (j.contains("shifts"))
        for (const auto& s : j["shifts"]) {
            const auto shift = detail::shift_from_json(s, where);
            for (int t : detail::select_times(s, n_times, where))
                for (Index c : detail::select_components(s, components, where))
                    table[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)] = shift;
        }
    Guard guard;
    if (j.contains("guard")) {
        const auto& g = j["guard"];
        const auto type = detail::get_or<std::string>(g, "type", "none", where + ".guard");
        if (type == "none") guard = Guard::none();
        else if (type == "in_hull") guard = Guard::in_hull();
        else if (type == "max_extrapolation") guard = Guard::max_extrapolation(detail::get_as<double>(g, "epsilon", where + ".guard"));
        else throw ConfigError(where + ": unknown guard type '" + type + "'");
    }
    return ShiftPolicy(name, std::move(table), guard);
}

inline json to_json(const ComponentShift& s) {
    switch (s.kind) {
        case ComponentShift::Kind::identity: return {{"kind", "identity"}};
        case ComponentShift::Kind::additive: return {{"kind", "additive"}, {"value", s.value}};
        case ComponentShift::Kind::multiplicative: return {{"kind", "multiplicative"}, {"value", s.value}};
        case ComponentShift::Kind::piecewise_affine:
            return {{"kind", "piecewise_affine"}, {"knots", {{"x", s.knots_x}, {"y", s.knots_y}}}};
    }
    return {};
}

inline json policy_to_json(const ShiftPolicy& p, const std::vector<std::string>& components) {
    json shifts = json::array();
    for (int t = 0; t < p.n_times(); ++t)
        for (Index c = 0; c < p.n_components(); ++c) {
            const auto& s = p.at(t)[static_cast<std::size_t>(c)];
            if (s.kind == ComponentShift::Kind::identity) continue;
            json e = to_json(s);
            e["times"] = t;
            e["components"] = components[static_cast<std::size_t>(c)];
            shifts.push_back(e);
        }
    json j = {{"name", p.name()}, {"shifts", shifts}};
    switch (p.guard().kind) {
        case Guard::Kind::none: break;
        case Guard::Kind::in_hull: j["guard"] = {{"type", "in_hull"}}; break;
        case Guard::Kind::max_extrapolation:
            j["guard"] = {{"type", "max_extrapolation"}, {"epsilon", p.guard().epsilon}};
            break;
    }
    return j;
}

// ============================================================================
// Structural models
// ============================================================================

namespace detail {

inline VarRef resolve_var(const json& f, const StructuralModel& m, const std::string& where) {
    const auto name = get_as<std::string>(f, "var", where);
    const int t = get_as<int>(f, "time", where);
    if (t < 0 || t >= m.n_times()) throw ConfigError(where + ": time " + std::to_string(t) + " out of range");
    const auto& cov = m.times[static_cast<std::size_t>(t)].covariate_names;
    if (const auto it = std::find(cov.begin(), cov.end(), name); it != cov.end())
        return VarRef::L(t, static_cast<int>(it - cov.begin()));
    if (const auto it = std::find(m.exposure_names.begin(), m.exposure_names.end(), name); it != m.exposure_names.end())
        return VarRef::A(t, static_cast<int>(it - m.exposure_names.begin()));
    throw ConfigError(where + ": unknown variable '" + name + "'");
}

inline Equation equation_from_json(const json& j, const StructuralModel& m, const std::string& where) {
    check_keys(j, {"intercept", "link", "noise_sd", "terms"}, where);
    Equation e;
    e.intercept = get_or<double>(j, "intercept", 0.0, where);
    const auto link = get_or<std::string>(j, "link", "identity", where);
    if (link == "identity") e.link = Equation::Link::identity;
    else if (link == "exp") e.link = Equation::Link::exp;
    else if (link == "bernoulli_logit") e.link = Equation::Link::bernoulli_logit;
    else throw ConfigError(where + ": unknown link '" + link + "'");
    e.noise_sd = get_or<double>(j, "noise_sd", e.link == Equation::Link::bernoulli_logit ? 0.0 : 1.0, where);
    if (!(e.noise_sd >= 0.0)) throw ConfigError(where + ": noise_sd must be >= 0");
    if (j.contains("terms")) {
        if (!j["terms"].is_array()) throw ConfigError(where + ": 'terms' must be a list");
        for (const auto& t : j["terms"]) {
            check_keys(t, {"coef", "factors"}, where + " term");
            Term term;
            term.coefficient = get_as<double>(t, "coef", where + " term");
            if (t.contains("factors")) {
                if (!t["factors"].is_array()) throw ConfigError(where + ": 'factors' must be a list");
                for (const auto& f : t["factors"]) {
                    check_keys(f, {"var", "time", "kind", "cutoff"}, where + " factor");
                    Factor fac;
                    fac.var = resolve_var(f, m, where + " factor");
                    const auto kind = get_or<std::string>(f, "kind", "value", where + " factor");
                    if (kind == "value") fac.kind = Factor::Kind::value;
                    else if (kind == "indicator") {
                        fac.kind = Factor::Kind::indicator;
                        fac.cutoff = get_as<double>(f, "cutoff", where + " factor");
                    } else if (kind == "log") fac.kind = Factor::Kind::log;
                    else throw ConfigError(where + ": unknown factor kind '" + kind + "'");
                    term.factors.push_back(fac);
                }
            }
            e.terms.push_back(std::move(term));
        }
    }
    return e;
}

inline json equation_to_json(const Equation& e, const StructuralModel& m) {
    json terms = json::array();
    for (const auto& t : e.terms) {
        json factors = json::array();
        for (const auto& f : t.factors) {
            const auto& v = f.var;
            const std::string name = v.block == VarRef::Block::L
                                         ? m.times[static_cast<std::size_t>(v.time)].covariate_names[static_cast<std::size_t>(v.index)]
                                         : m.exposure_names[static_cast<std::size_t>(v.index)];
            json fj = {{"var", name}, {"time", v.time}};
            switch (f.kind) {
                case Factor::Kind::value: fj["kind"] = "value"; break;
                case Factor::Kind::indicator: fj["kind"] = "indicator"; fj["cutoff"] = f.cutoff; break;
                case Factor::Kind::log: fj["kind"] = "log"; break;
            }
            factors.push_back(fj);
        }
        terms.push_back({{"coef", t.coefficient}, {"factors", factors}});
    }
    const char* link = e.link == Equation::Link::identity ? "identity" : e.link == Equation::Link::exp ? "exp" : "bernoulli_logit";
    return {{"intercept", e.intercept}, {"link", link}, {"noise_sd", e.noise_sd}, {"terms", terms}};
}

}  // namespace detail

/// Custom structural model: names first (so equations can reference
/// variables of any time), then equations.
inline StructuralModel structural_model_from_json(const json& j) {
    using detail::get_as;
    const std::string where = "model";
    detail::check_keys(j, {"name", "exposures", "outcome_name", "seed", "times", "outcome"}, where);
    StructuralModel m;
    m.name = detail::get_or<std::string>(j, "name", "custom", where);
    m.exposure_names = get_as<std::vector<std::string>>(j, "exposures", where);
    m.outcome_name = detail::get_or<std::string>(j, "outcome_name", "Y", where);
    m.seed = detail::get_or<std::uint64_t>(j, "seed", 1, where);
    if (!j.contains("times") || !j["times"].is_array()) throw ConfigError("model needs a 'times' list");
    const auto& times = j["times"];
    for (std::size_t t = 0; t < times.size(); ++t) {
        const std::string tw = where + ".times[" + std::to_string(t) + "]";
        detail::check_keys(times[t], {"covariates", "exposures", "censoring"}, tw);
        TimeSlice s;
        if (times[t].contains("covariates"))
            for (const auto& c : times[t]["covariates"]) {
                detail::check_keys(c, {"name", "equation"}, tw + " covariate");
                s.covariate_names.push_back(get_as<std::string>(c, "name", tw + " covariate"));
            }
        m.times.push_back(std::move(s));
    }
    for (std::size_t t = 0; t < times.size(); ++t) {
        const std::string tw = where + ".times[" + std::to_string(t) + "]";
        auto& s = m.times[t];
        if (times[t].contains("covariates"))
            for (const auto& c : times[t]["covariates"])
                s.covariates.push_back(c.contains("equation") ? detail::equation_from_json(c["equation"], m, tw + " covariate")
                                                              : Equation{});
        const auto& ex = times[t].contains("exposures") ? times[t]["exposures"] : json::array();
        if (!ex.is_array()) throw ConfigError(tw + ": 'exposures' must be a list of equations");
        for (const auto& e : ex) s.exposures.push_back(detail::equation_from_json(e, m, tw + " exposure"));
        if (times[t].contains("censoring")) s.censoring = detail::equation_from_json(times[t]["censoring"], m, tw + " censoring");
    }
    if (!j.contains("outcome")) throw ConfigError("model needs an 'outcome' equation");
    m.outcome = detail::equation_from_json(j["outcome"], m, where + ".outcome");
    m.validate();
    return m;
}

inline json to_json(const StructuralModel& m) {
    json times = json::array();
    for (const auto& s : m.times) {
        json covs = json::array();
        for (std::size_t k = 0; k < s.covariates.size(); ++k)
            covs.push_back({{"name", s.covariate_names[k]}, {"equation", detail::equation_to_json(s.covariates[k], m)}});
        json ex = json::array();
        for (const auto& e : s.exposures) ex.push_back(detail::equation_to_json(e, m));
        json tj = {{"covariates", covs}, {"exposures", ex}};
        if (s.censoring) tj["censoring"] = detail::equation_to_json(*s.censoring, m);
        times.push_back(tj);
    }
    return {{"name", m.name},
            {"exposures", m.exposure_names},
            {"outcome_name", m.outcome_name},
            {"seed", m.seed},
            {"times", times},
            {"outcome", detail::equation_to_json(m.outcome, m)}};
}

// ============================================================================
// Results
// ============================================================================

inline json to_json(const WaldResult& w) {
    return {{"estimate", detail::number_or_null(w.estimate)},
            {"se", detail::number_or_null(w.se)},
            {"ci95", {detail::number_or_null(w.lo), detail::number_or_null(w.hi)}},
            {"z", detail::number_or_null(w.z)},
            {"p_value", detail::number_or_null(w.p_value)},
            {"degenerate", w.degenerate}};
}

inline json to_json(const EstimandEstimate& e) {
    const auto w = wald(e);
    return {{"label", e.label},
            {"value", detail::number_or_null(e.value)},
            {"se", detail::number_or_null(w.se)},
            {"ci95", {detail::number_or_null(w.lo), detail::number_or_null(w.hi)}},
            {"n", e.n()},
            {"folds", e.folds},
            {"seed", e.seed},
            {"truncation_events", e.truncation_events},
            {"warnings", e.warnings}};
}

inline json to_json(const ExtrapolationReport& r, const std::vector<std::string>& components) {
    json delta = json::object();
    for (std::size_t j = 0; j < components.size(); ++j) delta[components[j]] = r.fraction_delta_positive[j];
    return {{"n", r.rows.size()},
            {"fraction_outside", r.fraction_outside},
            {"theta_r", r.theta_r},
            {"fraction_r_gt", r.fraction_r_gt},
            {"theta_abs", r.theta_abs},
            {"fraction_abs_gt", r.fraction_abs_gt},
            {"fraction_delta_positive", delta}};
}

}  // namespace mixshift
