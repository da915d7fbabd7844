#pragma once

// Config-driven commands behind the mixshift CLI. Each command is a pure
// function of (config, input files) and writes deterministic JSON/CSV.

#include "mixshift/serialize.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace mixshift {

namespace fs = std::filesystem;

struct DataConfig {
    fs::path path;
    Schema schema;
};

struct DensityConfig {
    std::vector<std::pair<std::string, std::string>> pairs;  // empty: every pair
    int grid = 101;
    double quantile = 0.05;
};

struct DiagnosticsConfig {
    double theta_r = 0.1;
    double theta_abs = 0.1;
    std::vector<int> times;  // empty: every time
    std::optional<DensityConfig> density;
};

struct SimulateConfig {
    std::string dgp;                       // catalog name, when `model` is empty
    std::optional<StructuralModel> model;  // custom model
    Index n = 1000;
    std::size_t truth_draws = 1000000;
};

struct InteractionConfig {
    std::string joint, first, second;
};

struct RunConfig {
    std::uint64_t seed = 0;
    fs::path base_dir;  // relative paths resolve against the config file's directory
    std::optional<fs::path> output_dir;
    std::optional<DataConfig> data;
    std::vector<json> policies;  // checked definitions, resolved once dimensions are known
    EstimatorKind estimator = EstimatorKind::tmle;
    EstimatorConfig estimation;
    DiagnosticsConfig diagnostics;
    std::optional<SubpopulationPredicate> subpopulation;
    json subpopulation_json;  // component names resolved against the dataset
    std::optional<InteractionConfig> interaction;
    std::optional<SimulateConfig> simulate;
};

namespace detail {

inline fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_absolute() ? p : base / p; }

inline json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("invalid JSON in '" + path.string() + "': " + e.what());
    }
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << text;
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline std::string file_token(const std::string& s) {
    std::string out;
    for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.') ? c : '_';
    return out.empty() ? "_" : out;
}

inline ThresholdCondition::Op parse_op(const std::string& op) {
    if (op == ">=") return ThresholdCondition::Op::ge;
    if (op == ">") return ThresholdCondition::Op::gt;
    if (op == "<=") return ThresholdCondition::Op::le;
    if (op == "<") return ThresholdCondition::Op::lt;
    throw ConfigError("unknown comparison '" + op + "' in subpopulation");
}

inline SubpopulationPredicate predicate_from_json(const json& j, const std::vector<std::string>& names) {
    check_keys(j, {"clauses"}, "subpopulation");
    SubpopulationPredicate p;
    const auto& clauses = j.contains("clauses") ? j["clauses"] : json::array();
    if (!clauses.is_array()) throw ConfigError("subpopulation clauses must be a list of lists");
    for (const auto& clause : clauses) {
        if (!clause.is_array()) throw ConfigError("each subpopulation clause is a list of conditions");
        std::vector<ThresholdCondition> conds;
        for (const auto& c : clause) {
            check_keys(c, {"component", "op", "threshold"}, "subpopulation condition");
            ThresholdCondition tc;
            const auto name = get_as<std::string>(c, "component", "subpopulation condition");
            if (!names.empty()) {
                const auto it = std::find(names.begin(), names.end(), name);
                if (it == names.end()) throw ConfigError("subpopulation: unknown component '" + name + "'");
                tc.component = static_cast<Index>(it - names.begin());
            }
            tc.op = parse_op(get_or<std::string>(c, "op", ">=", "subpopulation condition"));
            tc.threshold = get_as<double>(c, "threshold", "subpopulation condition");
            conds.push_back(tc);
        }
        if (conds.empty()) throw ConfigError("empty subpopulation clause");
        p.clauses.push_back(std::move(conds));
    }
    return p;
}

}  // namespace detail

/// Parses a run configuration. `base_dir` anchors relative paths.
inline RunConfig parse_run_config(const json& j, const fs::path& base_dir = ".") {
    using detail::get_as;
    using detail::get_or;
    const std::string where = "config";
    detail::check_keys(j,
                       {"seed", "output_dir", "data", "policies", "estimator", "folds", "inner_folds", "learners", "ratio",
                        "diagnostics", "subpopulation", "interaction", "simulate"},
                       where);
    RunConfig c;
    c.base_dir = base_dir;
    if (!j.contains("seed")) throw ConfigError("config must set 'seed'");
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0))
        throw ConfigError("'seed' must be a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("output_dir")) c.output_dir = detail::resolve(base_dir, get_as<std::string>(j, "output_dir", where));

    if (j.contains("data")) {
        const auto& d = j["data"];
        detail::check_keys(d, {"path", "schema"}, "data");
        DataConfig dc;
        dc.path = detail::resolve(base_dir, get_as<std::string>(d, "path", "data"));
        if (!d.contains("schema")) throw ConfigError("data needs a 'schema'");
        dc.schema = d["schema"].is_string()
                        ? schema_from_json(detail::read_json_file(detail::resolve(base_dir, d["schema"].get<std::string>())))
                        : schema_from_json(d["schema"]);
        c.data = std::move(dc);
    }

    if (j.contains("policies")) {
        if (!j["policies"].is_array()) throw ConfigError("'policies' must be a list");
        std::set<std::string> names;
        for (const auto& p : j["policies"]) {
            check_policy_json(p);
            if (!names.insert(p["name"].get<std::string>()).second)
                throw ConfigError("duplicate policy name '" + p["name"].get<std::string>() + "'");
            c.policies.push_back(p);
        }
    }

    c.estimator = parse_estimator(get_or<std::string>(j, "estimator", "tmle", where));
    c.estimation.seed = c.seed;
    c.estimation.folds = get_or<int>(j, "folds", 10, where);
    c.estimation.inner_folds = get_or<int>(j, "inner_folds", 10, where);
    if (c.estimation.folds < 2 || c.estimation.inner_folds < 2) throw ConfigError("folds must be at least 2");
    if (j.contains("learners")) {
        c.estimation.roster.clear();
        for (const auto& s : get_as<std::vector<std::string>>(j, "learners", where))
            c.estimation.roster.push_back(LearnerSpec::parse(s));
        if (c.estimation.roster.empty()) throw ConfigError("learner roster is empty");
    }
    if (j.contains("ratio")) {
        const auto& r = j["ratio"];
        detail::check_keys(r, {"truncation_quantile", "cap"}, "ratio");
        c.estimation.ratio.truncation_quantile = get_or<double>(r, "truncation_quantile", 0.999, "ratio");
        if (r.contains("cap") && !r["cap"].is_null()) c.estimation.ratio.cap = get_as<double>(r, "cap", "ratio");
        if (!(c.estimation.ratio.truncation_quantile > 0.0 && c.estimation.ratio.truncation_quantile <= 1.0))
            throw ConfigError("ratio truncation_quantile must lie in (0, 1]");
        if (!(c.estimation.ratio.cap > 0.0)) throw ConfigError("ratio cap must be positive");
    }

    if (j.contains("diagnostics")) {
        const auto& d = j["diagnostics"];
        detail::check_keys(d, {"theta_r", "theta_abs", "times", "density"}, "diagnostics");
        c.diagnostics.theta_r = get_or<double>(d, "theta_r", 0.1, "diagnostics");
        c.diagnostics.theta_abs = get_or<double>(d, "theta_abs", 0.1, "diagnostics");
        c.diagnostics.times = get_or<std::vector<int>>(d, "times", {}, "diagnostics");
        if (d.contains("density")) {
            const auto& k = d["density"];
            detail::check_keys(k, {"pairs", "grid", "quantile"}, "diagnostics.density");
            DensityConfig dc;
            for (const auto& p : get_or<std::vector<std::vector<std::string>>>(k, "pairs", {}, "diagnostics.density")) {
                if (p.size() != 2) throw ConfigError("density pairs name exactly two components");
                dc.pairs.emplace_back(p[0], p[1]);
            }
            dc.grid = get_or<int>(k, "grid", 101, "diagnostics.density");
            dc.quantile = get_or<double>(k, "quantile", 0.05, "diagnostics.density");
            if (dc.grid < 2) throw ConfigError("density grid must be at least 2");
            if (!(dc.quantile >= 0.0 && dc.quantile < 1.0)) throw ConfigError("density quantile must lie in [0, 1)");
            c.diagnostics.density = dc;
        }
    }

    if (j.contains("subpopulation")) {
        c.subpopulation_json = j["subpopulation"];
        c.subpopulation = detail::predicate_from_json(c.subpopulation_json, {});  // key check only
    }

    if (j.contains("interaction")) {
        const auto& i = j["interaction"];
        detail::check_keys(i, {"joint", "first", "second"}, "interaction");
        c.interaction = InteractionConfig{get_as<std::string>(i, "joint", "interaction"),
                                          get_as<std::string>(i, "first", "interaction"),
                                          get_as<std::string>(i, "second", "interaction")};
    }

    if (j.contains("simulate")) {
        const auto& s = j["simulate"];
        detail::check_keys(s, {"dgp", "model", "n", "truth_draws"}, "simulate");
        SimulateConfig sc;
        if (s.contains("model")) sc.model = structural_model_from_json(s["model"]);
        else sc.dgp = get_as<std::string>(s, "dgp", "simulate");
        if (s.contains("model") && s.contains("dgp")) throw ConfigError("simulate takes either 'dgp' or 'model'");
        sc.n = get_or<Index>(s, "n", 1000, "simulate");
        sc.truth_draws = get_or<std::size_t>(s, "truth_draws", 1000000, "simulate");
        if (sc.n < 1) throw ConfigError("simulate.n must be positive");
        if (sc.truth_draws < 2) throw ConfigError("simulate.truth_draws must be at least 2");
        c.simulate = std::move(sc);
    }
    return c;
}

inline RunConfig load_run_config(const fs::path& path) {
    return parse_run_config(detail::read_json_file(path), path.has_parent_path() ? path.parent_path() : fs::path("."));
}

/// Config value, else $MIXSHIFT_OUTPUT_DIR, else the working directory.
inline fs::path output_directory(const RunConfig& c) {
    fs::path dir = ".";
    if (c.output_dir) dir = *c.output_dir;
    else if (const char* env = std::getenv("MIXSHIFT_OUTPUT_DIR"); env && *env) dir = env;
    fs::create_directories(dir);
    return dir;
}

inline LongitudinalDataset load_dataset(const RunConfig& c) {
    if (!c.data) throw ConfigError("config has no 'data' section");
    return ingest_csv(c.data->path, c.data->schema);
}

inline std::vector<ShiftPolicy> resolve_policies(const RunConfig& c, const std::vector<std::string>& components, int n_times) {
    std::vector<ShiftPolicy> out;
    for (const auto& p : c.policies) out.push_back(policy_from_json(p, components, n_times));
    return out;
}

// ============================================================================
// Commands
// ============================================================================

inline void cmd_ingest_check(const RunConfig& c, std::ostream& log) {
    const auto ds = load_dataset(c);
    json times = json::array();
    for (int t = 0; t < ds.n_times(); ++t) {
        std::size_t censored = 0;
        const auto rows = ds.at_risk_rows(t);
        for (Index i : rows) censored += ds.uncensored[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] == 0;
        times.push_back({{"time", t},
                         {"at_risk", rows.size()},
                         {"censored_after", censored},
                         {"covariates", ds.covariate_names[static_cast<std::size_t>(t)]}});
    }
    std::vector<double> y;
    for (Index i = 0; i < ds.n(); ++i)
        if (!std::isnan(ds.outcome[i])) y.push_back(ds.outcome[i]);
    const json summary = {{"n", ds.n()},
                          {"times", ds.n_times()},
                          {"components", ds.exposure_names},
                          {"per_time", times},
                          {"outcome",
                           {{"name", ds.outcome_name},
                            {"observed", y.size()},
                            {"binary", ds.outcome_binary()},
                            {"mean", detail::number_or_null(y.empty() ? kNaN : mean_of(y))}}},
                          {"fingerprint", ds.fingerprint()}};
    detail::write_json(output_directory(c) / "ingest_summary.json", summary);
    log << "ok: " << ds.n() << " subjects, " << ds.n_times() << " time(s), " << ds.n_components() << " component(s)\n";
}

inline void cmd_correlate(const RunConfig& c, std::ostream& log) {
    const auto ds = load_dataset(c);
    const auto dir = output_directory(c);
    json out = json::array();
    for (int t = 0; t < ds.n_times(); ++t) {
        const auto sp = spearman_matrix(ds, t);
        std::ostringstream csv;
        csv << "component";
        for (const auto& n : ds.exposure_names) csv << ',' << n;
        csv << '\n';
        json rho = json::array();
        for (Index a = 0; a < sp.rho.rows(); ++a) {
            csv << ds.exposure_names[static_cast<std::size_t>(a)];
            json row = json::array();
            for (Index b = 0; b < sp.rho.cols(); ++b) {
                csv << ',' << detail::format_double(sp.rho(a, b));
                row.push_back(sp.rho(a, b));
            }
            csv << '\n';
            rho.push_back(row);
        }
        detail::write_text(dir / ("spearman_t" + std::to_string(t) + ".csv"), csv.str());

        std::ostringstream mcsv;
        mcsv << "component,min,q25,median,q75,q95,max,mean,sd\n";
        json marg = json::array();
        for (const auto& m : marginal_summaries(ds, t)) {
            mcsv << m.name;
            for (double v : {m.min, m.q25, m.median, m.q75, m.q95, m.max, m.mean, m.sd}) mcsv << ',' << detail::format_double(v);
            mcsv << '\n';
            marg.push_back({{"component", m.name}, {"min", m.min}, {"q25", m.q25}, {"median", m.median}, {"q75", m.q75},
                            {"q95", m.q95}, {"max", m.max}, {"mean", m.mean}, {"sd", m.sd}});
        }
        detail::write_text(dir / ("marginals_t" + std::to_string(t) + ".csv"), mcsv.str());
        out.push_back({{"time", t}, {"spearman", rho}, {"constant", sp.constant}, {"warning", sp.warning()}, {"marginals", marg}});
    }
    detail::write_json(dir / "correlate.json", {{"components", ds.exposure_names}, {"times", out}});
    log << "wrote correlations for " << ds.n_times() << " time(s)\n";
}

namespace detail {

inline std::vector<int> selected_times(const std::vector<int>& requested, int n_times) {
    if (requested.empty()) {
        std::vector<int> all;
        for (int t = 0; t < n_times; ++t) all.push_back(t);
        return all;
    }
    for (int t : requested)
        if (t < 0 || t >= n_times) throw ConfigError("diagnostics time " + std::to_string(t) + " out of range");
    return requested;
}

inline std::vector<std::pair<Index, Index>> density_pairs(const DensityConfig& d, const std::vector<std::string>& names) {
    std::vector<std::pair<Index, Index>> out;
    const auto find = [&](const std::string& s) {
        const auto it = std::find(names.begin(), names.end(), s);
        if (it == names.end()) throw ConfigError("density: unknown component '" + s + "'");
        return static_cast<Index>(it - names.begin());
    };
    if (d.pairs.empty()) {
        for (Index a = 0; a < static_cast<Index>(names.size()); ++a)
            for (Index b = a + 1; b < static_cast<Index>(names.size()); ++b) out.emplace_back(a, b);
    } else {
        for (const auto& [x, y] : d.pairs) {
            if (x == y) throw ConfigError("density pair repeats component '" + x + "'");
            out.emplace_back(find(x), find(y));
        }
    }
    return out;
}

}  // namespace detail

inline void cmd_diagnose(const RunConfig& c, std::ostream& log) {
    if (c.policies.empty()) throw ConfigError("diagnose needs at least one policy");
    const auto ds = load_dataset(c);
    const auto policies = resolve_policies(c, ds.exposure_names, ds.n_times());
    const auto dir = output_directory(c);
    const auto map = standardize(ds);
    const auto& names = ds.exposure_names;
    const auto times = detail::selected_times(c.diagnostics.times, ds.n_times());

    for (int t : times) {
        const auto rows = ds.at_risk_rows(t);
        const Matrix A = ds.exposures[static_cast<std::size_t>(t)](rows, Eigen::all);
        const auto hull = build_hull(ds, t, map);
        std::vector<DensitySurface> surfaces;
        if (c.diagnostics.density)
            for (const auto& [a, b] : detail::density_pairs(*c.diagnostics.density, names))
                surfaces.push_back(kde_pair(ds, t, a, b, c.diagnostics.density->grid, {c.diagnostics.density->quantile}));

        for (const auto& policy : policies) {
            const auto shifted = apply_shift(policy, A, t, policy.guard().kind == Guard::Kind::none ? nullptr : &hull);
            const Matrix obs_std = map.apply(t, A);
            const Matrix sh_std = map.apply(t, shifted.values);
            const auto report = extrapolation_report(hull, obs_std, sh_std, c.diagnostics.theta_r, c.diagnostics.theta_abs);

            std::vector<std::vector<bool>> flags;
            json density = json::array();
            for (const auto& s : surfaces) {
                Matrix pts(shifted.values.rows(), 2);
                pts.col(0) = shifted.values.col(s.component_x);
                pts.col(1) = shifted.values.col(s.component_y);
                flags.push_back(flag_low_density(s, pts, c.diagnostics.density->quantile));
                const auto low = std::count(flags.back().begin(), flags.back().end(), true);
                density.push_back({{"x", s.name_x},
                                   {"y", s.name_y},
                                   {"quantile", c.diagnostics.density->quantile},
                                   {"threshold", s.thresholds.front()},
                                   {"fraction_low_density", rows.empty() ? 0.0 : static_cast<double>(low) / static_cast<double>(rows.size())}});
            }

            json agg = to_json(report, names);
            agg["policy"] = policy.name();
            agg["time"] = t;
            agg["guard_rejected"] = shifted.rejected();
            agg["density"] = density;
            const std::string stem = "diagnose_" + detail::file_token(policy.name()) + "_t" + std::to_string(t);
            detail::write_json(dir / (stem + ".json"), agg);

            std::ostringstream csv;
            csv << "id,shifted,outside,r_ratio,abs_distance";
            for (const auto& n : names) csv << ",projection_" << n;
            for (const auto& n : names) csv << ",delta_" << n;
            for (const auto& s : surfaces) csv << ",low_density_" << s.name_x << '_' << s.name_y;
            csv << '\n';
            for (std::size_t k = 0; k < rows.size(); ++k) {
                const auto& r = report.rows[k];
                csv << ds.subject_ids[static_cast<std::size_t>(rows[k])] << ',' << int(shifted.shifted[k]) << ','
                    << int(r.outside) << ',' << detail::format_double(r.r_ratio) << ',' << detail::format_double(r.abs_distance);
                for (Index j = 0; j < r.projection_point.size(); ++j) csv << ',' << detail::format_double(r.projection_point[j]);
                for (Index j = 0; j < r.projection_delta.size(); ++j) csv << ',' << detail::format_double(r.projection_delta[j]);
                for (const auto& f : flags) csv << ',' << int(f[k]);
                csv << '\n';
            }
            detail::write_text(dir / (stem + ".csv"), csv.str());
            log << policy.name() << " t=" << t << ": fraction outside hull " << report.fraction_outside << '\n';
        }
    }
}

inline void cmd_density(const RunConfig& c, std::ostream& log) {
    const auto ds = load_dataset(c);
    if (ds.n_components() < 2) throw ConfigError("density surfaces need at least two components");
    const DensityConfig dc = c.diagnostics.density.value_or(DensityConfig{});
    const auto dir = output_directory(c);
    json surfaces = json::array();
    for (int t : detail::selected_times(c.diagnostics.times, ds.n_times())) {
        for (const auto& [a, b] : detail::density_pairs(dc, ds.exposure_names)) {
            const auto s = kde_pair(ds, t, a, b, dc.grid, {dc.quantile});
            const std::string stem =
                "density_" + detail::file_token(s.name_x) + "_" + detail::file_token(s.name_y) + "_t" + std::to_string(t);
            std::ostringstream csv;
            csv << s.name_x << ',' << s.name_y << ",density\n";
            for (Index i = 0; i < s.grid_x.size(); ++i)
                for (Index k = 0; k < s.grid_y.size(); ++k)
                    csv << detail::format_double(s.grid_x[i]) << ',' << detail::format_double(s.grid_y[k]) << ','
                        << detail::format_double(s.density(i, k)) << '\n';
            detail::write_text(dir / (stem + ".csv"), csv.str());
            const auto flags = flag_low_density(s, s.sample, dc.quantile);
            surfaces.push_back({{"time", t},
                                {"x", s.name_x},
                                {"y", s.name_y},
                                {"bandwidth_x", s.bandwidth_x},
                                {"bandwidth_y", s.bandwidth_y},
                                {"quantile", dc.quantile},
                                {"threshold", s.thresholds.front()},
                                {"integral", s.integral()},
                                {"low_density_points", std::count(flags.begin(), flags.end(), true)},
                                {"file", stem + ".csv"}});
        }
    }
    detail::write_json(dir / "density.json", {{"surfaces", surfaces}});
    log << "wrote " << surfaces.size() << " density surface(s)\n";
}

inline void cmd_estimate(const RunConfig& c, std::ostream& log) {
    if (c.policies.empty()) throw ConfigError("estimate needs at least one policy");
    const auto ds = load_dataset(c);
    const auto policies = resolve_policies(c, ds.exposure_names, ds.n_times());
    std::optional<Subpopulation> B;
    if (c.subpopulation)
        B = restrict_subpopulation(ds, detail::predicate_from_json(c.subpopulation_json, ds.exposure_names),
                                   2 * c.estimation.folds);
    ShiftEstimator session(ds, c.estimation);
    const auto observed = session.observed(c.estimator);

    json results = json::array();
    std::ostringstream csv;
    csv << "label,estimate,se,lo,hi,p_value\n";
    const auto csv_row = [&](const std::string& label, const WaldResult& w) {
        csv << '"' << label << "\"," << detail::format_double(w.estimate) << ',' << detail::format_double(w.se) << ','
            << detail::format_double(w.lo) << ',' << detail::format_double(w.hi) << ',' << detail::format_double(w.p_value)
            << '\n';
    };
    for (const auto& policy : policies) {
        EstimandEstimate shift;
        try {
            shift = session.estimate(policy, c.estimator);
        } catch (const NumericalError& e) {
            throw NumericalError("policy '" + policy.name() + "': " + e.what(), e.residual());
        } catch (const ValidationError& e) {
            throw ValidationError("policy '" + policy.name() + "': " + e.what());
        }
        auto contrast = if_sub(shift, observed);
        contrast.label = policy.name() + " - observed";
        const auto wc = wald(contrast);
        json cj = to_json(contrast);
        cj["z"] = detail::number_or_null(wc.z);
        cj["p_value"] = detail::number_or_null(wc.p_value);
        json entry = {{"policy", policy.name()}, {"shift", to_json(shift)}, {"contrast", cj}};
        csv_row(contrast.label, wc);
        if (B) {
            const auto local = localize(contrast, *B);
            const auto wl = wald(local);
            json lj = to_json(local);
            lj["z"] = detail::number_or_null(wl.z);
            lj["p_value"] = detail::number_or_null(wl.p_value);
            lj["subpopulation_size"] = B->count;
            entry["subpopulation"] = lj;
            csv_row(local.label, wl);
        }
        results.push_back(entry);
        log << contrast.label << ": " << wc.estimate << " (95% CI " << wc.lo << ", " << wc.hi << ")\n";
    }
    std::vector<std::string> roster;
    for (const auto& s : c.estimation.roster) roster.push_back(s.name());
    const json out = {{"estimator", to_string(c.estimator)},
                      {"n", ds.n()},
                      {"folds", c.estimation.folds},
                      {"inner_folds", c.estimation.inner_folds},
                      {"seed", c.seed},
                      {"learners", roster},
                      {"observed", to_json(observed)},
                      {"policies", results}};
    const auto dir = output_directory(c);
    detail::write_json(dir / "estimates.json", out);
    detail::write_text(dir / "contrasts.csv", csv.str());
}

inline void cmd_interaction(const RunConfig& c, std::ostream& log) {
    const auto ds = load_dataset(c);
    const auto all = resolve_policies(c, ds.exposure_names, ds.n_times());
    std::vector<ShiftPolicy> chosen;
    if (c.interaction) {
        for (const auto& name : {c.interaction->joint, c.interaction->first, c.interaction->second}) {
            const auto it = std::find_if(all.begin(), all.end(), [&](const ShiftPolicy& p) { return p.name() == name; });
            if (it == all.end()) throw ConfigError("interaction names unknown policy '" + name + "'");
            chosen.push_back(*it);
        }
    } else {
        if (all.size() != 3)
            throw ConfigError("interaction needs exactly three policies (joint, first, second); got " + std::to_string(all.size()));
        chosen = all;
    }
    const auto contrast = compose_contrast(chosen);
    ShiftEstimator session(ds, c.estimation);
    std::vector<EstimandEstimate> parts;
    for (const auto& p : contrast.policies) parts.push_back(session.estimate(p, c.estimator));
    const auto observed = session.observed(c.estimator);
    const auto w = interaction_test(parts[0], parts[1], parts[2], observed);

    json terms = json::array();
    for (const auto& term : contrast.terms) {
        const auto& e = term.policy ? parts[*term.policy] : observed;
        terms.push_back({{"label", term.label}, {"coefficient", term.coefficient}, {"value", e.value}});
    }
    json out = to_json(w);
    out["statistic"] = out["estimate"];
    out.erase("estimate");
    out["reject"] = w.rejects();
    out["terms"] = terms;
    out["estimator"] = to_string(c.estimator);
    out["n"] = ds.n();
    out["folds"] = c.estimation.folds;
    out["seed"] = c.seed;
    detail::write_json(output_directory(c) / "interaction.json", out);
    log << "interaction " << w.estimate << " (95% CI " << w.lo << ", " << w.hi << "), p = " << w.p_value << '\n';
}

inline void cmd_simulate(const RunConfig& c, std::ostream& log) {
    if (!c.simulate) throw ConfigError("config has no 'simulate' section");
    const auto& sc = *c.simulate;
    StructuralModel model;
    std::vector<ShiftPolicy> policies;
    if (sc.model) {
        model = *sc.model;
    } else {
        auto ref = reference_dgp(sc.dgp);
        model = ref.model;
        policies = ref.policies;
    }
    if (!c.policies.empty()) policies = resolve_policies(c, model.exposure_names, model.n_times());

    const auto ds = draw_observational(model, sc.n, c.seed);
    const auto dir = output_directory(c);
    const Schema schema = write_csv(ds, dir / "dataset.csv");
    detail::write_json(dir / "schema.json", to_json(schema));

    const auto identity = ShiftPolicy::identity("observed", model.n_times(), model.n_components());
    const auto base = counterfactual_truth(model, identity, sc.truth_draws, c.seed);
    std::optional<StandardizationMap> map;
    std::vector<ConvexHullModel> hulls;
    json entries = json::array();
    for (const auto& p : policies) {
        json entry = {{"name", p.name()}, {"policy", policy_to_json(p, model.exposure_names)}};
        if (p.guard().kind == Guard::Kind::none) {
            const auto truth = counterfactual_truth(model, p, sc.truth_draws, c.seed);
            const auto diff = counterfactual_contrast(model, {p, identity}, {1.0, -1.0}, sc.truth_draws, c.seed);
            entry["value"] = truth.value;
            entry["mc_se"] = truth.mc_se;
            entry["contrast_vs_observed"] = {{"value", diff.value}, {"mc_se", diff.mc_se}};
        } else {
            // Guards are judged against hulls of the simulated sample.
            if (hulls.empty()) {
                map = standardize(ds);
                for (int t = 0; t < ds.n_times(); ++t) hulls.push_back(build_hull(ds, t, *map));
            }
            std::vector<const ConvexHullModel*> ptrs;
            for (const auto& h : hulls) ptrs.push_back(&h);
            const auto truth = counterfactual_truth(model, p, sc.truth_draws, c.seed, ptrs);
            entry["value"] = truth.value;
            entry["mc_se"] = truth.mc_se;
            entry["contrast_vs_observed"] = {{"value", truth.value - base.value},
                                             {"mc_se", std::hypot(truth.mc_se, base.mc_se)}};
        }
        entries.push_back(entry);
    }
    const json truth = {{"dgp", model.name},
                        {"n", sc.n},
                        {"seed", c.seed},
                        {"draws", sc.truth_draws},
                        {"observational_mean", {{"value", base.value}, {"mc_se", base.mc_se}}},
                        {"policies", entries},
                        {"model", to_json(model)}};
    detail::write_json(dir / "truth.json", truth);
    log << "simulated " << sc.n << " subjects from " << model.name << '\n';
}

// ============================================================================
// Dispatch
// ============================================================================

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitData = 3, kExitNumerical = 4 };

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"ingest-check", "correlate", "diagnose", "density",
                                                "estimate",     "interaction", "simulate"};
    return names;
}

/// Runs one subcommand and maps failures to exit codes.
inline int run_command(const std::string& command, const fs::path& config_path, std::ostream& out, std::ostream& err) {
    try {
        const auto config = load_run_config(config_path);
        if (command == "ingest-check") cmd_ingest_check(config, out);
        else if (command == "correlate") cmd_correlate(config, out);
        else if (command == "diagnose") cmd_diagnose(config, out);
        else if (command == "density") cmd_density(config, out);
        else if (command == "estimate") cmd_estimate(config, out);
        else if (command == "interaction") cmd_interaction(config, out);
        else if (command == "simulate") cmd_simulate(config, out);
        else throw ConfigError("unknown command '" + command + "'");
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << '\n';
        return kExitData;
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << '\n';
        return kExitData;
    } catch (const DimensionError& e) {
        err << "dimension error: " << e.what() << '\n';
        return kExitData;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const fs::filesystem_error& e) {
        err << "file error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace mixshift
