#pragma once

// Longitudinal mixture data: CSV ingestion (long or wide layout), validation,
// per-timepoint [0,1] standardization and descriptive summaries.
//
// Time indexing: t = 0..T. `uncensored[t][i]` is the indicator that subject i
// is still observed after the exposure at t (i.e. C_{t+1} = 1), so
// subject i is at risk at t+1 iff uncensored[t][i] == 1, and the outcome is
// present iff uncensored[T][i] == 1. Everyone is at risk at t = 0. Values of
// subjects who are not at risk are stored as NaN.

#include "mixshift/core.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mixshift {

struct LongitudinalDataset {
    std::vector<std::string> subject_ids;
    std::vector<std::string> exposure_names;
    std::vector<std::vector<std::string>> covariate_names;  // [t]
    std::vector<Matrix> covariates;                         // [t] n x p_t
    std::vector<Matrix> exposures;                          // [t] n x J
    std::vector<std::vector<std::uint8_t>> uncensored;      // [t] C_{t+1}
    Vector outcome;                                         // NaN where censored
    std::string outcome_name = "Y";

    Index n() const { return static_cast<Index>(subject_ids.size()); }
    int n_times() const { return static_cast<int>(exposures.size()); }
    int last_time() const { return n_times() - 1; }
    Index n_components() const { return exposure_names.empty() ? 0 : static_cast<Index>(exposure_names.size()); }

    bool at_risk(int t, Index i) const {
        return t == 0 || uncensored[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(i)] != 0;
    }

    std::vector<Index> at_risk_rows(int t) const {
        std::vector<Index> rows;
        for (Index i = 0; i < n(); ++i)
            if (at_risk(t, i)) rows.push_back(i);
        return rows;
    }

    bool has_censoring() const {
        for (const auto& c : uncensored)
            for (auto v : c)
                if (v == 0) return true;
        return false;
    }

    bool outcome_binary() const {
        for (Index i = 0; i < n(); ++i) {
            const double y = outcome[i];
            if (!std::isnan(y) && y != 0.0 && y != 1.0) return false;
        }
        return true;
    }

    std::uint64_t fingerprint() const {
        Fingerprint fp;
        fp.add(static_cast<std::int64_t>(n()));
        fp.add(static_cast<std::int64_t>(n_times()));
        for (const auto& name : exposure_names) fp.add(name);
        for (int t = 0; t < n_times(); ++t) {
            const auto& L = covariates[static_cast<std::size_t>(t)];
            const auto& A = exposures[static_cast<std::size_t>(t)];
            for (Index k = 0; k < L.size(); ++k) fp.add(L.data()[k]);
            for (Index k = 0; k < A.size(); ++k) fp.add(A.data()[k]);
            for (auto c : uncensored[static_cast<std::size_t>(t)]) fp.add(static_cast<std::int64_t>(c));
        }
        for (Index i = 0; i < n(); ++i) fp.add(outcome[i]);
        return fp.value();
    }

    /// Throws ValidationError if an invariant is broken.
    void validate() const {
        const auto nt = static_cast<std::size_t>(n_times());
        if (nt == 0) throw ValidationError("dataset has no timepoints");
        if (exposure_names.empty()) throw ValidationError("dataset has no exposure components");
        if (covariates.size() != nt || covariate_names.size() != nt || uncensored.size() != nt)
            throw ValidationError("per-time containers disagree on the number of timepoints");
        if (outcome.size() != n()) throw ValidationError("outcome length differs from subject count");
        const Index J = n_components();
        for (std::size_t t = 0; t < nt; ++t) {
            if (exposures[t].rows() != n() || exposures[t].cols() != J)
                throw ValidationError("exposure matrix at time " + std::to_string(t) + " has wrong shape");
            if (covariates[t].rows() != n() ||
                covariates[t].cols() != static_cast<Index>(covariate_names[t].size()))
                throw ValidationError("covariate matrix at time " + std::to_string(t) + " has wrong shape");
            if (uncensored[t].size() != static_cast<std::size_t>(n()))
                throw ValidationError("censoring vector at time " + std::to_string(t) + " has wrong length");
        }
        for (Index i = 0; i < n(); ++i) {
            const auto& id = subject_ids[static_cast<std::size_t>(i)];
            for (std::size_t t = 0; t < nt; ++t) {
                const bool risk = at_risk(static_cast<int>(t), i);
                if (!risk && uncensored[t][static_cast<std::size_t>(i)] != 0)
                    throw ValidationError("non-monotone censoring for subject " + id);
                if (!risk) continue;
                for (Index j = 0; j < J; ++j)
                    if (!std::isfinite(exposures[t](i, j)))
                        throw ValidationError("non-finite exposure for subject " + id + " at time " +
                                              std::to_string(t));
            }
            const bool y_present = !std::isnan(outcome[i]);
            const bool final_obs = uncensored[nt - 1][static_cast<std::size_t>(i)] != 0;
            if (y_present != final_obs)
                throw ValidationError(y_present ? "outcome present for censored subject " + id
                                                : "outcome missing for uncensored subject " + id);
        }
    }
};

// ============================================================================
// Schema
// ============================================================================

/// Column-role mapping for CSV ingestion.
///
/// Long layout: one row per (subject, time); `covariates`/`exposures` name
/// columns shared by every time; `censoring` (optional) holds C_{t+1} on the
/// row for time t; the outcome is read from the row at the final time.
///
/// Wide layout: one row per subject; per-time column lists.
struct Schema {
    enum class Layout { long_format, wide };
    Layout layout = Layout::long_format;
    std::string id;       // optional in wide layout
    std::string time;     // long only
    std::string outcome;
    std::string censoring;  // long only, optional
    std::vector<std::string> covariates;  // long
    std::vector<std::string> exposures;   // long
    std::vector<std::vector<std::string>> wide_covariates;  // [t]
    std::vector<std::vector<std::string>> wide_exposures;   // [t]
    std::vector<std::string> wide_censoring;                // [t], optional
    std::vector<std::string> exposure_names;                // wide, optional labels
};

// ============================================================================
// CSV reading
// ============================================================================

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t row) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char c = line[k];
        if (quoted) {
            if (c == '"') {
                if (k + 1 < line.size() && line[k + 1] == '"') {
                    field.push_back('"');
                    ++k;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    if (quoted) throw ParseError("unterminated quoted field", row);
    out.push_back(std::move(field));
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

inline bool is_missing_token(std::string_view s) {
    s = trim(s);
    return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "." || s == "null";
}

inline double parse_number(std::string_view s, std::size_t row, const std::string& column) {
    s = trim(s);
    if (is_missing_token(s)) return kNaN;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ParseError("column '" + column + "': cannot parse '" + std::string(s) + "' as a number", row);
    return v;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::unordered_map<std::string, std::size_t> index;

    std::size_t column(const std::string& name) const {
        const auto it = index.find(name);
        if (it == index.end()) throw ConfigError("schema names missing column '" + name + "'");
        return it->second;
    }
};

inline CsvTable read_csv_table(std::istream& in) {
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty file (no header row)", 0);
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
    table.header = split_csv_line(line, 0);
    for (std::size_t k = 0; k < table.header.size(); ++k) {
        auto name = std::string(trim(table.header[k]));
        table.header[k] = name;
        if (!table.index.emplace(name, k).second) throw ParseError("duplicate column '" + name + "'", 0);
    }
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line, row);
        if (fields.size() != table.header.size())
            throw ParseError("expected " + std::to_string(table.header.size()) + " fields, found " +
                                 std::to_string(fields.size()),
                             row);
        table.rows.push_back(std::move(fields));
    }
    return table;
}

inline std::string format_double(double x) {
    if (std::isnan(x)) return "NA";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

inline double median_of(std::vector<double> v) { return quantile(std::move(v), 0.5); }

/// Median-imputes missing covariates among at-risk rows and appends a
/// missingness-indicator column per affected covariate (at every time, so the
/// column set stays uniform across times).
inline void impute_covariates(LongitudinalDataset& ds) {
    const auto nt = static_cast<std::size_t>(ds.n_times());
    std::vector<std::string> flagged;
    for (std::size_t t = 0; t < nt; ++t)
        for (Index k = 0; k < ds.covariates[t].cols(); ++k)
            for (Index i = 0; i < ds.n(); ++i)
                if (ds.at_risk(static_cast<int>(t), i) && std::isnan(ds.covariates[t](i, k))) {
                    const auto& name = ds.covariate_names[t][static_cast<std::size_t>(k)];
                    if (std::find(flagged.begin(), flagged.end(), name) == flagged.end())
                        flagged.push_back(name);
                    break;
                }
    if (flagged.empty()) return;
    for (std::size_t t = 0; t < nt; ++t) {
        auto& L = ds.covariates[t];
        auto& names = ds.covariate_names[t];
        const Index p = L.cols();
        std::vector<Index> indicator_source;
        for (const auto& name : flagged) {
            const auto it = std::find(names.begin(), names.end(), name);
            if (it != names.end()) indicator_source.push_back(static_cast<Index>(it - names.begin()));
        }
        Matrix out(L.rows(), p + static_cast<Index>(indicator_source.size()));
        out.leftCols(p) = L;
        for (std::size_t f = 0; f < indicator_source.size(); ++f) {
            const Index k = indicator_source[f];
            std::vector<double> present;
            for (Index i = 0; i < ds.n(); ++i)
                if (ds.at_risk(static_cast<int>(t), i) && !std::isnan(L(i, k))) present.push_back(L(i, k));
            const double fill = present.empty() ? 0.0 : median_of(present);
            const Index col = p + static_cast<Index>(f);
            for (Index i = 0; i < ds.n(); ++i) {
                if (!ds.at_risk(static_cast<int>(t), i)) {
                    out(i, col) = kNaN;
                    continue;
                }
                const bool missing = std::isnan(L(i, k));
                out(i, col) = missing ? 1.0 : 0.0;
                if (missing) out(i, k) = fill;
            }
            names.push_back(names[static_cast<std::size_t>(k)] + "_missing");
        }
        L = std::move(out);
    }
}

}  // namespace detail

// ============================================================================
// Ingestion
// ============================================================================

inline LongitudinalDataset ingest_long(const detail::CsvTable& table, const Schema& schema) {
    using detail::parse_number;
    if (schema.exposures.empty()) throw ConfigError("schema lists no exposure columns");
    if (schema.outcome.empty()) throw ConfigError("schema names no outcome column");
    if (schema.id.empty() || schema.time.empty()) throw ConfigError("long layout needs id and time columns");

    const auto id_col = table.column(schema.id);
    const auto time_col = table.column(schema.time);
    const auto y_col = table.column(schema.outcome);
    std::optional<std::size_t> c_col;
    if (!schema.censoring.empty()) c_col = table.column(schema.censoring);
    std::vector<std::size_t> a_cols, l_cols;
    for (const auto& c : schema.exposures) a_cols.push_back(table.column(c));
    for (const auto& c : schema.covariates) l_cols.push_back(table.column(c));

    std::vector<std::string> ids;
    std::unordered_map<std::string, std::size_t> subject_of;
    std::vector<std::map<int, std::size_t>> rows_of;  // subject -> time -> row index
    int max_time = 0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& fields = table.rows[r];
        const std::string id(detail::trim(fields[id_col]));
        if (id.empty()) throw ParseError("empty subject id", r + 1);
        const double tv = parse_number(fields[time_col], r + 1, schema.time);
        if (std::isnan(tv) || tv < 0 || tv != std::floor(tv))
            throw ParseError("time must be a non-negative integer", r + 1);
        const int t = static_cast<int>(tv);
        auto [it, inserted] = subject_of.emplace(id, ids.size());
        if (inserted) {
            ids.push_back(id);
            rows_of.emplace_back();
        }
        if (!rows_of[it->second].emplace(t, r).second)
            throw ParseError("duplicate row for subject " + id + " at time " + std::to_string(t), r + 1);
        max_time = std::max(max_time, t);
    }

    const auto nt = static_cast<std::size_t>(max_time + 1);
    const auto n = static_cast<Index>(ids.size());
    const auto J = static_cast<Index>(a_cols.size());
    const auto p = static_cast<Index>(l_cols.size());

    LongitudinalDataset ds;
    ds.subject_ids = ids;
    ds.exposure_names = schema.exposures;
    ds.outcome_name = schema.outcome;
    ds.covariate_names.assign(nt, schema.covariates);
    ds.covariates.assign(nt, Matrix::Constant(n, p, kNaN));
    ds.exposures.assign(nt, Matrix::Constant(n, J, kNaN));
    ds.uncensored.assign(nt, std::vector<std::uint8_t>(static_cast<std::size_t>(n), 0));
    ds.outcome = Vector::Constant(n, kNaN);

    for (Index i = 0; i < n; ++i) {
        const auto& id = ids[static_cast<std::size_t>(i)];
        const auto& rows = rows_of[static_cast<std::size_t>(i)];
        if (rows.begin()->first != 0)
            throw ValidationError("subject " + id + " has no row at time 0");
        int expected = 0;
        for (const auto& [t, r] : rows) {
            if (t != expected)
                throw ValidationError("non-monotone censoring for subject " + id + ": gap before time " +
                                      std::to_string(t));
            ++expected;
        }
        const int last_row_time = rows.rbegin()->first;
        std::optional<double> final_y;
        for (const auto& [t, r] : rows) {
            const auto& fields = table.rows[r];
            const auto ut = static_cast<std::size_t>(t);
            for (Index j = 0; j < J; ++j)
                ds.exposures[ut](i, j) = parse_number(fields[a_cols[static_cast<std::size_t>(j)]], r + 1,
                                                      schema.exposures[static_cast<std::size_t>(j)]);
            for (Index k = 0; k < p; ++k)
                ds.covariates[ut](i, k) = parse_number(fields[l_cols[static_cast<std::size_t>(k)]], r + 1,
                                                       schema.covariates[static_cast<std::size_t>(k)]);
            const double y = parse_number(fields[y_col], r + 1, schema.outcome);
            if (t == max_time) final_y = y;
            std::uint8_t c;
            if (c_col) {
                const double cv = parse_number(fields[*c_col], r + 1, schema.censoring);
                if (cv != 0.0 && cv != 1.0) throw ParseError("censoring indicator must be 0 or 1", r + 1);
                c = cv == 1.0 ? 1 : 0;
            } else {
                c = t < max_time ? (t < last_row_time ? 1 : 0) : (std::isnan(y) ? 0 : 1);
            }
            if (c == 0 && t < last_row_time)
                throw ValidationError("non-monotone censoring for subject " + id + ": censored after time " +
                                      std::to_string(t) + " but observed later");
            if (c == 1 && t < max_time && t == last_row_time)
                throw ValidationError("subject " + id + " is marked uncensored after time " +
                                      std::to_string(t) + " but has no later row");
            ds.uncensored[ut][static_cast<std::size_t>(i)] = c;
        }
        if (final_y) ds.outcome[i] = *final_y;
        const bool final_obs = ds.uncensored[nt - 1][static_cast<std::size_t>(i)] != 0;
        if (final_obs && std::isnan(ds.outcome[i]))
            throw ValidationError("outcome missing for uncensored subject " + id);
        if (!final_obs && !std::isnan(ds.outcome[i]))
            throw ValidationError("outcome present for censored subject " + id);
    }
    detail::impute_covariates(ds);
    ds.validate();
    return ds;
}

inline LongitudinalDataset ingest_wide(const detail::CsvTable& table, const Schema& schema) {
    using detail::parse_number;
    const auto nt = schema.wide_exposures.size();
    if (nt == 0) throw ConfigError("wide schema lists no exposure columns");
    if (schema.outcome.empty()) throw ConfigError("schema names no outcome column");
    const auto J = static_cast<Index>(schema.wide_exposures[0].size());
    if (J == 0) throw ConfigError("wide schema lists no exposure columns at time 0");
    for (const auto& a : schema.wide_exposures)
        if (static_cast<Index>(a.size()) != J) throw ConfigError("wide schema: exposure count differs across times");
    if (!schema.wide_covariates.empty() && schema.wide_covariates.size() != nt)
        throw ConfigError("wide schema: covariate lists must cover every time");
    if (!schema.wide_censoring.empty() && schema.wide_censoring.size() != nt)
        throw ConfigError("wide schema: censoring columns must cover every time");

    const auto n = static_cast<Index>(table.rows.size());
    LongitudinalDataset ds;
    ds.outcome_name = schema.outcome;
    if (!schema.exposure_names.empty()) {
        if (static_cast<Index>(schema.exposure_names.size()) != J)
            throw ConfigError("wide schema: exposure_names length differs from component count");
        ds.exposure_names = schema.exposure_names;
    } else {
        ds.exposure_names = schema.wide_exposures[0];
    }
    ds.covariate_names.resize(nt);
    ds.covariates.resize(nt);
    ds.exposures.assign(nt, Matrix::Constant(n, J, kNaN));
    ds.uncensored.assign(nt, std::vector<std::uint8_t>(static_cast<std::size_t>(n), 0));
    ds.outcome = Vector::Constant(n, kNaN);
    for (std::size_t t = 0; t < nt; ++t) {
        // Column "L1_t0" at time 0 names covariate "L1".
        const std::string suffix = "_t" + std::to_string(t);
        ds.covariate_names[t].clear();
        if (!schema.wide_covariates.empty())
            for (const auto& c : schema.wide_covariates[t])
                ds.covariate_names[t].push_back(c.size() > suffix.size() && c.ends_with(suffix)
                                                    ? c.substr(0, c.size() - suffix.size())
                                                    : c);
        ds.covariates[t] = Matrix::Constant(n, static_cast<Index>(ds.covariate_names[t].size()), kNaN);
    }
    const auto y_col = table.column(schema.outcome);
    std::optional<std::size_t> id_col;
    if (!schema.id.empty()) id_col = table.column(schema.id);

    for (Index i = 0; i < n; ++i) {
        const auto& fields = table.rows[static_cast<std::size_t>(i)];
        const auto row = static_cast<std::size_t>(i) + 1;
        const std::string id = id_col ? std::string(detail::trim(fields[*id_col])) : std::to_string(i + 1);
        ds.subject_ids.push_back(id);
        bool alive = true;
        const double y = parse_number(fields[y_col], row, schema.outcome);
        for (std::size_t t = 0; t < nt; ++t) {
            bool exposures_present = true;
            Vector a(J);
            for (Index j = 0; j < J; ++j) {
                const auto& col = schema.wide_exposures[t][static_cast<std::size_t>(j)];
                a[j] = parse_number(fields[table.column(col)], row, col);
                exposures_present = exposures_present && !std::isnan(a[j]);
            }
            if (!alive) {
                if (exposures_present)
                    throw ValidationError("non-monotone censoring for subject " + id + ": exposures present at time " +
                                          std::to_string(t) + " after censoring");
                continue;
            }
            ds.exposures[t].row(i) = a.transpose();
            for (std::size_t k = 0; k < ds.covariate_names[t].size(); ++k) {
                const auto& col = schema.wide_covariates[t][k];
                ds.covariates[t](i, static_cast<Index>(k)) = parse_number(fields[table.column(col)], row, col);
            }
            std::uint8_t c;
            if (!schema.wide_censoring.empty()) {
                const auto& col = schema.wide_censoring[t];
                const double cv = parse_number(fields[table.column(col)], row, col);
                if (cv != 0.0 && cv != 1.0) throw ParseError("censoring indicator must be 0 or 1", row);
                c = cv == 1.0 ? 1 : 0;
            } else if (t + 1 < nt) {
                c = 1;
                for (Index j = 0; j < J; ++j) {
                    const auto& col = schema.wide_exposures[t + 1][static_cast<std::size_t>(j)];
                    if (detail::is_missing_token(fields[table.column(col)])) c = 0;
                }
            } else {
                c = std::isnan(y) ? 0 : 1;
            }
            ds.uncensored[t][static_cast<std::size_t>(i)] = c;
            alive = c == 1;
        }
        if (!schema.wide_censoring.empty()) {
            // A later censoring column set back to 1 after a 0 is a monotonicity violation.
            bool seen_zero = false;
            for (std::size_t t = 0; t < nt; ++t) {
                const auto& col = schema.wide_censoring[t];
                const double cv = parse_number(fields[table.column(col)], row, col);
                if (seen_zero && cv == 1.0)
                    throw ValidationError("non-monotone censoring for subject " + id);
                seen_zero = seen_zero || cv == 0.0;
            }
        }
        const bool final_obs = ds.uncensored[nt - 1][static_cast<std::size_t>(i)] != 0;
        if (final_obs && std::isnan(y)) throw ValidationError("outcome missing for uncensored subject " + id);
        if (!final_obs && !std::isnan(y)) throw ValidationError("outcome present for censored subject " + id);
        ds.outcome[i] = y;
    }
    detail::impute_covariates(ds);
    ds.validate();
    return ds;
}

inline LongitudinalDataset ingest_csv(std::istream& in, const Schema& schema) {
    const auto table = detail::read_csv_table(in);
    return schema.layout == Schema::Layout::long_format ? ingest_long(table, schema) : ingest_wide(table, schema);
}

inline LongitudinalDataset ingest_csv(const std::filesystem::path& path, const Schema& schema) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open data file '" + path.string() + "'");
    return ingest_csv(in, schema);
}

/// Writes `ds` in long layout when every time shares the covariate columns,
/// otherwise in wide layout. Returns the schema that reads it back.
inline Schema write_csv(const LongitudinalDataset& ds, std::ostream& out) {
    using detail::format_double;
    bool uniform = true;
    for (const auto& names : ds.covariate_names) uniform = uniform && names == ds.covariate_names[0];
    Schema schema;
    schema.outcome = ds.outcome_name;
    const auto nt = static_cast<std::size_t>(ds.n_times());
    if (uniform) {
        schema.layout = Schema::Layout::long_format;
        schema.id = "id";
        schema.time = "time";
        schema.censoring = "C";
        schema.covariates = ds.covariate_names[0];
        schema.exposures = ds.exposure_names;
        out << "id,time";
        for (const auto& c : schema.covariates) out << ',' << c;
        for (const auto& a : schema.exposures) out << ',' << a;
        out << ",C," << schema.outcome << '\n';
        for (Index i = 0; i < ds.n(); ++i)
            for (std::size_t t = 0; t < nt; ++t) {
                if (!ds.at_risk(static_cast<int>(t), i)) break;
                out << ds.subject_ids[static_cast<std::size_t>(i)] << ',' << t;
                for (Index k = 0; k < ds.covariates[t].cols(); ++k) out << ',' << format_double(ds.covariates[t](i, k));
                for (Index j = 0; j < ds.n_components(); ++j) out << ',' << format_double(ds.exposures[t](i, j));
                out << ',' << static_cast<int>(ds.uncensored[t][static_cast<std::size_t>(i)]) << ','
                    << (t + 1 == nt ? format_double(ds.outcome[i]) : std::string("NA")) << '\n';
            }
        return schema;
    }
    schema.layout = Schema::Layout::wide;
    schema.id = "id";
    schema.exposure_names = ds.exposure_names;
    out << "id";
    for (std::size_t t = 0; t < nt; ++t) {
        std::vector<std::string> lc, ac;
        for (const auto& c : ds.covariate_names[t]) lc.push_back(c + "_t" + std::to_string(t));
        for (const auto& a : ds.exposure_names) ac.push_back(a + "_t" + std::to_string(t));
        for (const auto& c : lc) out << ',' << c;
        for (const auto& a : ac) out << ',' << a;
        const auto cc = "C_t" + std::to_string(t);
        out << ',' << cc;
        schema.wide_covariates.push_back(lc);
        schema.wide_exposures.push_back(ac);
        schema.wide_censoring.push_back(cc);
    }
    out << ',' << schema.outcome << '\n';
    for (Index i = 0; i < ds.n(); ++i) {
        out << ds.subject_ids[static_cast<std::size_t>(i)];
        for (std::size_t t = 0; t < nt; ++t) {
            for (Index k = 0; k < ds.covariates[t].cols(); ++k) out << ',' << format_double(ds.covariates[t](i, k));
            for (Index j = 0; j < ds.n_components(); ++j) out << ',' << format_double(ds.exposures[t](i, j));
            out << ',' << static_cast<int>(ds.uncensored[t][static_cast<std::size_t>(i)]);
        }
        out << ',' << format_double(ds.outcome[i]) << '\n';
    }
    return schema;
}

inline Schema write_csv(const LongitudinalDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    return write_csv(ds, out);
}

// ============================================================================
// Standardization
// ============================================================================

/// x -> (x - min) / (max - min); constant columns send everything to 0.
struct AffineMap {
    double min = 0.0;
    double max = 0.0;

    bool invertible() const { return max > min; }
    double apply(double x) const { return invertible() ? (x - min) / (max - min) : 0.0; }
    double invert(double u) const { return min + u * (max - min); }
};

/// Per-time, per-component maps built from the at-risk rows at each time.
struct StandardizationMap {
    std::vector<std::vector<AffineMap>> maps;  // [t][j]

    const std::vector<AffineMap>& at(int t) const {
        if (t < 0 || t >= static_cast<int>(maps.size())) throw DimensionError("time index out of range");
        return maps[static_cast<std::size_t>(t)];
    }

    Vector apply(int t, const Vector& x) const {
        const auto& m = at(t);
        if (x.size() != static_cast<Index>(m.size())) throw DimensionError("standardize: component count mismatch");
        Vector u(x.size());
        for (Index j = 0; j < x.size(); ++j) u[j] = m[static_cast<std::size_t>(j)].apply(x[j]);
        return u;
    }

    Matrix apply(int t, const Matrix& X) const {
        const auto& m = at(t);
        if (X.cols() != static_cast<Index>(m.size())) throw DimensionError("standardize: component count mismatch");
        Matrix U(X.rows(), X.cols());
        for (Index j = 0; j < X.cols(); ++j)
            for (Index i = 0; i < X.rows(); ++i) U(i, j) = m[static_cast<std::size_t>(j)].apply(X(i, j));
        return U;
    }

    Matrix invert(int t, const Matrix& U) const {
        const auto& m = at(t);
        Matrix X(U.rows(), U.cols());
        for (Index j = 0; j < U.cols(); ++j)
            for (Index i = 0; i < U.rows(); ++i) X(i, j) = m[static_cast<std::size_t>(j)].invert(U(i, j));
        return X;
    }
};

inline StandardizationMap standardize(const LongitudinalDataset& ds) {
    StandardizationMap map;
    for (int t = 0; t < ds.n_times(); ++t) {
        const auto& A = ds.exposures[static_cast<std::size_t>(t)];
        std::vector<AffineMap> row(static_cast<std::size_t>(A.cols()));
        for (Index j = 0; j < A.cols(); ++j) {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (Index i = 0; i < A.rows(); ++i) {
                if (!ds.at_risk(t, i)) continue;
                lo = std::min(lo, A(i, j));
                hi = std::max(hi, A(i, j));
            }
            if (!std::isfinite(lo)) lo = hi = 0.0;
            row[static_cast<std::size_t>(j)] = AffineMap{lo, hi};
        }
        map.maps.push_back(std::move(row));
    }
    return map;
}

// ============================================================================
// Descriptive summaries
// ============================================================================

/// Average ranks (1-based), ties share the mean of their positions.
inline std::vector<double> average_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    std::size_t k = 0;
    while (k < order.size()) {
        std::size_t end = k + 1;
        while (end < order.size() && x[order[end]] == x[order[k]]) ++end;
        const double r = 0.5 * static_cast<double>(k + 1 + end);
        for (std::size_t m = k; m < end; ++m) ranks[order[m]] = r;
        k = end;
    }
    return ranks;
}

struct SpearmanResult {
    Matrix rho;
    std::vector<bool> constant;  // component had a single distinct value
    bool warning() const { return std::find(constant.begin(), constant.end(), true) != constant.end(); }
};

/// Spearman correlation of the columns of X (rows are observations).
inline SpearmanResult spearman_matrix(const Matrix& X) {
    const Index J = X.cols();
    const Index n = X.rows();
    Matrix R(n, J);
    SpearmanResult out;
    out.constant.assign(static_cast<std::size_t>(J), false);
    for (Index j = 0; j < J; ++j) {
        std::vector<double> col(X.col(j).data(), X.col(j).data() + n);
        const auto r = average_ranks(col);
        for (Index i = 0; i < n; ++i) R(i, j) = r[static_cast<std::size_t>(i)];
        R.col(j).array() -= R.col(j).mean();
        out.constant[static_cast<std::size_t>(j)] = R.col(j).squaredNorm() == 0.0;
    }
    out.rho = Matrix::Identity(J, J);
    for (Index a = 0; a < J; ++a)
        for (Index b = a + 1; b < J; ++b) {
            double r = 0.0;
            if (!out.constant[static_cast<std::size_t>(a)] && !out.constant[static_cast<std::size_t>(b)])
                r = std::clamp(R.col(a).dot(R.col(b)) / (R.col(a).norm() * R.col(b).norm()), -1.0, 1.0);
            out.rho(a, b) = out.rho(b, a) = r;
        }
    return out;
}

/// Exposure rows at time t for the subjects at risk at t.
inline Matrix at_risk_exposures(const LongitudinalDataset& ds, int t) {
    if (t < 0 || t >= ds.n_times()) throw DimensionError("time index out of range");
    const auto rows = ds.at_risk_rows(t);
    Matrix X(static_cast<Index>(rows.size()), ds.n_components());
    for (std::size_t k = 0; k < rows.size(); ++k) X.row(static_cast<Index>(k)) = ds.exposures[static_cast<std::size_t>(t)].row(rows[k]);
    return X;
}

inline SpearmanResult spearman_matrix(const LongitudinalDataset& ds, int t) {
    return spearman_matrix(at_risk_exposures(ds, t));
}

struct MarginalSummary {
    std::string name;
    double min, q25, median, q75, q95, max, mean, sd;
};

inline std::vector<MarginalSummary> marginal_summaries(const LongitudinalDataset& ds, int t) {
    const Matrix X = at_risk_exposures(ds, t);
    std::vector<MarginalSummary> out;
    for (Index j = 0; j < X.cols(); ++j) {
        std::vector<double> v(X.col(j).data(), X.col(j).data() + X.rows());
        MarginalSummary s;
        s.name = ds.exposure_names[static_cast<std::size_t>(j)];
        s.min = quantile(v, 0.0);
        s.q25 = quantile(v, 0.25);
        s.median = quantile(v, 0.5);
        s.q75 = quantile(v, 0.75);
        s.q95 = quantile(v, 0.95);
        s.max = quantile(v, 1.0);
        s.mean = mean_of(v);
        s.sd = std::sqrt(variance_of(v));
        out.push_back(s);
    }
    return out;
}

}  // namespace mixshift
