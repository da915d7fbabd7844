#pragma once

// Shift policies d: per-time, per-component additive, multiplicative or
// piecewise-affine maps, optionally guarded by the convex hull of the
// observed exposures at the same time.

#include "mixshift/core.hpp"
#include "mixshift/hull.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mixshift {

struct ComponentShift {
    enum class Kind { identity, additive, multiplicative, piecewise_affine };

    Kind kind = Kind::identity;
    double value = 0.0;           // gamma (additive) or delta (multiplicative)
    std::vector<double> knots_x;  // piecewise-affine breakpoints, strictly increasing
    std::vector<double> knots_y;

    static ComponentShift identity() { return {}; }
    static ComponentShift additive(double gamma) { return {Kind::additive, gamma, {}, {}}; }
    static ComponentShift multiplicative(double delta) { return {Kind::multiplicative, delta, {}, {}}; }

    static ComponentShift piecewise_affine(std::vector<double> xs, std::vector<double> ys) {
        if (xs.size() < 2 || xs.size() != ys.size())
            throw ConfigError("piecewise-affine shift needs at least two (x, y) knots");
        for (std::size_t k = 1; k < xs.size(); ++k)
            if (!(xs[k] > xs[k - 1])) throw ConfigError("piecewise-affine knots must be strictly increasing");
        return {Kind::piecewise_affine, 0.0, std::move(xs), std::move(ys)};
    }

    bool is_identity() const {
        switch (kind) {
            case Kind::identity: return true;
            case Kind::additive: return value == 0.0;
            case Kind::multiplicative: return value == 1.0;
            case Kind::piecewise_affine: {
                for (std::size_t k = 0; k < knots_x.size(); ++k)
                    if (knots_x[k] != knots_y[k]) return false;
                return true;
            }
        }
        return false;
    }

    double apply(double x) const {
        switch (kind) {
            case Kind::identity: return x;
            case Kind::additive: return x + value;
            case Kind::multiplicative: return value * x;
            case Kind::piecewise_affine: {
                // Linear interpolation; the end segments extend beyond the knots.
                std::size_t k = 1;
                while (k + 1 < knots_x.size() && x > knots_x[k]) ++k;
                const double x0 = knots_x[k - 1], x1 = knots_x[k];
                const double y0 = knots_y[k - 1], y1 = knots_y[k];
                return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
            }
        }
        return x;
    }
};

struct Guard {
    enum class Kind { none, in_hull, max_extrapolation };
    Kind kind = Kind::none;
    double epsilon = 0.0;  // standardized units, max_extrapolation only

    static Guard none() { return {}; }
    static Guard in_hull() { return {Kind::in_hull, 0.0}; }
    static Guard max_extrapolation(double eps) {
        if (!(eps >= 0.0)) throw ConfigError("extrapolation guard epsilon must be >= 0");
        return {Kind::max_extrapolation, eps};
    }
};

class ShiftPolicy {
public:
    ShiftPolicy() = default;
    ShiftPolicy(std::string name, std::vector<std::vector<ComponentShift>> by_time, Guard guard = {})
        : name_(std::move(name)), by_time_(std::move(by_time)), guard_(guard) {
        if (by_time_.empty()) throw ConfigError("policy '" + name_ + "' covers no timepoints");
        for (const auto& row : by_time_)
            if (row.size() != by_time_[0].size() || row.empty())
                throw ConfigError("policy '" + name_ + "' has inconsistent component counts across times");
        if (guard_.kind == Guard::Kind::max_extrapolation && !(guard_.epsilon >= 0.0))
            throw ConfigError("policy '" + name_ + "': guard epsilon must be >= 0");
    }

    static ShiftPolicy identity(std::string name, int n_times, Index J) {
        return uniform(std::move(name), n_times, J, ComponentShift::identity());
    }

    static ShiftPolicy uniform(std::string name, int n_times, Index J, ComponentShift shift, Guard guard = {}) {
        return ShiftPolicy(std::move(name),
                           std::vector<std::vector<ComponentShift>>(static_cast<std::size_t>(n_times),
                                                                    std::vector<ComponentShift>(static_cast<std::size_t>(J), shift)),
                           guard);
    }

    /// Applies `shift` to the listed components at every time; others untouched.
    static ShiftPolicy on_components(std::string name, int n_times, Index J, const std::vector<Index>& components,
                                     ComponentShift shift, Guard guard = {}) {
        std::vector<ComponentShift> row(static_cast<std::size_t>(J));
        for (Index j : components) {
            if (j < 0 || j >= J) throw DimensionError("policy component index out of range");
            row[static_cast<std::size_t>(j)] = shift;
        }
        return ShiftPolicy(std::move(name), std::vector<std::vector<ComponentShift>>(static_cast<std::size_t>(n_times), row),
                           guard);
    }

    const std::string& name() const { return name_; }
    int n_times() const { return static_cast<int>(by_time_.size()); }
    Index n_components() const { return by_time_.empty() ? 0 : static_cast<Index>(by_time_[0].size()); }
    const Guard& guard() const { return guard_; }
    const std::vector<std::vector<ComponentShift>>& table() const { return by_time_; }

    const std::vector<ComponentShift>& at(int t) const {
        if (t < 0 || t >= n_times())
            throw DimensionError("policy '" + name_ + "' has no entry for time " + std::to_string(t));
        return by_time_[static_cast<std::size_t>(t)];
    }

    bool is_identity_at(int t) const {
        for (const auto& s : at(t))
            if (!s.is_identity()) return false;
        return true;
    }

    bool is_identity() const {
        for (int t = 0; t < n_times(); ++t)
            if (!is_identity_at(t)) return false;
        return true;
    }

    Vector apply_row(int t, const Vector& a) const {
        const auto& shifts = at(t);
        if (a.size() != static_cast<Index>(shifts.size()))
            throw DimensionError("policy '" + name_ + "' expects " + std::to_string(shifts.size()) + " components");
        Vector out(a.size());
        for (Index j = 0; j < a.size(); ++j) out[j] = shifts[static_cast<std::size_t>(j)].apply(a[j]);
        return out;
    }

    ShiftPolicy renamed(std::string name) const {
        ShiftPolicy copy = *this;
        copy.name_ = std::move(name);
        return copy;
    }

private:
    std::string name_;
    std::vector<std::vector<ComponentShift>> by_time_;
    Guard guard_;
};

struct ShiftedExposures {
    Matrix values;
    std::vector<bool> shifted;  // false: guard kept the observed row (or row missing)

    std::size_t rejected() const { return static_cast<std::size_t>(std::count(shifted.begin(), shifted.end(), false)); }
};

/// True when the guard accepts the raw shifted row against `hull`.
inline bool guard_accepts(const Guard& guard, const ConvexHullModel& hull, const Vector& shifted_raw) {
    if (guard.kind == Guard::Kind::none) return true;
    const double dist = hull.project(hull.standardize(shifted_raw)).distance;
    if (guard.kind == Guard::Kind::in_hull) return dist <= hull.options().membership_tol;
    return dist <= guard.epsilon;
}

/// Applies the policy row-wise to raw exposures A_t. Guarded rows either take
/// the full shift or keep the observed row; nothing is projected or blended.
/// Rows containing NaN (subjects not at risk) pass through unshifted.
inline ShiftedExposures apply_shift(const ShiftPolicy& policy, const Matrix& A, int t,
                                    const ConvexHullModel* hull = nullptr) {
    if (A.cols() != policy.n_components())
        throw DimensionError("policy '" + policy.name() + "' has " + std::to_string(policy.n_components()) +
                             " components but exposures have " + std::to_string(A.cols()));
    const auto& shifts = policy.at(t);
    const bool guarded = policy.guard().kind != Guard::Kind::none;
    if (guarded && hull == nullptr)
        throw ConfigError("policy '" + policy.name() + "' has a hull guard but no hull was supplied");
    if (guarded && hull->dim() != A.cols()) throw DimensionError("hull dimension differs from exposure count");

    ShiftedExposures out{A, std::vector<bool>(static_cast<std::size_t>(A.rows()), true)};
    for (Index i = 0; i < A.rows(); ++i) {
        if (!A.row(i).allFinite()) {
            out.shifted[static_cast<std::size_t>(i)] = false;
            continue;
        }
        Vector s(A.cols());
        for (Index j = 0; j < A.cols(); ++j) s[j] = shifts[static_cast<std::size_t>(j)].apply(A(i, j));
        if (guarded && !guard_accepts(policy.guard(), *hull, s)) {
            out.shifted[static_cast<std::size_t>(i)] = false;
            continue;
        }
        out.values.row(i) = s.transpose();
    }
    return out;
}

// ============================================================================
// Contrasts
// ============================================================================

struct ContrastTerm {
    std::optional<std::size_t> policy;  // index into ContrastDescriptor::policies; nullopt = observed
    double coefficient = 1.0;
    std::string label;
};

struct ContrastDescriptor {
    std::vector<ShiftPolicy> policies;
    std::vector<ContrastTerm> terms;

    bool is_interaction() const { return policies.size() == 3; }
};

/// Builds the signed term list for a contrast:
///   [d]            -> d - observed
///   [d1, d2]       -> d1 - d2
///   [joint, a, b]  -> joint - a - b + observed  (additive interaction)
inline ContrastDescriptor compose_contrast(std::vector<ShiftPolicy> policies) {
    if (policies.empty()) throw ConfigError("a contrast needs at least one policy");
    if (policies.size() > 3) throw ConfigError("contrasts take one, two or three policies");
    for (const auto& p : policies)
        if (p.n_components() != policies[0].n_components() || p.n_times() != policies[0].n_times())
            throw DimensionError("policies in a contrast must share component and time counts");
    ContrastDescriptor out;
    switch (policies.size()) {
        case 1:
            out.terms = {{0, 1.0, policies[0].name()}, {std::nullopt, -1.0, "observed"}};
            break;
        case 2:
            out.terms = {{0, 1.0, policies[0].name()}, {1, -1.0, policies[1].name()}};
            break;
        default:
            out.terms = {{0, 1.0, policies[0].name()},
                         {1, -1.0, policies[1].name()},
                         {2, -1.0, policies[2].name()},
                         {std::nullopt, 1.0, "observed"}};
    }
    out.policies = std::move(policies);
    return out;
}

}  // namespace mixshift
