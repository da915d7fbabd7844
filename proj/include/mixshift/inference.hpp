#pragma once

// Influence-function arithmetic and Wald inference for estimates.

#include "mixshift/core.hpp"

#include <string>
#include <vector>

namespace mixshift {

/// A point estimate with its per-subject influence values. Subjects follow the
/// dataset's ingestion order; `fingerprint` ties the vector to that dataset.
struct EstimandEstimate {
    std::string label;
    double value = 0.0;
    Vector eif;
    std::uint64_t fingerprint = 0;
    int folds = 0;
    std::uint64_t seed = 0;
    std::size_t truncation_events = 0;
    std::vector<std::string> warnings;

    Index n() const { return eif.size(); }
};

namespace detail {

inline void check_conformable(const EstimandEstimate& a, const EstimandEstimate& b) {
    if (a.n() != b.n())
        throw DimensionError("estimates '" + a.label + "' and '" + b.label + "' have different subject counts");
    if (a.fingerprint != b.fingerprint)
        throw DimensionError("estimates '" + a.label + "' and '" + b.label + "' come from different datasets");
}

inline EstimandEstimate combine(const EstimandEstimate& a, const EstimandEstimate& b, double sign, const char* op) {
    check_conformable(a, b);
    EstimandEstimate out;
    out.label = "(" + a.label + " " + op + " " + b.label + ")";
    out.value = a.value + sign * b.value;
    out.eif = a.eif + sign * b.eif;
    out.fingerprint = a.fingerprint;
    out.folds = a.folds;
    out.seed = a.seed;
    out.truncation_events = a.truncation_events + b.truncation_events;
    return out;
}

}  // namespace detail

inline EstimandEstimate if_add(const EstimandEstimate& a, const EstimandEstimate& b) {
    return detail::combine(a, b, 1.0, "+");
}

inline EstimandEstimate if_sub(const EstimandEstimate& a, const EstimandEstimate& b) {
    return detail::combine(a, b, -1.0, "-");
}

inline EstimandEstimate operator+(const EstimandEstimate& a, const EstimandEstimate& b) { return if_add(a, b); }
inline EstimandEstimate operator-(const EstimandEstimate& a, const EstimandEstimate& b) { return if_sub(a, b); }

struct WaldResult {
    double estimate = 0.0;
    double se = 0.0;
    double lo = 0.0, hi = 0.0;
    double z = 0.0;
    double p_value = 1.0;
    bool degenerate = false;  // zero-variance influence values

    bool rejects() const { return lo > 0.0 || hi < 0.0; }
};

inline constexpr double kZ975 = 1.96;

inline WaldResult wald(const EstimandEstimate& e) {
    if (e.n() < 2) throw DimensionError("wald needs at least two influence values");
    const std::vector<double> v(e.eif.data(), e.eif.data() + e.n());
    WaldResult w;
    w.estimate = e.value;
    w.se = std::sqrt(variance_of(v) / static_cast<double>(e.n()));
    w.lo = e.value - kZ975 * w.se;
    w.hi = e.value + kZ975 * w.se;
    if (w.se > 0.0) {
        w.z = e.value / w.se;
        w.p_value = std::erfc(std::abs(w.z) / std::sqrt(2.0));
    } else {
        w.degenerate = true;
        w.z = e.value == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), e.value);
        w.p_value = e.value == 0.0 ? 1.0 : 0.0;
    }
    w.p_value = std::clamp(w.p_value, 0.0, 1.0);
    return w;
}

/// joint - a - b + observed on the additive scale.
inline EstimandEstimate interaction_composite(const EstimandEstimate& joint, const EstimandEstimate& a,
                                              const EstimandEstimate& b, const EstimandEstimate& observed) {
    auto out = if_add(if_sub(if_sub(joint, a), b), observed);
    out.label = "interaction(" + joint.label + "; " + a.label + ", " + b.label + ")";
    return out;
}

inline WaldResult interaction_test(const EstimandEstimate& joint, const EstimandEstimate& a, const EstimandEstimate& b,
                                   const EstimandEstimate& observed) {
    return wald(interaction_composite(joint, a, b, observed));
}

}  // namespace mixshift
