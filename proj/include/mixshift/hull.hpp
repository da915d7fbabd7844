#pragma once

// Convex-hull support diagnostics for exposure mixtures.
//
// The hull of a point cloud X (n x J) is never enumerated. Both membership and
// projection solve the simplex-constrained least-squares problem
//
//     min_{w >= 0, sum w = 1} || X^T w - p ||_2
//
// with Wolfe's nearest-point method: a Frank-Wolfe linear oracle chooses the
// vertex to add, and an affine minimization over the current support (the
// "corral") followed by a ratio-test line search keeps the iterate feasible.
// The method terminates finitely, certifies interior points to rounding
// error and copes with affinely degenerate clouds.

#include "mixshift/core.hpp"
#include "mixshift/dataset.hpp"

#include <optional>
#include <span>
#include <vector>

namespace mixshift {

struct HullOptions {
    double membership_tol = 1e-8;  // standardized units
    double qp_tol = 1e-10;         // Frank-Wolfe duality gap, relative to the squared distance
};

struct Projection {
    Vector point;                 // nearest hull point
    double distance = 0.0;        // Euclidean distance from the query
    std::vector<Index> support;   // cloud rows carrying positive weight
    std::vector<double> weights;  // convex weights over `support`
    int iterations = 0;
};

class ConvexHullModel {
public:
    /// `points` are rows in standardized units. `map` converts raw exposure
    /// rows into those units; without it raw and standardized coincide.
    explicit ConvexHullModel(const Matrix& points, std::vector<AffineMap> map = {}, HullOptions options = {})
        : cloud_(points.transpose()), map_(std::move(map)), options_(options) {
        if (points.rows() < 1) throw DimensionError("convex hull needs at least one point");
        if (!map_.empty() && static_cast<Index>(map_.size()) != points.cols())
            throw DimensionError("standardization map does not match hull dimension");
        if (!cloud_.allFinite()) throw DimensionError("convex hull points must be finite");
        sqnorms_ = cloud_.colwise().squaredNorm().transpose();
    }

    Index size() const { return cloud_.cols(); }
    Index dim() const { return cloud_.rows(); }
    Matrix points() const { return cloud_.transpose(); }
    const HullOptions& options() const { return options_; }
    const std::vector<AffineMap>& map() const { return map_; }

    Vector standardize(const Vector& raw) const {
        if (raw.size() != dim()) throw DimensionError("point dimension differs from hull dimension");
        if (map_.empty()) return raw;
        Vector u(raw.size());
        for (Index j = 0; j < raw.size(); ++j) u[j] = map_[static_cast<std::size_t>(j)].apply(raw[j]);
        return u;
    }

    bool contains(const Vector& p) const { return project(p).distance <= options_.membership_tol; }

    /// Nearest point of the hull to `p` (standardized units). `warm` seeds the
    /// support with the rows of a previous solution.
    Projection project(const Vector& p, std::span<const Index> warm = {}) const;

private:
    Matrix cloud_;    // J x n, one column per point
    Vector sqnorms_;  // ||X_i||^2
    std::vector<AffineMap> map_;
    HullOptions options_;
};

namespace detail {

/// Affine minimizer of ||sum a_k q_k|| subject to sum a_k = 1 over the
/// columns q_k = cloud(:, S_k) - p.
inline Vector affine_minimizer(const Matrix& cloud, const Vector& p, const std::vector<Index>& S) {
    const auto k = static_cast<Index>(S.size());
    Vector alpha(k);
    if (k == 1) {
        alpha[0] = 1.0;
        return alpha;
    }
    const Vector q0 = cloud.col(S[0]) - p;
    Matrix D(cloud.rows(), k - 1);
    for (Index c = 1; c < k; ++c) D.col(c - 1) = cloud.col(S[static_cast<std::size_t>(c)]) - cloud.col(S[0]);
    const Vector beta = D.colPivHouseholderQr().solve(-q0);
    alpha[0] = 1.0 - beta.sum();
    alpha.tail(k - 1) = beta;
    return alpha;
}

}  // namespace detail

inline Projection ConvexHullModel::project(const Vector& p, std::span<const Index> warm) const {
    if (p.size() != dim()) throw DimensionError("point dimension differs from hull dimension");
    if (!p.allFinite()) throw DimensionError("projection query must be finite");
    const Index n = size();

    // Squared distances to every vertex give the scale and the cold start.
    const Vector cross = cloud_.transpose() * p;
    const double pp = p.squaredNorm();
    Index nearest = 0;
    double scale2 = 0.0, best = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < n; ++i) {
        const double d2 = sqnorms_[i] - 2.0 * cross[i] + pp;
        scale2 = std::max(scale2, d2);
        if (d2 < best) {
            best = d2;
            nearest = i;
        }
    }
    // The gap bounds ||x||^2 - ||x*||^2, so a gap relative to ||x||^2 pins the
    // distance to relative precision; an absolute gap would only pin it to
    // sqrt(gap), too coarse for the membership tolerance.
    const double zero_tol = 1e-30 * std::max(1.0, scale2);

    std::vector<Index> S;
    std::vector<double> lambda;
    for (Index w : warm)
        if (w >= 0 && w < n && std::find(S.begin(), S.end(), w) == S.end()) S.push_back(w);
    if (S.empty()) S.push_back(nearest);
    lambda.assign(S.size(), 1.0 / static_cast<double>(S.size()));

    auto combine = [&] {
        Vector x = Vector::Zero(dim());
        for (std::size_t k = 0; k < S.size(); ++k) x += lambda[k] * (cloud_.col(S[k]) - p);
        return x;
    };
    Vector x = combine();

    const long max_iter = std::max<long>(100, 50L * static_cast<long>(n));
    long iter = 0;
    bool need_minor = S.size() > 1;

    for (;;) {
        if (need_minor) {
            // Minor cycle: move to the affine minimizer of the corral, dropping
            // vertices whose weight would turn negative.
            for (;;) {
                if (++iter > max_iter)
                    throw NumericalError("hull projection did not converge within the iteration cap", x.norm());
                const Vector alpha = detail::affine_minimizer(cloud_, p, S);
                bool interior = true;
                for (Index k = 0; k < alpha.size(); ++k) interior = interior && alpha[k] > 1e-14;
                if (interior) {
                    for (std::size_t k = 0; k < S.size(); ++k) lambda[k] = alpha[static_cast<Index>(k)];
                    x = combine();
                    break;
                }
                double theta = 1.0;
                for (std::size_t k = 0; k < S.size(); ++k) {
                    const double a = alpha[static_cast<Index>(k)];
                    if (a <= 1e-14 && lambda[k] - a > 0.0) theta = std::min(theta, lambda[k] / (lambda[k] - a));
                }
                std::vector<Index> keepS;
                std::vector<double> keepL;
                for (std::size_t k = 0; k < S.size(); ++k) {
                    const double l = (1.0 - theta) * lambda[k] + theta * alpha[static_cast<Index>(k)];
                    if (l > 1e-14) {
                        keepS.push_back(S[k]);
                        keepL.push_back(l);
                    }
                }
                if (keepS.empty()) {  // rounding wiped everything; restart from the nearest vertex
                    keepS = {nearest};
                    keepL = {1.0};
                }
                const double total = std::accumulate(keepL.begin(), keepL.end(), 0.0);
                for (auto& l : keepL) l /= total;
                const bool stalled = keepS.size() == S.size() - 1 && theta == 0.0 && keepS == std::vector<Index>(S.begin(), S.end() - 1);
                S = std::move(keepS);
                lambda = std::move(keepL);
                x = combine();
                if (stalled) break;
            }
        }

        const double xx = x.squaredNorm();
        if (xx <= zero_tol) break;
        // Linear oracle: vertex minimizing <x, X_j - p>.
        const Vector proj = cloud_.transpose() * x;
        const double xp = x.dot(p);
        Index j = 0;
        double lowest = std::numeric_limits<double>::infinity();
        for (Index i = 0; i < n; ++i)
            if (proj[i] < lowest) {
                lowest = proj[i];
                j = i;
            }
        const double gap = xx - (lowest - xp);
        if (gap <= options_.qp_tol * xx + zero_tol) break;
        if (std::find(S.begin(), S.end(), j) != S.end()) break;
        if (static_cast<Index>(S.size()) > dim()) break;  // corral already full-dimensional
        S.push_back(j);
        lambda.push_back(0.0);
        need_minor = true;
    }

    Projection out;
    out.point = p + x;
    out.distance = x.norm();
    out.support = S;
    out.weights = lambda;
    out.iterations = static_cast<int>(iter);
    return out;
}

inline ConvexHullModel build_hull(const LongitudinalDataset& ds, int t, const StandardizationMap& map,
                                  HullOptions options = {}) {
    const Matrix raw = at_risk_exposures(ds, t);
    return ConvexHullModel(map.apply(t, raw), map.at(t), options);
}

// ============================================================================
// Extrapolation reports
// ============================================================================

struct ExtrapolationRow {
    bool outside = false;
    double r_ratio = 0.0;        // fraction of the shift distance lying outside the hull
    double abs_distance = 0.0;   // standardized units
    Vector projection_point;
    Vector projection_delta;     // projection_point - shifted
};

struct ExtrapolationReport {
    std::vector<ExtrapolationRow> rows;
    double theta_r = 0.1;
    double theta_abs = 0.1;
    double fraction_outside = 0.0;
    double fraction_r_gt = 0.0;
    double fraction_abs_gt = 0.0;
    std::vector<double> fraction_delta_positive;  // per component
};

/// Observed and shifted rows must already be standardized.
inline ExtrapolationReport extrapolation_report(const ConvexHullModel& hull, const Matrix& observed,
                                                const Matrix& shifted, double theta_r = 0.1,
                                                double theta_abs = 0.1) {
    if (observed.rows() != shifted.rows() || observed.cols() != shifted.cols())
        throw DimensionError("observed and shifted matrices are not conformable");
    if (shifted.cols() != hull.dim()) throw DimensionError("shifted rows do not match hull dimension");
    const double tol = hull.options().membership_tol;
    ExtrapolationReport report;
    report.theta_r = theta_r;
    report.theta_abs = theta_abs;
    report.fraction_delta_positive.assign(static_cast<std::size_t>(hull.dim()), 0.0);
    const Index n = shifted.rows();
    std::vector<Index> warm;
    std::size_t outside = 0, r_gt = 0, abs_gt = 0;
    for (Index i = 0; i < n; ++i) {
        const Vector s = shifted.row(i).transpose();
        const Projection proj = hull.project(s, warm);
        warm = proj.support;
        ExtrapolationRow row;
        row.abs_distance = proj.distance;
        row.outside = proj.distance > tol;
        row.projection_point = proj.point;
        row.projection_delta = proj.point - s;
        if (row.outside) {
            const double shift_len = (observed.row(i) - shifted.row(i)).norm();
            row.r_ratio = shift_len > 0.0 ? std::min(1.0, proj.distance / shift_len) : 0.0;
        } else {
            row.abs_distance = std::min(row.abs_distance, tol);
            row.projection_delta.setZero();
            row.projection_point = s;
        }
        outside += row.outside;
        r_gt += row.r_ratio > theta_r;
        abs_gt += row.abs_distance > theta_abs;
        for (Index j = 0; j < hull.dim(); ++j)
            if (row.projection_delta[j] > tol) report.fraction_delta_positive[static_cast<std::size_t>(j)] += 1.0;
        report.rows.push_back(std::move(row));
    }
    if (n > 0) {
        const double dn = static_cast<double>(n);
        report.fraction_outside = static_cast<double>(outside) / dn;
        report.fraction_r_gt = static_cast<double>(r_gt) / dn;
        report.fraction_abs_gt = static_cast<double>(abs_gt) / dn;
        for (auto& f : report.fraction_delta_positive) f /= dn;
    }
    return report;
}

}  // namespace mixshift
