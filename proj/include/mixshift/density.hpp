#pragma once

// Pairwise product-Gaussian kernel density surfaces for spotting sparse
// regions of the exposure mixture that sit inside the convex hull.

#include "mixshift/core.hpp"
#include "mixshift/dataset.hpp"

#include <numbers>
#include <string>
#include <vector>

namespace mixshift {

struct DensitySurface {
    Index component_x = 0, component_y = 1;
    std::string name_x, name_y;
    double bandwidth_x = 0.0, bandwidth_y = 0.0;
    Vector grid_x, grid_y;  // grid coordinates
    Matrix density;         // density(a, b) at (grid_x[a], grid_y[b])
    std::vector<double> threshold_quantiles;
    std::vector<double> thresholds;  // density levels at those quantiles of the sample
    Matrix sample;                   // n x 2 data the surface was built from

    double evaluate(double x, double y) const {
        const double inv = 1.0 / (2.0 * std::numbers::pi * bandwidth_x * bandwidth_y * static_cast<double>(sample.rows()));
        double s = 0.0;
        for (Index i = 0; i < sample.rows(); ++i) {
            const double u = (x - sample(i, 0)) / bandwidth_x;
            const double v = (y - sample(i, 1)) / bandwidth_y;
            s += std::exp(-0.5 * (u * u + v * v));
        }
        return s * inv;
    }

    Vector evaluate(const Matrix& points) const {
        if (points.cols() != 2) throw DimensionError("density evaluation expects n x 2 points");
        Vector out(points.rows());
        for (Index i = 0; i < points.rows(); ++i) out[i] = evaluate(points(i, 0), points(i, 1));
        return out;
    }

    /// Trapezoid rule over the grid.
    double integral() const {
        const auto trap_weights = [](const Vector& g) {
            Vector w = Vector::Zero(g.size());
            for (Index k = 0; k + 1 < g.size(); ++k) {
                const double h = g[k + 1] - g[k];
                w[k] += 0.5 * h;
                w[k + 1] += 0.5 * h;
            }
            return w;
        };
        return trap_weights(grid_x).dot(density * trap_weights(grid_y));
    }
};

inline double silverman_bandwidth(std::span<const double> x) {
    const double sd = std::sqrt(variance_of(x));
    return 1.06 * sd * std::pow(static_cast<double>(x.size()), -0.2);
}

/// KDE over the two columns of `xy`. The grid covers the observed range of
/// each component padded by three bandwidths so the surface carries
/// (almost) all of its probability mass.
inline DensitySurface kde_pair(const Matrix& xy, int grid = 101, std::vector<double> threshold_quantiles = {0.05}) {
    if (xy.cols() != 2) throw DimensionError("kde_pair expects two columns");
    if (xy.rows() < 2) throw ValidationError("kde_pair needs at least two points");
    if (grid < 2) throw ConfigError("density grid needs at least two points per axis");
    const Index n = xy.rows();
    DensitySurface s;
    s.sample = xy;
    std::vector<double> cx(xy.col(0).data(), xy.col(0).data() + n), cy(xy.col(1).data(), xy.col(1).data() + n);
    s.bandwidth_x = silverman_bandwidth(cx);
    s.bandwidth_y = silverman_bandwidth(cy);
    if (!(s.bandwidth_x > 0.0) || !(s.bandwidth_y > 0.0))
        throw ValidationError("kde_pair: zero-variance component");

    const auto axis = [grid](const Vector& v, double h) {
        return Vector::LinSpaced(grid, v.minCoeff() - 3.0 * h, v.maxCoeff() + 3.0 * h);
    };
    s.grid_x = axis(xy.col(0), s.bandwidth_x);
    s.grid_y = axis(xy.col(1), s.bandwidth_y);

    // density = Kx * Ky^T / n with Gaussian kernel matrices (grid x sample).
    const auto kernel = [n](const Vector& g, const Vector& data, double h) {
        Matrix K(g.size(), n);
        const double c = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * h);
        for (Index i = 0; i < n; ++i)
            for (Index a = 0; a < g.size(); ++a) {
                const double u = (g[a] - data[i]) / h;
                K(a, i) = c * std::exp(-0.5 * u * u);
            }
        return K;
    };
    const Matrix Kx = kernel(s.grid_x, xy.col(0), s.bandwidth_x);
    const Matrix Ky = kernel(s.grid_y, xy.col(1), s.bandwidth_y);
    s.density = (Kx * Ky.transpose()) / static_cast<double>(n);

    const Vector at_points = s.evaluate(xy);
    const std::vector<double> d(at_points.data(), at_points.data() + n);
    s.threshold_quantiles = std::move(threshold_quantiles);
    for (double q : s.threshold_quantiles) s.thresholds.push_back(quantile(d, q));
    return s;
}

inline DensitySurface kde_pair(const LongitudinalDataset& ds, int t, Index j, Index k, int grid = 101,
                               std::vector<double> threshold_quantiles = {0.05}) {
    if (j == k) throw ConfigError("kde_pair needs two distinct components");
    if (j < 0 || k < 0 || j >= ds.n_components() || k >= ds.n_components())
        throw DimensionError("kde_pair component index out of range");
    const Matrix A = at_risk_exposures(ds, t);
    Matrix xy(A.rows(), 2);
    xy.col(0) = A.col(j);
    xy.col(1) = A.col(k);
    auto s = kde_pair(xy, grid, std::move(threshold_quantiles));
    s.component_x = j;
    s.component_y = k;
    s.name_x = ds.exposure_names[static_cast<std::size_t>(j)];
    s.name_y = ds.exposure_names[static_cast<std::size_t>(k)];
    return s;
}

/// Flags points whose density is below the `q` quantile of the densities at
/// the surface's own sample points.
inline std::vector<bool> flag_low_density(const DensitySurface& surface, const Matrix& points, double q = 0.05) {
    if (!(q >= 0.0 && q < 1.0)) throw ConfigError("density quantile must lie in [0, 1)");
    const Vector at_sample = surface.evaluate(surface.sample);
    const double threshold =
        quantile(std::vector<double>(at_sample.data(), at_sample.data() + at_sample.size()), q);
    const Vector d = surface.evaluate(points);
    std::vector<bool> flags(static_cast<std::size_t>(points.rows()));
    for (Index i = 0; i < points.rows(); ++i) flags[static_cast<std::size_t>(i)] = d[i] < threshold;
    return flags;
}

}  // namespace mixshift
