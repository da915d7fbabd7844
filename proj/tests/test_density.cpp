#include "support.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace mixshift;

TEST(Density, IntegratesToOne) {
    for (std::uint64_t seed : {1u, 2u}) {
        Matrix xy = fixtures::gaussian_matrix(400, 2, seed);
        xy.col(1) = 0.6 * xy.col(0) + 0.8 * xy.col(1);
        const auto s = kde_pair(xy, 101);
        EXPECT_NEAR(s.integral(), 1.0, 0.01);
        EXPECT_TRUE((s.density.array() >= 0.0).all());
    }
}

TEST(Density, GridAgreesWithDirectEvaluation) {
    const Matrix xy = fixtures::gaussian_matrix(150, 2, 9);
    const auto s = kde_pair(xy, 21);
    for (Index a = 0; a < 21; a += 5)
        for (Index b = 0; b < 21; b += 4) EXPECT_NEAR(s.density(a, b), s.evaluate(s.grid_x[a], s.grid_y[b]), 1e-12);
}

TEST(Density, SinglePointBandwidthOracle) {
    // Two points: density at a sample point is the average of two Gaussian
    // product kernels, one at distance zero.
    Matrix xy(2, 2);
    xy << 0, 0, 2, 4;
    const auto s = kde_pair(xy, 11);
    const double hx = 1.06 * std::sqrt(2.0) * std::pow(2.0, -0.2);
    const double hy = 1.06 * std::sqrt(8.0) * std::pow(2.0, -0.2);
    EXPECT_NEAR(s.bandwidth_x, hx, 1e-12);
    EXPECT_NEAR(s.bandwidth_y, hy, 1e-12);
    const double u = 2.0 / hx, v = 4.0 / hy;
    const double want = (1.0 + std::exp(-0.5 * (u * u + v * v))) / (2.0 * 2.0 * std::numbers::pi * hx * hy);
    EXPECT_NEAR(s.evaluate(0.0, 0.0), want, 1e-12);
}

TEST(Density, FlagsSparseRegionInsideHull) {
    // Ring-shaped cloud: the centre lies inside the hull but carries little mass.
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> jitter(0.0, 0.05);
    Matrix xy(500, 2);
    for (Index i = 0; i < 500; ++i) {
        const double a = angle(rng);
        xy(i, 0) = std::cos(a) + jitter(rng);
        xy(i, 1) = std::sin(a) + jitter(rng);
    }
    const auto s = kde_pair(xy, 51);
    Matrix probe(2, 2);
    probe << 0.0, 0.0, 1.0, 0.0;
    const auto flags = flag_low_density(s, probe, 0.05);
    EXPECT_TRUE(flags[0]);
    EXPECT_FALSE(flags[1]);
    EXPECT_TRUE(ConvexHullModel(xy).contains(Vector::Zero(2)));
}

TEST(Density, QuantileZeroFlagsNoSamplePoint) {
    const Matrix xy = fixtures::gaussian_matrix(200, 2, 4);
    const auto s = kde_pair(xy, 31, {0.0, 0.05});
    const auto flags = flag_low_density(s, xy, 0.0);
    EXPECT_EQ(std::count(flags.begin(), flags.end(), true), 0);
    const auto five = flag_low_density(s, xy, 0.05);
    const auto count5 = std::count(five.begin(), five.end(), true);
    EXPECT_GE(count5, 5);
    EXPECT_LE(count5, 15);
    ASSERT_EQ(s.thresholds.size(), 2u);
    EXPECT_LE(s.thresholds[0], s.thresholds[1]);
}

TEST(Density, Errors) {
    Matrix xy(5, 2);
    xy << 1, 1, 2, 1, 3, 1, 4, 1, 5, 1;
    EXPECT_THROW(kde_pair(xy), ValidationError);
    EXPECT_THROW(kde_pair(Matrix::Zero(5, 3)), DimensionError);
    const auto s = kde_pair(fixtures::gaussian_matrix(20, 2, 1), 11);
    EXPECT_THROW(flag_low_density(s, Matrix::Zero(1, 2), 1.0), ConfigError);
}

TEST(Density, FromDatasetNamesComponents) {
    const auto ds = fixtures::single_time(fixtures::gaussian_matrix(100, 3, 5), Vector::Zero(100));
    const auto s = kde_pair(ds, 0, 0, 2, 21);
    EXPECT_EQ(s.name_x, "A1");
    EXPECT_EQ(s.name_y, "A3");
    EXPECT_THROW(kde_pair(ds, 0, 1, 1), ConfigError);
}
