#pragma once

// Fixtures shared by the unit tests.

#include "mixshift/mixshift.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace mixshift::fixtures {

/// Single-time dataset from an exposure matrix and optional covariates.
inline LongitudinalDataset single_time(const Matrix& A, const Vector& y, const Matrix& L = Matrix()) {
    LongitudinalDataset ds;
    const Index n = A.rows();
    for (Index i = 0; i < n; ++i) ds.subject_ids.push_back("s" + std::to_string(i + 1));
    for (Index j = 0; j < A.cols(); ++j) ds.exposure_names.push_back("A" + std::to_string(j + 1));
    ds.exposures = {A};
    ds.covariates = {L.size() ? L : Matrix(n, 0)};
    std::vector<std::string> names;
    for (Index k = 0; k < ds.covariates[0].cols(); ++k) names.push_back("L" + std::to_string(k + 1));
    ds.covariate_names = {names};
    ds.uncensored = {std::vector<std::uint8_t>(static_cast<std::size_t>(n), 1)};
    ds.outcome = y;
    ds.validate();
    return ds;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("mixshift_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline Matrix gaussian_matrix(Index n, Index p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    Matrix X(n, p);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j) X(i, j) = z(rng);
    return X;
}

}  // namespace mixshift::fixtures
