#pragma once

// Shared vocabulary for the mixshift library: matrix aliases, the error
// hierarchy, small numeric helpers and a deterministic parallel_for.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <exception>
#include <limits>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mixshift {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ============================================================================
// Errors
// ============================================================================

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text. Carries the 1-based data row where parsing failed.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t row)
        : Error("row " + std::to_string(row) + ": " + what), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

/// Well-formed input that violates a data invariant (e.g. censoring order).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Conformability problems between matrices, policies and hulls.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Bad or unknown configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Iterative solvers that fail to converge or produce non-finite values.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, double residual = kNaN)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

// ============================================================================
// Numeric helpers
// ============================================================================

inline double expit(double x) {
    if (x >= 0) {
        const double z = std::exp(-x);
        return 1.0 / (1.0 + z);
    }
    const double z = std::exp(x);
    return z / (1.0 + z);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

inline double clamp_prob(double p, double lo = 1e-5) {
    return std::clamp(p, lo, 1.0 - lo);
}

/// Linear-interpolation quantile (R type 7). `values` need not be sorted.
inline double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw DimensionError("quantile of empty sample");
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

inline double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// Sample variance with the n-1 denominator.
inline double variance_of(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

/// FNV-1a over raw bytes; used to fingerprint datasets.
class Fingerprint {
public:
    void add_bytes(const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            hash_ ^= p[i];
            hash_ *= 1099511628211ULL;
        }
    }
    void add(double x) {
        if (std::isnan(x)) x = kNaN;  // canonical NaN payload
        add_bytes(&x, sizeof x);
    }
    void add(std::int64_t x) { add_bytes(&x, sizeof x); }
    void add(const std::string& s) {
        add(static_cast<std::int64_t>(s.size()));
        add_bytes(s.data(), s.size());
    }
    std::uint64_t value() const noexcept { return hash_; }

private:
    std::uint64_t hash_ = 1469598103934665603ULL;
};

/// SplitMix64 finalizer over a combined pair; derives independent seeds for
/// folds, times and chunks from one user seed.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// ============================================================================
// Threading
// ============================================================================

namespace detail {
inline std::atomic<int>& thread_cap() {
    static std::atomic<int> cap{0};
    return cap;
}

// Set while a thread executes parallel_for work; nested loops then run serially.
inline bool& in_parallel_region() {
    thread_local bool flag = false;
    return flag;
}
}  // namespace detail

/// Caps worker threads used by parallel_for. 0 means hardware concurrency.
inline void set_max_threads(int n) { detail::thread_cap().store(std::max(0, n)); }

inline int max_threads() {
    const int cap = detail::thread_cap().load();
    const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return cap > 0 ? cap : hw;
}

/// Runs fn(i) for i in [0, n). Each index must write only to its own output
/// slot; results are then independent of the worker count. The first
/// exception thrown by any task is rethrown on the caller's thread.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const auto workers = std::min<std::size_t>(n, static_cast<std::size_t>(max_threads()));
    if (workers <= 1 || detail::in_parallel_region()) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        detail::in_parallel_region() = true;
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) break;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
        detail::in_parallel_region() = false;
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace mixshift
