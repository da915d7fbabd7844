#pragma once

// Regression / probability learners and the cross-validated super learner.
//
// Roster: intercept-only, main-effects linear (least squares or logistic),
// linear with pairwise products, ridge, k-nearest neighbours and
// gradient-boosted shallow trees. Candidates are stacked with convex weights
// minimizing cross-validated risk.

#include "mixshift/core.hpp"

#include <charconv>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace mixshift {

enum class Task { regression, probability };

inline constexpr double kProbClip = 1e-5;

// ============================================================================
// Specs
// ============================================================================

struct LearnerSpec {
    enum class Kind { mean, linear, linear_pairwise, ridge, knn, boost };

    Kind kind = Kind::mean;
    double lambda = 1.0;    // ridge
    int k = 10;             // knn
    int depth = 2;          // boost, <= 3
    int rounds = 100;       // boost, <= 200
    double shrinkage = 0.1; // boost

    static LearnerSpec mean() { return {}; }
    static LearnerSpec linear() { return {Kind::linear}; }
    static LearnerSpec linear_pairwise() { return {Kind::linear_pairwise}; }
    static LearnerSpec ridge(double lambda) { return {Kind::ridge, lambda}; }
    static LearnerSpec knn(int k) { return {Kind::knn, 1.0, k}; }
    static LearnerSpec boost(int depth = 2, int rounds = 100) { return {Kind::boost, 1.0, 10, depth, rounds}; }

    std::string name() const {
        switch (kind) {
            case Kind::mean: return "mean";
            case Kind::linear: return "linear";
            case Kind::linear_pairwise: return "linear_pairwise";
            case Kind::ridge: {
                char buf[32];
                auto [p, ec] = std::to_chars(buf, buf + sizeof buf, lambda);
                return "ridge:" + std::string(buf, p);
            }
            case Kind::knn: return "knn:" + std::to_string(k);
            case Kind::boost: return "boost:" + std::to_string(depth) + ":" + std::to_string(rounds);
        }
        return "?";
    }

    /// Inverse of name(): "mean", "linear", "linear_pairwise", "ridge:<lambda>",
    /// "knn:<k>", "boost", "boost:<depth>:<rounds>".
    static LearnerSpec parse(const std::string& text) {
        const auto colon = text.find(':');
        const std::string head = text.substr(0, colon);
        const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
        const auto number = [&](const std::string& s) {
            double v = 0.0;
            const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc{} || p != s.data() + s.size()) throw ConfigError("bad learner parameter in '" + text + "'");
            return v;
        };
        if (head == "mean" && rest.empty()) return mean();
        if (head == "linear" && rest.empty()) return linear();
        if (head == "linear_pairwise" && rest.empty()) return linear_pairwise();
        if (head == "ridge") {
            const double l = rest.empty() ? 1.0 : number(rest);
            if (!(l > 0.0)) throw ConfigError("ridge penalty must be positive");
            return ridge(l);
        }
        if (head == "knn") {
            const double k = rest.empty() ? 10.0 : number(rest);
            if (k < 1 || k != std::floor(k)) throw ConfigError("knn k must be a positive integer");
            return knn(static_cast<int>(k));
        }
        if (head == "boost") {
            int depth = 2, rounds = 100;
            if (!rest.empty()) {
                const auto c2 = rest.find(':');
                depth = static_cast<int>(number(rest.substr(0, c2)));
                if (c2 != std::string::npos) rounds = static_cast<int>(number(rest.substr(c2 + 1)));
            }
            if (depth < 1 || depth > 3) throw ConfigError("boost depth must be 1..3");
            if (rounds < 1 || rounds > 200) throw ConfigError("boost rounds must be 1..200");
            return boost(depth, rounds);
        }
        throw ConfigError("unknown learner '" + text + "'");
    }
};

/// Default roster used by the CLI.
inline std::vector<LearnerSpec> default_roster() {
    return {LearnerSpec::mean(),     LearnerSpec::linear(),  LearnerSpec::ridge(0.1), LearnerSpec::ridge(1.0),
            LearnerSpec::knn(10),    LearnerSpec::knn(25),   LearnerSpec::boost(2, 100)};
}

// ============================================================================
// Fitted models
// ============================================================================

class FittedModel {
public:
    virtual ~FittedModel() = default;
    /// Raw predictions; probability models return values in [0, 1].
    virtual Vector predict(const Matrix& X) const = 0;
};

namespace detail {

struct FeatureScaler {
    Vector center, scale;

    static FeatureScaler fit(const Matrix& X) {
        FeatureScaler s;
        const double n = static_cast<double>(X.rows());
        s.center = X.colwise().mean().transpose();
        s.scale = Vector::Ones(X.cols());
        for (Index j = 0; j < X.cols(); ++j) {
            const double var = (X.col(j).array() - s.center[j]).square().sum() / std::max(1.0, n - 1.0);
            if (var > 1e-24) s.scale[j] = std::sqrt(var);
        }
        return s;
    }

    Matrix transform(const Matrix& X) const {
        return (X.rowwise() - center.transpose()).array().rowwise() / scale.transpose().array();
    }
};

inline Matrix pairwise_expand(const Matrix& X) {
    const Index p = X.cols();
    Matrix out(X.rows(), p + p * (p + 1) / 2);
    out.leftCols(p) = X;
    Index c = p;
    for (Index a = 0; a < p; ++a)
        for (Index b = a; b < p; ++b) out.col(c++) = X.col(a).cwiseProduct(X.col(b));
    return out;
}

inline Matrix with_intercept(const Matrix& Z) {
    Matrix D(Z.rows(), Z.cols() + 1);
    D.col(0).setOnes();
    D.rightCols(Z.cols()) = Z;
    return D;
}

/// Penalized logistic regression by Newton-Raphson (IRLS). The intercept
/// (column 0) is not penalized.
inline Vector fit_logistic(const Matrix& D, const Vector& y, double penalty) {
    const Index p = D.cols();
    Vector beta = Vector::Zero(p);
    beta[0] = logit(clamp_prob(y.mean(), 1e-6));
    for (int it = 0; it < 100; ++it) {
        const Vector eta = D * beta;
        Vector prob(eta.size()), w(eta.size());
        for (Index i = 0; i < eta.size(); ++i) {
            prob[i] = expit(eta[i]);
            w[i] = std::max(prob[i] * (1.0 - prob[i]), 1e-10);
        }
        Vector grad = D.transpose() * (y - prob);
        Matrix H = D.transpose() * w.asDiagonal() * D;
        for (Index j = 1; j < p; ++j) {
            grad[j] -= penalty * beta[j];
            H(j, j) += penalty;
        }
        H.diagonal().array() += 1e-12;
        const Vector step = H.ldlt().solve(grad);
        if (!step.allFinite()) throw NumericalError("logistic regression diverged");
        beta += step;
        if (step.cwiseAbs().maxCoeff() < 1e-10) break;
    }
    if (!beta.allFinite()) throw NumericalError("logistic regression produced non-finite coefficients");
    return beta;
}

class ConstantModel final : public FittedModel {
public:
    explicit ConstantModel(double c) : c_(c) {}
    Vector predict(const Matrix& X) const override { return Vector::Constant(X.rows(), c_); }

private:
    double c_;
};

class LinearModel final : public FittedModel {
public:
    LinearModel(FeatureScaler scaler, Vector beta, bool pairwise, bool logistic)
        : scaler_(std::move(scaler)), beta_(std::move(beta)), pairwise_(pairwise), logistic_(logistic) {}

    Vector predict(const Matrix& X) const override {
        const Matrix F = pairwise_ ? pairwise_expand(X) : X;
        const Vector eta = with_intercept(scaler_.transform(F)) * beta_;
        if (!logistic_) return eta;
        Vector out(eta.size());
        for (Index i = 0; i < eta.size(); ++i) out[i] = expit(eta[i]);
        return out;
    }

private:
    FeatureScaler scaler_;
    Vector beta_;
    bool pairwise_, logistic_;
};

inline std::shared_ptr<const FittedModel> fit_linear(const Matrix& X, const Vector& y, Task task, bool pairwise,
                                                     double ridge_lambda) {
    const Matrix F = pairwise ? pairwise_expand(X) : X;
    auto scaler = FeatureScaler::fit(F);
    const Matrix Z = scaler.transform(F);
    const Matrix D = with_intercept(Z);
    const double n = static_cast<double>(X.rows());
    Vector beta;
    if (task == Task::probability) {
        beta = fit_logistic(D, y, ridge_lambda > 0.0 ? ridge_lambda * n : 1e-8 * n);
    } else if (ridge_lambda > 0.0) {
        const double ybar = y.mean();
        // Centered features keep the intercept unpenalized.
        const Vector zbar = Z.colwise().mean().transpose();
        const Matrix Zc = Z.rowwise() - zbar.transpose();
        Matrix Gc = Zc.transpose() * Zc;
        Gc.diagonal().array() += ridge_lambda * n;
        const Vector slope = Gc.ldlt().solve(Zc.transpose() * (y.array() - ybar).matrix());
        beta.resize(D.cols());
        beta[0] = ybar - zbar.dot(slope);
        beta.tail(slope.size()) = slope;
    } else {
        beta = D.colPivHouseholderQr().solve(y);
    }
    if (!beta.allFinite()) throw NumericalError("linear fit produced non-finite coefficients");
    return std::make_shared<LinearModel>(std::move(scaler), std::move(beta), pairwise, task == Task::probability);
}

class KnnModel final : public FittedModel {
public:
    KnnModel(FeatureScaler scaler, Matrix Z, Vector y, int k)
        : scaler_(std::move(scaler)), Z_(std::move(Z)), y_(std::move(y)), k_(k) {
        sq_ = Z_.rowwise().squaredNorm();
    }

    Vector predict(const Matrix& X) const override {
        const Matrix Q = scaler_.transform(X);
        const Index n = Z_.rows();
        const Index k = std::min<Index>(k_, n);
        Vector out(Q.rows());
        std::vector<std::pair<double, Index>> dist(static_cast<std::size_t>(n));
        const Matrix cross = Q * Z_.transpose();
        for (Index r = 0; r < Q.rows(); ++r) {
            const double qq = Q.row(r).squaredNorm();
            for (Index i = 0; i < n; ++i) dist[static_cast<std::size_t>(i)] = {qq - 2.0 * cross(r, i) + sq_[i], i};
            std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
            double s = 0.0;
            for (Index m = 0; m < k; ++m) s += y_[dist[static_cast<std::size_t>(m)].second];
            out[r] = s / static_cast<double>(k);
        }
        return out;
    }

private:
    FeatureScaler scaler_;
    Matrix Z_;
    Vector y_, sq_;
    int k_;
};

/// Newton-boosted regression trees on histogram-binned features.
class BoostModel final : public FittedModel {
public:
    struct Node {
        int feature = -1;
        double threshold = 0.0;
        int left = -1, right = -1;
        double value = 0.0;
    };
    using Tree = std::vector<Node>;

    BoostModel(double base, std::vector<Tree> trees, bool logistic)
        : base_(base), trees_(std::move(trees)), logistic_(logistic) {}

    Vector predict(const Matrix& X) const override {
        Vector out(X.rows());
        for (Index i = 0; i < X.rows(); ++i) {
            double f = base_;
            for (const auto& tree : trees_) {
                int node = 0;
                while (tree[static_cast<std::size_t>(node)].feature >= 0) {
                    const auto& nd = tree[static_cast<std::size_t>(node)];
                    node = X(i, nd.feature) <= nd.threshold ? nd.left : nd.right;
                }
                f += tree[static_cast<std::size_t>(node)].value;
            }
            out[i] = logistic_ ? expit(f) : f;
        }
        return out;
    }

private:
    double base_;
    std::vector<Tree> trees_;
    bool logistic_;
};

inline std::shared_ptr<const FittedModel> fit_boost(const Matrix& X, const Vector& y, Task task, const LearnerSpec& spec) {
    constexpr int kBins = 32;
    constexpr Index kMinLeaf = 5;
    constexpr double kReg = 1.0;
    const Index n = X.rows(), p = X.cols();
    const bool logistic = task == Task::probability;

    // Candidate thresholds per feature from quantiles of the training data.
    std::vector<std::vector<double>> cuts(static_cast<std::size_t>(p));
    std::vector<std::vector<std::uint8_t>> code(static_cast<std::size_t>(p), std::vector<std::uint8_t>(static_cast<std::size_t>(n)));
    for (Index j = 0; j < p; ++j) {
        std::vector<double> v(X.col(j).data(), X.col(j).data() + n);
        std::sort(v.begin(), v.end());
        auto& c = cuts[static_cast<std::size_t>(j)];
        for (int b = 1; b < kBins; ++b) {
            const double q = v[static_cast<std::size_t>((static_cast<double>(b) / kBins) * static_cast<double>(n - 1))];
            if (q < v.back() && (c.empty() || q > c.back())) c.push_back(q);
        }
        for (Index i = 0; i < n; ++i)
            code[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] =
                static_cast<std::uint8_t>(std::lower_bound(c.begin(), c.end(), X(i, j)) - c.begin());
    }

    const double base = logistic ? logit(clamp_prob(y.mean(), 1e-6)) : y.mean();
    Vector F = Vector::Constant(n, base);
    Vector g(n), h(n);
    std::vector<BoostModel::Tree> trees;
    std::vector<Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Index{0});

    for (int round = 0; round < spec.rounds; ++round) {
        for (Index i = 0; i < n; ++i) {
            if (logistic) {
                const double pr = expit(F[i]);
                g[i] = pr - y[i];
                h[i] = std::max(pr * (1.0 - pr), 1e-12);
            } else {
                g[i] = F[i] - y[i];
                h[i] = 1.0;
            }
        }
        BoostModel::Tree tree;
        // Grow depth-first; each frame holds the node index and its rows.
        struct Frame {
            int node;
            std::vector<Index> rows;
            int depth;
        };
        tree.push_back({});
        std::vector<Frame> stack{{0, all, 0}};
        while (!stack.empty()) {
            Frame fr = std::move(stack.back());
            stack.pop_back();
            double G = 0.0, H = 0.0;
            for (Index i : fr.rows) {
                G += g[i];
                H += h[i];
            }
            auto& leaf = tree[static_cast<std::size_t>(fr.node)];
            leaf.value = -spec.shrinkage * G / (H + kReg);
            if (fr.depth >= spec.depth || static_cast<Index>(fr.rows.size()) < 2 * kMinLeaf) continue;
            const double parent = G * G / (H + kReg);
            double best_gain = 1e-12;
            int best_feature = -1, best_bin = -1;
            for (Index j = 0; j < p; ++j) {
                const auto& cj = cuts[static_cast<std::size_t>(j)];
                if (cj.empty()) continue;
                std::array<double, kBins> hg{}, hh{};
                std::array<Index, kBins> hc{};
                const auto& cd = code[static_cast<std::size_t>(j)];
                for (Index i : fr.rows) {
                    const auto b = cd[static_cast<std::size_t>(i)];
                    hg[b] += g[i];
                    hh[b] += h[i];
                    ++hc[b];
                }
                double GL = 0.0, HL = 0.0;
                Index CL = 0;
                for (std::size_t b = 0; b < cj.size(); ++b) {
                    GL += hg[b];
                    HL += hh[b];
                    CL += hc[b];
                    const Index CR = static_cast<Index>(fr.rows.size()) - CL;
                    if (CL < kMinLeaf || CR < kMinLeaf) continue;
                    const double GR = G - GL, HR = H - HL;
                    const double gain = GL * GL / (HL + kReg) + GR * GR / (HR + kReg) - parent;
                    if (gain > best_gain) {
                        best_gain = gain;
                        best_feature = static_cast<int>(j);
                        best_bin = static_cast<int>(b);
                    }
                }
            }
            if (best_feature < 0) continue;
            std::vector<Index> left, right;
            const auto& cd = code[static_cast<std::size_t>(best_feature)];
            for (Index i : fr.rows) (cd[static_cast<std::size_t>(i)] <= best_bin ? left : right).push_back(i);
            const int li = static_cast<int>(tree.size());
            tree.push_back({});
            tree.push_back({});
            auto& node = tree[static_cast<std::size_t>(fr.node)];
            node.feature = best_feature;
            node.threshold = cuts[static_cast<std::size_t>(best_feature)][static_cast<std::size_t>(best_bin)];
            node.left = li;
            node.right = li + 1;
            stack.push_back({li + 1, std::move(right), fr.depth + 1});
            stack.push_back({li, std::move(left), fr.depth + 1});
        }
        // Update the training scores through the tree's row partition.
        for (Index i = 0; i < n; ++i) {
            int node = 0;
            while (tree[static_cast<std::size_t>(node)].feature >= 0) {
                const auto& nd = tree[static_cast<std::size_t>(node)];
                node = X(i, nd.feature) <= nd.threshold ? nd.left : nd.right;
            }
            F[i] += tree[static_cast<std::size_t>(node)].value;
        }
        trees.push_back(std::move(tree));
    }
    return std::make_shared<BoostModel>(base, std::move(trees), logistic);
}

}  // namespace detail

inline std::shared_ptr<const FittedModel> fit_learner(const LearnerSpec& spec, const Matrix& X, const Vector& y, Task task) {
    if (X.rows() != y.size()) throw DimensionError("learner: feature rows differ from target length");
    if (X.rows() < 1) throw DimensionError("learner: empty training set");
    switch (spec.kind) {
        case LearnerSpec::Kind::mean: return std::make_shared<detail::ConstantModel>(y.mean());
        case LearnerSpec::Kind::linear: return detail::fit_linear(X, y, task, false, 0.0);
        case LearnerSpec::Kind::linear_pairwise: return detail::fit_linear(X, y, task, true, 0.0);
        case LearnerSpec::Kind::ridge: return detail::fit_linear(X, y, task, false, spec.lambda);
        case LearnerSpec::Kind::knn: {
            auto scaler = detail::FeatureScaler::fit(X);
            Matrix Z = scaler.transform(X);
            return std::make_shared<detail::KnnModel>(std::move(scaler), std::move(Z), y, spec.k);
        }
        case LearnerSpec::Kind::boost: return detail::fit_boost(X, y, task, spec);
    }
    throw ConfigError("unknown learner kind");
}

// ============================================================================
// Fold plans
// ============================================================================

/// Assignment of groups (subjects) to V folds with sizes within one.
struct FoldPlan {
    int folds = 0;
    std::uint64_t seed = 0;
    std::vector<int> fold_of;  // per group

    Index n_groups() const { return static_cast<Index>(fold_of.size()); }

    std::vector<Index> members(int v) const {
        std::vector<Index> out;
        for (std::size_t g = 0; g < fold_of.size(); ++g)
            if (fold_of[g] == v) out.push_back(static_cast<Index>(g));
        return out;
    }
};

inline FoldPlan make_fold_plan(Index n_groups, int folds, std::uint64_t seed) {
    if (folds < 2) throw ConfigError("cross-fitting needs at least two folds");
    if (n_groups < folds) throw ValidationError("fewer subjects than folds");
    std::vector<Index> order(static_cast<std::size_t>(n_groups));
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    FoldPlan plan{folds, seed, std::vector<int>(static_cast<std::size_t>(n_groups))};
    for (std::size_t k = 0; k < order.size(); ++k)
        plan.fold_of[static_cast<std::size_t>(order[k])] = static_cast<int>(k % static_cast<std::size_t>(folds));
    return plan;
}

// ============================================================================
// Super learner
// ============================================================================

namespace detail {

inline Vector project_to_simplex(const Vector& v) {
    std::vector<double> u(v.data(), v.data() + v.size());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumulative = 0.0, tau = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        cumulative += u[k];
        const double t = (cumulative - 1.0) / static_cast<double>(k + 1);
        if (u[k] - t > 0.0) tau = t;
    }
    Vector w = (v.array() - tau).max(0.0);
    const double s = w.sum();
    return s > 0.0 ? Vector(w / s) : Vector(Vector::Constant(v.size(), 1.0 / static_cast<double>(v.size())));
}

inline double stack_risk(const Matrix& Z, const Vector& y, const Vector& w, Task task, Vector* grad) {
    const Vector pred = Z * w;
    const double n = static_cast<double>(y.size());
    if (task == Task::regression) {
        const Vector r = pred - y;
        if (grad) *grad = 2.0 * Z.transpose() * r / n;
        return r.squaredNorm() / n;
    }
    double risk = 0.0;
    Vector d(pred.size());
    for (Index i = 0; i < pred.size(); ++i) {
        const double raw = pred[i];
        const double p = clamp_prob(raw, kProbClip);
        risk -= y[i] * std::log(p) + (1.0 - y[i]) * std::log1p(-p);
        d[i] = (raw == p) ? (-y[i] / p + (1.0 - y[i]) / (1.0 - p)) : 0.0;
    }
    if (grad) *grad = Z.transpose() * d / n;
    return risk / n;
}

}  // namespace detail

/// Pointwise risk of predictions under the task's loss.
inline double empirical_risk(const Vector& pred, const Vector& y, Task task) {
    Matrix Z = pred;
    return detail::stack_risk(Z, y, Vector::Ones(1), task, nullptr);
}

struct LearnerEnsemble {
    Task task = Task::regression;
    Index n_features = 0;
    int folds = 0;
    std::vector<LearnerSpec> candidates;
    std::vector<std::shared_ptr<const FittedModel>> models;
    Vector weights;            // simplex
    Vector cv_risk;            // per candidate, NaN when CV was skipped
    double ensemble_cv_risk = kNaN;
    std::vector<std::string> warnings;

    Vector predict(const Matrix& X) const {
        if (X.cols() != n_features)
            throw DimensionError("ensemble expects " + std::to_string(n_features) + " features, got " +
                                 std::to_string(X.cols()));
        Vector out = Vector::Zero(X.rows());
        for (std::size_t m = 0; m < models.size(); ++m)
            if (weights[static_cast<Index>(m)] != 0.0) out += weights[static_cast<Index>(m)] * models[m]->predict(X);
        if (task == Task::probability)
            for (Index i = 0; i < out.size(); ++i) out[i] = clamp_prob(out[i], kProbClip);
        return out;
    }
};

inline Vector predict(const LearnerEnsemble& e, const Matrix& X) { return e.predict(X); }

struct EnsembleOptions {
    int folds = 10;
    std::uint64_t seed = 0;
    std::vector<Index> groups;  // optional row -> group id (dense, 0-based); rows of a group share a fold
    int meta_iterations = 500;
};

/// Cross-validated convex stacking. Candidates whose fits fail are dropped
/// with a warning; if every candidate fails a NumericalError is thrown. A
/// single-candidate roster skips the cross-validation pass.
inline LearnerEnsemble fit_ensemble(const Matrix& X, const Vector& y, Task task, const std::vector<LearnerSpec>& roster,
                                    const EnsembleOptions& options) {
    const Index n = X.rows();
    if (y.size() != n) throw DimensionError("ensemble: feature rows differ from target length");
    if (roster.empty()) throw ConfigError("ensemble roster is empty");
    if (!y.allFinite()) throw ValidationError("ensemble: non-finite target");
    if (task == Task::probability && ((y.array() < 0.0).any() || (y.array() > 1.0).any()))
        throw ValidationError("ensemble: probability targets must lie in [0, 1]");

    LearnerEnsemble e;
    e.task = task;
    e.n_features = X.cols();
    e.folds = options.folds;

    const auto M = roster.size();
    std::vector<bool> alive(M, true);
    Matrix Z;

    if (M > 1) {
        if (n < 2 * options.folds)
            throw ValidationError("ensemble needs at least " + std::to_string(2 * options.folds) + " rows");
        Index n_groups = n;
        if (!options.groups.empty()) {
            if (static_cast<Index>(options.groups.size()) != n) throw DimensionError("group vector length mismatch");
            n_groups = *std::max_element(options.groups.begin(), options.groups.end()) + 1;
        }
        const FoldPlan plan = make_fold_plan(n_groups, options.folds, options.seed);
        std::vector<int> row_fold(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i)
            row_fold[static_cast<std::size_t>(i)] =
                plan.fold_of[static_cast<std::size_t>(options.groups.empty() ? i : options.groups[static_cast<std::size_t>(i)])];
        std::vector<std::vector<Index>> train(static_cast<std::size_t>(options.folds)), test(static_cast<std::size_t>(options.folds));
        for (Index i = 0; i < n; ++i)
            for (int v = 0; v < options.folds; ++v)
                (row_fold[static_cast<std::size_t>(i)] == v ? test : train)[static_cast<std::size_t>(v)].push_back(i);

        Z = Matrix::Constant(n, static_cast<Index>(M), kNaN);
        std::vector<std::string> failure(M);
        parallel_for(M * static_cast<std::size_t>(options.folds), [&](std::size_t job) {
            const auto m = job / static_cast<std::size_t>(options.folds);
            const auto v = job % static_cast<std::size_t>(options.folds);
            const auto& tr = train[v];
            const auto& te = test[v];
            if (te.empty()) return;
            try {
                const auto model = fit_learner(roster[m], X(tr, Eigen::all), y(tr), task);
                const Vector pred = model->predict(X(te, Eigen::all));
                for (std::size_t r = 0; r < te.size(); ++r) Z(te[r], static_cast<Index>(m)) = pred[static_cast<Index>(r)];
            } catch (const std::exception& ex) {
                failure[m] = ex.what();  // the same candidate writes one slot per fold; any message will do
            }
        });
        for (std::size_t m = 0; m < M; ++m)
            if (!Z.col(static_cast<Index>(m)).allFinite()) {
                alive[m] = false;
                e.warnings.push_back("candidate " + roster[m].name() + " dropped: " +
                                     (failure[m].empty() ? std::string("non-finite predictions") : failure[m]));
            }
    }

    std::vector<std::size_t> keep;
    for (std::size_t m = 0; m < M; ++m)
        if (alive[m]) keep.push_back(m);
    if (keep.empty()) throw NumericalError("every ensemble candidate failed");

    // Refit survivors on all rows; a failure here also drops the candidate.
    std::vector<std::shared_ptr<const FittedModel>> full(M);
    std::vector<std::string> refit_error(M);
    parallel_for(keep.size(), [&](std::size_t k) {
        const auto m = keep[k];
        try {
            auto model = fit_learner(roster[m], X, y, task);
            if (!model->predict(X.topRows(std::min<Index>(n, 1))).allFinite()) throw NumericalError("non-finite predictions");
            full[m] = std::move(model);
        } catch (const std::exception& ex) {
            refit_error[m] = ex.what();
        }
    });
    std::vector<std::size_t> final_keep;
    for (auto m : keep) {
        if (full[m]) final_keep.push_back(m);
        else e.warnings.push_back("candidate " + roster[m].name() + " dropped on refit: " + refit_error[m]);
    }
    if (final_keep.empty()) throw NumericalError("every ensemble candidate failed");

    for (auto m : final_keep) {
        e.candidates.push_back(roster[m]);
        e.models.push_back(full[m]);
    }
    const auto K = static_cast<Index>(final_keep.size());
    e.cv_risk = Vector::Constant(K, kNaN);

    if (M == 1) {
        e.weights = Vector::Ones(1);
        return e;
    }

    Matrix Zk(n, K);
    for (Index k = 0; k < K; ++k) Zk.col(k) = Z.col(static_cast<Index>(final_keep[static_cast<std::size_t>(k)]));
    for (Index k = 0; k < K; ++k) {
        Vector unit = Vector::Zero(K);
        unit[k] = 1.0;
        e.cv_risk[k] = detail::stack_risk(Zk, y, unit, task, nullptr);
    }

    // Projected gradient on the simplex, started from the best single
    // candidate; Armijo backtracking keeps every accepted step a descent.
    Index best = 0;
    e.cv_risk.minCoeff(&best);
    Vector w = Vector::Zero(K);
    w[best] = 1.0;
    Vector grad;
    double risk = detail::stack_risk(Zk, y, w, task, &grad);
    double step = 1.0;
    for (int it = 0; it < options.meta_iterations; ++it) {
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            const Vector cand = detail::project_to_simplex(w - step * grad);
            const Vector diff = cand - w;
            const double dn2 = diff.squaredNorm();
            if (dn2 == 0.0) break;
            Vector cand_grad;
            const double cand_risk = detail::stack_risk(Zk, y, cand, task, &cand_grad);
            if (cand_risk <= risk + grad.dot(diff) + dn2 / (2.0 * step) && cand_risk <= risk) {
                w = cand;
                risk = cand_risk;
                grad = cand_grad;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        step *= 2.0;
    }
    e.weights = w;
    e.ensemble_cv_risk = risk;
    return e;
}

inline LearnerEnsemble fit_ensemble(const Matrix& X, const Vector& y, Task task, const std::vector<LearnerSpec>& roster,
                                    int folds = 10, std::uint64_t seed = 0) {
    EnsembleOptions options;
    options.folds = folds;
    options.seed = seed;
    return fit_ensemble(X, y, task, roster, options);
}

}  // namespace mixshift
