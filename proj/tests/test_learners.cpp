#include "support.hpp"

#include <gtest/gtest.h>

using namespace mixshift;

namespace {

std::vector<LearnerSpec> light_roster() {
    return {LearnerSpec::mean(), LearnerSpec::linear(), LearnerSpec::knn(10), LearnerSpec::boost(2, 50)};
}

}  // namespace

TEST(LearnerSpec, NamesRoundTrip) {
    for (const auto& s : default_roster()) EXPECT_EQ(LearnerSpec::parse(s.name()).name(), s.name());
    EXPECT_EQ(LearnerSpec::parse("linear_pairwise").kind, LearnerSpec::Kind::linear_pairwise);
    EXPECT_EQ(LearnerSpec::parse("boost:3:200").depth, 3);
    EXPECT_THROW(LearnerSpec::parse("boost:4:10"), ConfigError);
    EXPECT_THROW(LearnerSpec::parse("ridge:-1"), ConfigError);
    EXPECT_THROW(LearnerSpec::parse("knn:2.5"), ConfigError);
    EXPECT_THROW(LearnerSpec::parse("forest"), ConfigError);
}

TEST(Ensemble, NoiselessLinearTargetFavoursLinear) {
    const Matrix X = fixtures::gaussian_matrix(400, 3, 1);
    const Vector y = 1.0 + 2.0 * X.col(0).array() - 0.5 * X.col(2).array();
    const auto e = fit_ensemble(X, y, Task::regression, light_roster(), 5, 7);
    double linear_weight = 0.0;
    for (std::size_t m = 0; m < e.candidates.size(); ++m)
        if (e.candidates[m].kind == LearnerSpec::Kind::linear) linear_weight = e.weights[static_cast<Index>(m)];
    EXPECT_GT(linear_weight, 0.9);
    const Matrix Xt = fixtures::gaussian_matrix(100, 3, 2);
    const Vector yt = 1.0 + 2.0 * Xt.col(0).array() - 0.5 * Xt.col(2).array();
    EXPECT_LT((e.predict(Xt) - yt).cwiseAbs().maxCoeff(), 0.05);
}

TEST(Ensemble, ConstantTargetPredictsConstant) {
    const Matrix X = fixtures::gaussian_matrix(100, 2, 3);
    const Vector y = Vector::Constant(100, 4.25);
    const auto e = fit_ensemble(X, y, Task::regression, light_roster(), 5, 1);
    EXPECT_LT((e.predict(fixtures::gaussian_matrix(20, 2, 4)).array() - 4.25).abs().maxCoeff(), 1e-8);
}

TEST(Ensemble, PureNoiseEnsembleBeatsNothingButMean) {
    const Matrix X = fixtures::gaussian_matrix(300, 3, 5);
    const Vector y = fixtures::gaussian_matrix(300, 1, 6).col(0);
    const auto e = fit_ensemble(X, y, Task::regression, light_roster(), 5, 2);
    // The stacked CV risk never exceeds the best single candidate.
    EXPECT_LE(e.ensemble_cv_risk, e.cv_risk.minCoeff() + 1e-12);
    const Vector pred = e.predict(fixtures::gaussian_matrix(200, 3, 7));
    EXPECT_LT(std::abs(pred.mean() - y.mean()), 0.3);
}

TEST(Ensemble, WeightsLieOnSimplex) {
    const Matrix X = fixtures::gaussian_matrix(200, 2, 8);
    Vector y = (X.col(0).array() * X.col(1).array()).matrix() + X.col(0);
    const auto e = fit_ensemble(X, y, Task::regression, default_roster(), 5, 3);
    EXPECT_NEAR(e.weights.sum(), 1.0, 1e-12);
    EXPECT_GE(e.weights.minCoeff(), 0.0);
    EXPECT_EQ(e.weights.size(), static_cast<Index>(e.models.size()));
}

TEST(Ensemble, ProbabilityPredictionsAreClipped) {
    const Matrix X = fixtures::gaussian_matrix(300, 2, 9);
    Vector y(300);
    for (Index i = 0; i < 300; ++i) y[i] = X(i, 0) > 0.0 ? 1.0 : 0.0;  // separable
    const auto e = fit_ensemble(X, y, Task::probability, light_roster(), 5, 4);
    Matrix far = Matrix::Zero(2, 2);
    far(0, 0) = 50.0;
    far(1, 0) = -50.0;
    const Vector p = e.predict(far);
    EXPECT_GE(p.minCoeff(), kProbClip);
    EXPECT_LE(p.maxCoeff(), 1.0 - kProbClip);
    EXPECT_GT(p[0], 0.9);
    EXPECT_LT(p[1], 0.1);
    EXPECT_THROW(fit_ensemble(X, y.array() * 2.0, Task::probability, light_roster(), 5, 4), ValidationError);
}

TEST(Ensemble, SameSeedSameFit) {
    const Matrix X = fixtures::gaussian_matrix(150, 3, 10);
    const Vector y = X.rowwise().sum().array().sin();
    const auto a = fit_ensemble(X, y, Task::regression, default_roster(), 5, 11);
    const auto b = fit_ensemble(X, y, Task::regression, default_roster(), 5, 11);
    EXPECT_TRUE((a.weights.array() == b.weights.array()).all());
    const Matrix Xt = fixtures::gaussian_matrix(30, 3, 12);
    EXPECT_TRUE((a.predict(Xt).array() == b.predict(Xt).array()).all());
}

TEST(Ensemble, SingleCandidateSkipsCrossValidation) {
    const Matrix X = fixtures::gaussian_matrix(10, 1, 13);
    const Vector y = X.col(0);
    const auto e = fit_ensemble(X, y, Task::regression, {LearnerSpec::linear()}, 10, 0);
    EXPECT_EQ(e.weights.size(), 1);
    EXPECT_TRUE(std::isnan(e.cv_risk[0]));
    EXPECT_THROW(e.predict(Matrix::Zero(1, 2)), DimensionError);
}

TEST(Ensemble, GroupsShareFolds) {
    // Two rows per group with identical targets: leaking a row of a group into
    // training would let knn:1 recover the held-out target exactly.
    const Matrix base = fixtures::gaussian_matrix(60, 1, 14);
    Matrix X(120, 1);
    Vector y(120);
    EnsembleOptions opt;
    opt.folds = 5;
    for (Index g = 0; g < 60; ++g) {
        X(2 * g, 0) = X(2 * g + 1, 0) = base(g, 0);
        y[2 * g] = y[2 * g + 1] = static_cast<double>(g % 7);
        opt.groups.push_back(g);
        opt.groups.push_back(g);
    }
    const auto e = fit_ensemble(X, y, Task::regression, {LearnerSpec::mean(), LearnerSpec::knn(1)}, opt);
    EXPECT_GT(e.cv_risk[1], 1.0);
}

TEST(FoldPlan, BalancedAndDeterministic) {
    for (Index n : {10, 37, 100}) {
        const auto plan = make_fold_plan(n, 10, 99);
        std::vector<Index> sizes;
        for (int v = 0; v < 10; ++v) sizes.push_back(static_cast<Index>(plan.members(v).size()));
        EXPECT_LE(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()), 1);
        EXPECT_EQ(std::accumulate(sizes.begin(), sizes.end(), Index{0}), n);
        EXPECT_EQ(plan.fold_of, make_fold_plan(n, 10, 99).fold_of);
    }
    EXPECT_NE(make_fold_plan(100, 10, 1).fold_of, make_fold_plan(100, 10, 2).fold_of);
    EXPECT_THROW(make_fold_plan(5, 10, 0), ValidationError);
    EXPECT_THROW(make_fold_plan(50, 1, 0), ConfigError);
}

TEST(Simplex, ProjectionOracle) {
    // Brute-force check against the KKT conditions of Euclidean projection.
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Vector v = fixtures::gaussian_matrix(6, 1, seed).col(0) * 2.0;
        const Vector w = detail::project_to_simplex(v);
        EXPECT_NEAR(w.sum(), 1.0, 1e-12);
        EXPECT_GE(w.minCoeff(), 0.0);
        // v - w = tau on the support and <= tau off it.
        double tau = kNaN;
        for (Index k = 0; k < 6; ++k)
            if (w[k] > 0) tau = v[k] - w[k];
        for (Index k = 0; k < 6; ++k) {
            if (w[k] > 0) EXPECT_NEAR(v[k] - w[k], tau, 1e-12);
            else EXPECT_LE(v[k], tau + 1e-12);
        }
    }
}

TEST(Learners, EachCandidateFitsAndPredictsFinite) {
    const Matrix X = fixtures::gaussian_matrix(120, 3, 15);
    const Vector y = X.col(0).array().square();
    Vector yb = (X.col(1).array() > 0).cast<double>();
    for (const auto& s : {LearnerSpec::mean(), LearnerSpec::linear(), LearnerSpec::linear_pairwise(),
                          LearnerSpec::ridge(1.0), LearnerSpec::knn(5), LearnerSpec::boost(3, 20)}) {
        EXPECT_TRUE(fit_learner(s, X, y, Task::regression)->predict(X).allFinite()) << s.name();
        const Vector p = fit_learner(s, X, yb, Task::probability)->predict(X);
        EXPECT_GE(p.minCoeff(), 0.0) << s.name();
        EXPECT_LE(p.maxCoeff(), 1.0) << s.name();
    }
    // Boosting captures a nonlinearity that a linear fit cannot.
    const Vector boost = fit_learner(LearnerSpec::boost(2, 100), X, y, Task::regression)->predict(X);
    const Vector lin = fit_learner(LearnerSpec::linear(), X, y, Task::regression)->predict(X);
    EXPECT_LT((boost - y).squaredNorm(), 0.5 * (lin - y).squaredNorm());
}
