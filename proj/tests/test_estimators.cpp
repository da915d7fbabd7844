#include "support.hpp"

#include <gtest/gtest.h>

using namespace mixshift;

namespace {

EstimatorConfig light_config(std::uint64_t seed = 1) {
    EstimatorConfig c;
    c.folds = 5;
    c.inner_folds = 5;
    c.seed = seed;
    c.roster = {LearnerSpec::mean(), LearnerSpec::linear(), LearnerSpec::linear_pairwise()};
    return c;
}

double correlation(const Vector& a, const Vector& b) {
    const Vector ca = a.array() - a.mean(), cb = b.array() - b.mean();
    return ca.dot(cb) / (ca.norm() * cb.norm());
}

}  // namespace

TEST(Estimators, IdentityPolicyCollapsesToObservedMean) {
    const auto ds = draw_observational(dgp_linear_single().model, 400, 3);
    ShiftEstimator session(ds, light_config());
    const auto id = ShiftPolicy::identity("id", 1, 2);
    const auto nuis = session.treatment(id);
    EXPECT_TRUE(nuis.identity_at[0]);
    EXPECT_TRUE((nuis.ratio[0].array() == 1.0).all());
    const double ybar = ds.outcome.mean();
    EXPECT_NEAR(session.estimate(id, EstimatorKind::sdr, nuis).value, ybar, 1e-10);
    EXPECT_NEAR(session.estimate(id, EstimatorKind::tmle, nuis).value, ybar, 1e-6);
    const auto obs = session.observed(EstimatorKind::tmle);
    EXPECT_DOUBLE_EQ(obs.value, ybar);
    const auto c = session.contrast_vs_observed(session.estimate(id, EstimatorKind::sdr, nuis), EstimatorKind::sdr);
    EXPECT_NEAR(c.value, 0.0, 1e-10);
}

TEST(Estimators, LinearShiftRecoversTruth) {
    const auto dgp = dgp_linear_single();
    const auto ds = draw_observational(dgp.model, 1500, 11);
    const auto& policy = dgp.policies[0];
    const double truth = counterfactual_truth(dgp.model, policy, 200000, 5).value;
    ShiftEstimator session(ds, light_config(2));
    const auto nuis = session.treatment(policy);
    for (auto kind : {EstimatorKind::tmle, EstimatorKind::sdr}) {
        const auto e = session.estimate(policy, kind, nuis);
        const auto w = wald(e);
        EXPECT_LT(std::abs(e.value - truth), 3.0 * w.se) << to_string(kind) << " " << e.value << " vs " << truth;
        const auto c = wald(session.contrast_vs_observed(e, kind));
        EXPECT_NEAR(c.estimate, 2.0, 3.0 * c.se + 0.05) << to_string(kind);
        EXPECT_EQ(e.fingerprint, ds.fingerprint());
        EXPECT_EQ(e.n(), ds.n());
    }
}

TEST(Estimators, DensityRatioTracksGaussianOracle) {
    // A ~ N(0, 1), shift +0.5: r(a) = phi(a - 0.5) / phi(a) = exp(0.5 a - 0.125).
    const Index n = 2000;
    const Matrix A = fixtures::gaussian_matrix(n, 1, 21);
    const auto ds = fixtures::single_time(A, fixtures::gaussian_matrix(n, 1, 22).col(0));
    const auto policy = ShiftPolicy::uniform("plus", 1, 1, ComponentShift::additive(0.5));
    auto config = light_config(3);
    config.roster = {LearnerSpec::linear()};
    const Vector r = estimate_density_ratio(ds, policy, 0, config);
    const Vector oracle = (0.5 * A.col(0).array() - 0.125).exp();
    EXPECT_GT(correlation(r, oracle), 0.9);
    EXPECT_NEAR(r.mean(), 1.0, 0.1);
}

TEST(Estimators, TighterTruncationCountsMoreEvents) {
    const Index n = 600;
    const Matrix A = fixtures::gaussian_matrix(n, 2, 31);
    const auto ds = fixtures::single_time(A, A.rowwise().sum());
    const auto policy = ShiftPolicy::uniform("plus", 1, 2, ComponentShift::additive(1.0));
    std::size_t previous = 0;
    Vector previous_r;
    for (double q : {1.0, 0.999, 0.95, 0.8}) {
        auto config = light_config(4);
        config.ratio.truncation_quantile = q;
        std::size_t events = 0;
        const Vector r = estimate_density_ratio(ds, policy, 0, config, &events);
        EXPECT_GE(events, previous) << q;
        if (previous_r.size()) EXPECT_LE(r.maxCoeff(), previous_r.maxCoeff() + 1e-12);
        previous = events;
        previous_r = r;
    }
    EXPECT_GT(previous, 0u);
    auto capped = light_config(4);
    capped.ratio.truncation_quantile = 1.0;
    capped.ratio.cap = 1.5;
    EXPECT_LE(estimate_density_ratio(ds, policy, 0, capped).maxCoeff(), 1.5);
}

TEST(Estimators, CensoredFeedbackWithinTolerance) {
    const auto dgp = dgp_feedback_censored();
    const auto ds = draw_observational(dgp.model, 2000, 41);
    ASSERT_TRUE(ds.has_censoring());
    const auto& policy = dgp.policies[0];
    const double truth = counterfactual_truth(dgp.model, policy, 200000, 6).value;
    ShiftEstimator session(ds, light_config(5));
    const auto nuis = session.treatment(policy);
    for (auto kind : {EstimatorKind::tmle, EstimatorKind::sdr}) {
        const auto e = session.estimate(policy, kind, nuis);
        const auto w = wald(e);
        EXPECT_LT(std::abs(e.value - truth), 4.0 * w.se) << to_string(kind) << " " << e.value << " vs " << truth;
    }
}

TEST(Estimators, SameSeedIsBitIdentical) {
    const auto ds = draw_observational(dgp_linear_single().model, 300, 51);
    const auto policy = dgp_linear_single().policies[1];
    const auto a = tmle(ds, policy, light_config(9));
    const auto b = tmle(ds, policy, light_config(9));
    EXPECT_EQ(a.value, b.value);
    EXPECT_TRUE((a.eif.array() == b.eif.array()).all());
}

TEST(Estimators, DimensionChecks) {
    const auto ds = draw_observational(dgp_linear_single().model, 100, 1);
    ShiftEstimator session(ds, light_config());
    EXPECT_THROW(session.treatment(ShiftPolicy::identity("x", 1, 3)), DimensionError);
    EXPECT_THROW(session.treatment(ShiftPolicy::identity("x", 2, 2)), DimensionError);
    auto bad = light_config();
    bad.folds = 1;
    EXPECT_THROW(ShiftEstimator(ds, bad), ConfigError);
    EXPECT_THROW(ShiftEstimator(draw_observational(dgp_linear_single().model, 8, 1), light_config()), ValidationError);
}

TEST(Subpopulation, AlwaysTrueIsTheFullPopulation) {
    const auto ds = draw_observational(dgp_heterogeneous().model, 200, 2);
    const auto B = restrict_subpopulation(ds, SubpopulationPredicate::always());
    EXPECT_EQ(B.count, 200);
    EXPECT_EQ(B.probability, 1.0);
    EstimandEstimate e;
    e.value = 1.5;
    e.eif = fixtures::gaussian_matrix(200, 1, 3).col(0);
    e.eif.array() -= e.eif.mean();
    const auto local = localize(e, B);
    EXPECT_NEAR(local.value, e.value, 1e-12);
    EXPECT_LE((local.eif - e.eif).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Subpopulation, LocalizedMeanOverMembers) {
    Matrix A(4, 1);
    A << 0, 2, 3, -1;
    const auto ds = fixtures::single_time(A, Vector::Zero(4));
    SubpopulationPredicate pred;
    pred.clauses = {{{0, ThresholdCondition::Op::ge, 1.0}}};
    const auto B = restrict_subpopulation(ds, pred);
    EXPECT_EQ(B.count, 2);
    EstimandEstimate e;
    e.value = 1.0;
    e.eif = Vector(4);
    e.eif << -1, 3, 5, -7;  // contributions 0, 4, 6, -6
    const auto local = localize(e, B);
    EXPECT_DOUBLE_EQ(local.value, 5.0);
    EXPECT_DOUBLE_EQ(local.eif[1], (4.0 - 5.0) / 0.5);
    EXPECT_DOUBLE_EQ(local.eif[0], 0.0);
    EXPECT_THROW(restrict_subpopulation(ds, pred, 3), ValidationError);
    pred.clauses = {{{0, ThresholdCondition::Op::gt, 10.0}}};
    EXPECT_THROW(restrict_subpopulation(ds, pred), ValidationError);
}
