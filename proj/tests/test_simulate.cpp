#include "support.hpp"

#include <gtest/gtest.h>

using namespace mixshift;

namespace {

// Mean propagation through the feedback model's linear equations under an
// affine per-component policy x -> scale * x + offset. Exposures are drawn
// naturally within a time, then shifted.
double feedback_mean(double scale, double offset) {
    const auto d = [&](double x) { return scale * x + offset; };
    const double l0 = 0.0;
    const double n01 = 0.5 * l0, s01 = d(n01);
    const double n02 = 0.3 * l0 + 0.3 * n01, s02 = d(n02);
    const double l1 = 0.5 * l0 + 0.4 * s01 + 0.2 * s02;
    const double n11 = 0.5 * l1 + 0.3 * s01, s11 = d(n11);
    const double n12 = 0.3 * l1 + 0.3 * s02, s12 = d(n12);
    return 1.0 + 0.5 * l0 + 0.5 * l1 + s01 + 0.5 * s02 + s11 + 0.5 * s12;
}

// L ~ N(1, 1); A = 2 + 0.5 L + e; Y = 0.5 + 1.5 A + L + e.
StructuralModel offset_model() {
    StructuralModel m;
    m.name = "offset";
    m.exposure_names = {"A"};
    TimeSlice s;
    s.covariate_names = {"L"};
    Equation l;
    l.intercept = 1.0;
    s.covariates = {l};
    Equation a;
    a.intercept = 2.0;
    a.add(0.5, {Factor::value(VarRef::L(0, 0))});
    s.exposures = {a};
    m.times = {s};
    m.outcome.intercept = 0.5;
    m.outcome.add(1.5, {Factor::value(VarRef::A(0, 0))}).add(1.0, {Factor::value(VarRef::L(0, 0))});
    return m;
}

}  // namespace

TEST(Simulate, AdditiveShiftMatchesMeanPropagation) {
    const auto dgp = dgp_feedback_censored();
    const auto truth = counterfactual_truth(dgp.model, dgp.policies[0], 400000, 3);
    EXPECT_NEAR(truth.value, feedback_mean(1.0, 0.5), 4.0 * truth.mc_se);
    const auto id = counterfactual_truth(dgp.model, ShiftPolicy::identity("id", 2, 2), 400000, 3);
    EXPECT_NEAR(id.value, feedback_mean(1.0, 0.0), 4.0 * id.mc_se);
}

TEST(Simulate, MultiplicativeShiftMatchesMeanPropagation) {
    const auto m = offset_model();
    const auto p = ShiftPolicy::uniform("times0.8", 1, 1, ComponentShift::multiplicative(0.8));
    const auto truth = counterfactual_truth(m, p, 400000, 4);
    // E[A] = 2.5, so E[Y(0.8 A)] = 0.5 + 1.5 * 0.8 * 2.5 + 1.
    EXPECT_NEAR(truth.value, 4.5, 4.0 * truth.mc_se);
    // Dual route: the sample mean of the linear predictor over an observational draw.
    const auto ds = draw_observational(m, 200000, 5);
    const double plugin = 0.5 + (1.5 * 0.8 * ds.exposures[0].col(0).array() + ds.covariates[0].col(0).array()).mean();
    EXPECT_NEAR(plugin, truth.value, 0.02);
}

TEST(Simulate, CatalogTruthsFromStructure) {
    const auto lin = dgp_linear_single();
    const auto c = counterfactual_contrast(lin.model, {lin.policies[0], ShiftPolicy::identity("id", 1, 2)}, {1.0, -1.0},
                                           20000, 1);
    EXPECT_NEAR(c.value, 2.0, 1e-9);  // common random numbers: the difference is exact
    EXPECT_LT(c.mc_se, 1e-9);

    const auto inter = dgp_interaction_single(0.4);
    const auto i = counterfactual_contrast(inter.model,
                                           {inter.policies[0], inter.policies[1], inter.policies[2],
                                            ShiftPolicy::identity("id", 1, 2)},
                                           {1.0, -1.0, -1.0, 1.0}, 20000, 2);
    EXPECT_NEAR(i.value, 0.4, 1e-9);

    const auto null = dgp_additive_null();
    const auto z = counterfactual_contrast(null.model,
                                           {null.policies[0], null.policies[1], null.policies[2],
                                            ShiftPolicy::identity("id", 1, 2)},
                                           {1.0, -1.0, -1.0, 1.0}, 20000, 2);
    EXPECT_NEAR(z.value, 0.0, 1e-9);
}

TEST(Simulate, HeterogeneousEffectOnlyInSubgroup) {
    const auto dgp = dgp_heterogeneous();
    ASSERT_TRUE(dgp.subgroup_cutoff.has_value());
    const auto c = counterfactual_contrast(dgp.model, {dgp.policies[0], ShiftPolicy::identity("id", 1, 2)}, {1.0, -1.0},
                                           200000, 3);
    // Effect 2 * P(A2 >= 1), A2 ~ N(0, 1.09).
    const double p = 0.5 * std::erfc(1.0 / std::sqrt(1.09) / std::sqrt(2.0));
    EXPECT_NEAR(c.value, 2.0 * p, 4.0 * c.mc_se + 1e-3);
}

TEST(Simulate, Determinism) {
    const auto m = dgp_mixture7().model;
    const auto a = draw_observational(m, 5000, 8);
    const auto b = draw_observational(m, 5000, 8);
    EXPECT_EQ(a.fingerprint(), b.fingerprint());
    EXPECT_NE(a.fingerprint(), draw_observational(m, 5000, 9).fingerprint());
    const auto p = dgp_mixture7().policies[0];
    EXPECT_EQ(counterfactual_truth(m, p, 10000, 1).value, counterfactual_truth(m, p, 10000, 1).value);

    // Chunked seeding makes the draw independent of the thread count.
    const auto before = max_threads();
    set_max_threads(1);
    const auto serial = draw_observational(m, 9000, 8).fingerprint();
    set_max_threads(4);
    const auto parallel = draw_observational(m, 9000, 8).fingerprint();
    set_max_threads(before);
    EXPECT_EQ(serial, parallel);
}

TEST(Simulate, CatalogShapes) {
    const auto all = reference_dgps();
    ASSERT_EQ(all.size(), 6u);
    for (const auto& d : all) {
        EXPECT_NO_THROW(d.model.validate()) << d.name;
        EXPECT_FALSE(d.policies.empty()) << d.name;
        EXPECT_EQ(reference_dgp(d.name).name, d.name);
        const auto ds = draw_observational(d.model, 200, 1);
        EXPECT_EQ(ds.n_times(), d.model.n_times());
        EXPECT_EQ(ds.n_components(), d.model.n_components());
    }
    EXPECT_THROW(reference_dgp("nope"), ConfigError);
}

TEST(Simulate, Mixture7CorrelationStructure) {
    const auto ds = draw_observational(dgp_mixture7().model, 4000, 2);
    const auto r = spearman_matrix(at_risk_exposures(ds, 0));
    EXPECT_GT(r.rho(0, 3), 0.6);
    EXPECT_LT(r.rho(0, 3), 0.95);
    EXPECT_LT(std::abs(r.rho(0, 5)), 0.3);
    EXPECT_GT(at_risk_exposures(ds, 0).minCoeff(), 0.0);
    EXPECT_TRUE(ds.outcome_binary());
    EXPECT_TRUE(ds.has_censoring());
}

TEST(Simulate, CounterfactualsIgnoreCensoring) {
    const auto dgp = dgp_feedback_censored();
    auto uncensored = dgp.model;
    for (auto& s : uncensored.times) s.censoring.reset();
    for (const auto& p : dgp.policies)
        EXPECT_EQ(counterfactual_truth(dgp.model, p, 20000, 7).value, counterfactual_truth(uncensored, p, 20000, 7).value);
}

TEST(Simulate, ValidateRejectsLookAhead) {
    auto m = dgp_linear_single().model;
    m.times[0].exposures[0].add(1.0, {Factor::value(VarRef::A(0, 1))});
    EXPECT_THROW(m.validate(), ConfigError);
    auto g = dgp_linear_single();
    const auto guarded = ShiftPolicy::uniform("g", 1, 2, ComponentShift::additive(1.0), Guard::in_hull());
    EXPECT_THROW(counterfactual_truth(g.model, guarded, 100, 1), ConfigError);
}
