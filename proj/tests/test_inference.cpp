#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mixshift;

namespace {

EstimandEstimate make(const std::string& label, double value, const Vector& eif, std::uint64_t fp = 42) {
    EstimandEstimate e;
    e.label = label;
    e.value = value;
    e.eif = eif;
    e.fingerprint = fp;
    return e;
}

}  // namespace

TEST(Inference, SelfDifferenceIsExactlyZero) {
    const auto a = make("a", 1.7, fixtures::gaussian_matrix(100, 1, 1).col(0));
    const auto d = a - a;
    EXPECT_EQ(d.value, 0.0);
    EXPECT_TRUE((d.eif.array() == 0.0).all());
    const auto w = wald(d);
    EXPECT_EQ(w.se, 0.0);
    EXPECT_TRUE(w.degenerate);
    EXPECT_EQ(w.p_value, 1.0);
    EXPECT_FALSE(w.rejects());
}

TEST(Inference, GroupLaw) {
    const auto a = make("a", 1.0, fixtures::gaussian_matrix(50, 1, 2).col(0));
    const auto b = make("b", -2.0, fixtures::gaussian_matrix(50, 1, 3).col(0));
    const auto c = make("c", 0.5, fixtures::gaussian_matrix(50, 1, 4).col(0));
    const auto lhs = (a + b) - c;
    const auto rhs = a + (b - c);
    EXPECT_NEAR(lhs.value, rhs.value, 1e-15);
    EXPECT_LE((lhs.eif - rhs.eif).cwiseAbs().maxCoeff(), 1e-15);
    const auto back = (a + b) - b;
    EXPECT_NEAR(back.value, a.value, 1e-15);
    EXPECT_LE((back.eif - a.eif).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Inference, MismatchedEstimatesAreRejected) {
    const auto a = make("a", 1.0, Vector::Ones(10));
    EXPECT_THROW(a - make("b", 1.0, Vector::Ones(11)), DimensionError);
    EXPECT_THROW(a + make("b", 1.0, Vector::Ones(10), 7), DimensionError);
}

TEST(Inference, DifferenceVarianceMatchesBootstrap) {
    // Oracle: bootstrap the mean difference of correlated per-subject
    // contributions; the Wald SE of the influence-value difference should match.
    const Index n = 500;
    Matrix z = fixtures::gaussian_matrix(n, 2, 5);
    Vector xa = 2.0 + z.col(0).array();
    Vector xb = 1.0 + (0.7 * z.col(0) + 0.5 * z.col(1)).array();
    const auto a = make("a", xa.mean(), xa.array() - xa.mean());
    const auto b = make("b", xb.mean(), xb.array() - xb.mean());
    const auto w = wald(a - b);
    EXPECT_NEAR(w.estimate, xa.mean() - xb.mean(), 1e-12);

    std::mt19937_64 rng(77);
    std::uniform_int_distribution<Index> pick(0, n - 1);
    const int B = 2000;
    std::vector<double> stats;
    for (int r = 0; r < B; ++r) {
        double s = 0.0;
        for (Index k = 0; k < n; ++k) {
            const Index i = pick(rng);
            s += xa[i] - xb[i];
        }
        stats.push_back(s / static_cast<double>(n));
    }
    const double boot_se = std::sqrt(variance_of(stats));
    EXPECT_NEAR(w.se / boot_se, 1.0, 0.1);
    // Ignoring the covariance would overstate the SE.
    const double naive = std::sqrt(wald(a).se * wald(a).se + wald(b).se * wald(b).se);
    EXPECT_GT(naive, 1.2 * w.se);
}

TEST(Inference, WaldArithmetic) {
    Vector eif(4);
    eif << 1, -1, 1, -1;
    const auto w = wald(make("x", 2.0, eif));
    const double se = std::sqrt((4.0 / 3.0) / 4.0);
    EXPECT_NEAR(w.se, se, 1e-15);
    EXPECT_NEAR(w.lo, 2.0 - 1.96 * se, 1e-15);
    EXPECT_NEAR(w.hi, 2.0 + 1.96 * se, 1e-15);
    EXPECT_NEAR(w.z, 2.0 / se, 1e-12);
    EXPECT_NEAR(w.p_value, std::erfc(2.0 / se / std::sqrt(2.0)), 1e-15);
    EXPECT_TRUE(w.rejects());

    // 1.96 SE away sits on the boundary: two-sided p of 0.05.
    const auto edge = wald(make("e", 1.96 * se, eif));
    EXPECT_NEAR(edge.p_value, 0.05, 1e-4);

    const auto flat = wald(make("f", 3.0, Vector::Zero(5)));
    EXPECT_TRUE(flat.degenerate);
    EXPECT_EQ(flat.p_value, 0.0);
    EXPECT_THROW(wald(make("s", 1.0, Vector::Ones(1))), DimensionError);
}

TEST(Inference, SeInvariantToEifCentering) {
    const Vector eif = fixtures::gaussian_matrix(80, 1, 8).col(0);
    const auto a = wald(make("a", 0.3, eif));
    const auto b = wald(make("b", 0.3, eif.array() + 5.0));
    EXPECT_NEAR(a.se, b.se, 1e-12);
}

TEST(Inference, InteractionCompositeIsJointMinusMarginalsPlusObserved) {
    const auto j = make("j", 5.0, fixtures::gaussian_matrix(60, 1, 9).col(0));
    const auto a = make("a", 2.0, fixtures::gaussian_matrix(60, 1, 10).col(0));
    const auto b = make("b", 1.5, fixtures::gaussian_matrix(60, 1, 11).col(0));
    const auto o = make("o", 1.0, fixtures::gaussian_matrix(60, 1, 12).col(0));
    const auto c = interaction_composite(j, a, b, o);
    EXPECT_NEAR(c.value, 2.5, 1e-15);
    EXPECT_LE((c.eif - (j.eif - a.eif - b.eif + o.eif)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_NEAR(interaction_test(j, a, b, o).estimate, 2.5, 1e-15);
}
