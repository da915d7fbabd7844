#include "support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace mixshift;

namespace {

Schema long_schema(std::vector<std::string> covariates = {"L"}) {
    Schema s;
    s.id = "id";
    s.time = "time";
    s.outcome = "Y";
    s.censoring = "C";
    s.covariates = std::move(covariates);
    s.exposures = {"A1", "A2"};
    return s;
}

LongitudinalDataset ingest_text(const std::string& text, const Schema& s) {
    std::istringstream in(text);
    return ingest_csv(in, s);
}

void expect_same(const LongitudinalDataset& a, const LongitudinalDataset& b) {
    ASSERT_EQ(a.n(), b.n());
    ASSERT_EQ(a.n_times(), b.n_times());
    EXPECT_EQ(a.subject_ids, b.subject_ids);
    EXPECT_EQ(a.exposure_names, b.exposure_names);
    EXPECT_EQ(a.uncensored, b.uncensored);
    for (int t = 0; t < a.n_times(); ++t) {
        const auto ut = static_cast<std::size_t>(t);
        EXPECT_EQ(a.covariate_names[ut], b.covariate_names[ut]);
        for (Index i = 0; i < a.n(); ++i) {
            if (!a.at_risk(t, i)) continue;
            for (Index j = 0; j < a.n_components(); ++j) EXPECT_EQ(a.exposures[ut](i, j), b.exposures[ut](i, j));
            for (Index k = 0; k < a.covariates[ut].cols(); ++k) EXPECT_EQ(a.covariates[ut](i, k), b.covariates[ut](i, k));
        }
    }
    for (Index i = 0; i < a.n(); ++i) {
        if (std::isnan(a.outcome[i])) EXPECT_TRUE(std::isnan(b.outcome[i]));
        else EXPECT_EQ(a.outcome[i], b.outcome[i]);
    }
}

}  // namespace

TEST(Ingest, MinimalLongFile) {
    const auto ds = ingest_text(
        "id,time,L,A1,A2,C,Y\n"
        "a,0,1,0.5,2,1,3\n"
        "b,0,2,0.1,1,1,4\n"
        "c,0,3,0.7,5,1,5\n"
        "d,0,4,0.2,3,1,6\n",
        long_schema());
    EXPECT_EQ(ds.n(), 4);
    EXPECT_EQ(ds.n_times(), 1);
    EXPECT_EQ(ds.n_components(), 2);
    EXPECT_DOUBLE_EQ(ds.exposures[0](2, 1), 5.0);
    EXPECT_FALSE(ds.has_censoring());
}

TEST(Ingest, CensoringDefaultsToObservedWithoutColumn) {
    auto s = long_schema();
    s.censoring.clear();
    const auto ds = ingest_text("id,time,L,A1,A2,Y\na,0,1,0.5,2,3\nb,0,2,0.1,1,4\n", s);
    EXPECT_FALSE(ds.has_censoring());
}

TEST(Ingest, NonMonotoneCensoringNamesSubject) {
    // Wide layout with explicit indicators C_1 = 0 then C_2 = 1.
    Schema w;
    w.layout = Schema::Layout::wide;
    w.id = "id";
    w.outcome = "Y";
    w.wide_exposures = {{"A_0"}, {"A_1"}};
    w.wide_censoring = {"C_1", "C_2"};
    try {
        ingest_text("id,A_0,C_1,A_1,C_2,Y\nok,1,1,2,1,5\nbad7,1,0,NA,1,NA\n", w);
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("bad7"), std::string::npos);
    }
    // Long layout: censored after time 0 but a row at time 1 follows.
    try {
        ingest_text(
            "id,time,L,A1,A2,C,Y\n"
            "x,0,1,1,1,1,NA\nx,1,1,1,1,1,2\n"
            "late9,0,1,1,1,0,NA\nlate9,1,1,1,1,1,3\n",
            long_schema());
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("late9"), std::string::npos);
    }
}

TEST(Ingest, MissingOutcomeWhereCensoredIsAccepted) {
    const auto ds = ingest_text(
        "id,time,L,A1,A2,C,Y\n"
        "a,0,1,1,1,1,NA\na,1,2,1,1,1,7\n"
        "b,0,1,1,1,0,NA\n",
        long_schema());
    EXPECT_EQ(ds.n(), 2);
    EXPECT_EQ(ds.n_times(), 2);
    EXPECT_TRUE(std::isnan(ds.outcome[1]));
    EXPECT_DOUBLE_EQ(ds.outcome[0], 7.0);
    EXPECT_FALSE(ds.at_risk(1, 1));
    EXPECT_TRUE(ds.has_censoring());
}

TEST(Ingest, MalformedRowReportsRowIndex) {
    try {
        ingest_text("id,time,L,A1,A2,C,Y\na,0,1,1,1,1,2\nb,0,1,oops,1,1,2\n", long_schema());
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.row(), 2u);
    }
    try {
        ingest_text("id,time,L,A1,A2,C,Y\na,0,1,1,1,1\n", long_schema());
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.row(), 1u);
    }
}

TEST(Ingest, OutcomePresentForUncensoredOnly) {
    EXPECT_THROW(ingest_text("id,time,L,A1,A2,C,Y\na,0,1,1,1,1,NA\n", long_schema()), ValidationError);
}

TEST(Ingest, MissingCovariateIsMedianImputedWithIndicator) {
    const auto ds = ingest_text(
        "id,time,L,A1,A2,C,Y\n"
        "a,0,1,1,1,1,1\nb,0,NA,1,1,1,1\nc,0,3,1,1,1,1\nd,0,10,1,1,1,1\n",
        long_schema());
    ASSERT_EQ(ds.covariate_names[0].size(), 2u);
    EXPECT_EQ(ds.covariate_names[0][1], "L_missing");
    EXPECT_DOUBLE_EQ(ds.covariates[0](1, 0), 3.0);
    EXPECT_DOUBLE_EQ(ds.covariates[0](1, 1), 1.0);
    EXPECT_DOUBLE_EQ(ds.covariates[0](0, 1), 0.0);
}

TEST(Standardize, LinearMapAndConventions) {
    Matrix A(3, 2);
    A << 2, 5, 4, 5, 6, 5;
    const auto ds = fixtures::single_time(A, Vector::Zero(3));
    const auto map = standardize(ds);
    const auto& m = map.at(0);
    EXPECT_DOUBLE_EQ(m[0].apply(4.0), 0.5);
    EXPECT_DOUBLE_EQ(m[0].apply(8.0), 1.5);
    for (Index i = 0; i < 3; ++i) EXPECT_EQ(m[1].apply(A(i, 1)), 0.0);
    const Matrix U = map.apply(0, A);
    EXPECT_GE(U.minCoeff(), 0.0);
    EXPECT_LE(U.maxCoeff(), 1.0);
}

TEST(Standardize, InverseIsIdentityOnObservedValues) {
    const Matrix A = fixtures::gaussian_matrix(200, 3, 11).array() * 7.0 + 3.0;
    const auto ds = fixtures::single_time(A, Vector::Zero(200));
    const auto map = standardize(ds);
    const Matrix back = map.invert(0, map.apply(0, A));
    EXPECT_LE((back - A).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Spearman, HandComputedExamples) {
    Matrix X(3, 2);
    X << 1, 2, 2, 1, 3, 3;
    // ranks (1,2,3) vs (2,1,3): d = (-1, 1, 0), rho = 1 - 6*2/(3*8) = 0.5.
    EXPECT_NEAR(spearman_matrix(X).rho(0, 1), 0.5, 1e-12);
    Matrix M(4, 3);
    M << 1, 10, 4, 2, 20, 3, 3, 30, 2, 4, 40, 1;
    const auto r = spearman_matrix(M);
    EXPECT_NEAR(r.rho(0, 1), 1.0, 1e-12);
    EXPECT_NEAR(r.rho(0, 2), -1.0, 1e-12);
    EXPECT_FALSE(r.warning());
}

TEST(Spearman, ConstantColumnGivesZeroWithWarning) {
    Matrix X(4, 2);
    X << 1, 5, 2, 5, 3, 5, 4, 5;
    const auto r = spearman_matrix(X);
    EXPECT_EQ(r.rho(0, 1), 0.0);
    EXPECT_EQ(r.rho(1, 1), 1.0);
    EXPECT_TRUE(r.warning());
}

TEST(Spearman, PropertiesOnRandomData) {
    Matrix X = fixtures::gaussian_matrix(300, 4, 5);
    X.col(1) += X.col(0);
    X.col(2) = X.col(2).array().round();  // ties
    const auto r = spearman_matrix(X);
    EXPECT_TRUE(r.rho.isApprox(r.rho.transpose()));
    for (Index j = 0; j < 4; ++j) EXPECT_EQ(r.rho(j, j), 1.0);
    EXPECT_LE(r.rho.cwiseAbs().maxCoeff(), 1.0 + 1e-12);
    Matrix Y = X;
    Y.col(0) = X.col(0).array().exp();
    Y.col(1) = X.col(1).array().cube() + 2.0;
    EXPECT_LE((spearman_matrix(Y).rho - r.rho).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(RoundTrip, SimulatedDatasetsSurviveWriteAndIngest) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        for (const auto& dgp : {dgp_feedback_censored(), dgp_linear_single(), dgp_mixture7()}) {
            const auto ds = draw_observational(dgp.model, 60, seed);
            std::stringstream buf;
            const Schema schema = write_csv(ds, buf);
            const auto back = ingest_csv(buf, schema);
            expect_same(ds, back);
            EXPECT_EQ(back.fingerprint(), ds.fingerprint());
        }
    }
}

TEST(RoundTrip, WideLayoutWhenCovariatesDifferAcrossTimes) {
    auto ds = draw_observational(dgp_mixture7().model, 40, 9);
    ASSERT_NE(ds.covariate_names[0], ds.covariate_names[1]);
    std::stringstream buf;
    const Schema schema = write_csv(ds, buf);
    EXPECT_EQ(schema.layout, Schema::Layout::wide);
    expect_same(ds, ingest_csv(buf, schema));
}
