#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "rxrl/errors.hpp"
#include "rxrl/risk.hpp"
#include "support/builders.hpp"

using namespace rxrl;

namespace {

FrsInput worked_example_woman() {
    FrsInput in;
    in.age = 61;
    in.sex = Sex::female;
    in.total_cholesterol = 180;
    in.hdl = 47;
    in.sbp = 124;
    in.bp_treated = false;
    in.smoker = true;
    in.diabetic = false;
    return in;
}

}  // namespace

TEST(Frs, PublishedWorkedExample) {
    EXPECT_NEAR(frs_risk(worked_example_woman()), 10.48, 0.1);
}

TEST(Frs, PublishedCoefficientTables) {
    const auto c = FrsCoefficients::framingham_general_cvd();
    EXPECT_DOUBLE_EQ(c.female.ln_age, 2.32888);
    EXPECT_DOUBLE_EQ(c.female.ln_total_cholesterol, 1.20904);
    EXPECT_DOUBLE_EQ(c.female.ln_hdl, -0.70833);
    EXPECT_DOUBLE_EQ(c.female.ln_sbp_untreated, 2.76157);
    EXPECT_DOUBLE_EQ(c.female.ln_sbp_treated, 2.82263);
    EXPECT_DOUBLE_EQ(c.female.smoker, 0.52873);
    EXPECT_DOUBLE_EQ(c.female.diabetes, 0.69154);
    EXPECT_DOUBLE_EQ(c.female.baseline_survival, 0.95012);
    EXPECT_DOUBLE_EQ(c.female.mean_linear_predictor, 26.1931);
    EXPECT_DOUBLE_EQ(c.male.ln_age, 3.06117);
    EXPECT_DOUBLE_EQ(c.male.ln_total_cholesterol, 1.12370);
    EXPECT_DOUBLE_EQ(c.male.ln_hdl, -0.93263);
    EXPECT_DOUBLE_EQ(c.male.ln_sbp_untreated, 1.93303);
    EXPECT_DOUBLE_EQ(c.male.ln_sbp_treated, 1.99881);
    EXPECT_DOUBLE_EQ(c.male.smoker, 0.65451);
    EXPECT_DOUBLE_EQ(c.male.diabetes, 0.57367);
    EXPECT_DOUBLE_EQ(c.male.baseline_survival, 0.88936);
    EXPECT_DOUBLE_EQ(c.male.mean_linear_predictor, 23.9802);
}

TEST(Frs, MeanPredictorGivesOneMinusBaselineSurvival) {
    auto coef = FrsCoefficients::framingham_general_cvd();
    FrsInput in = worked_example_woman();
    coef.female.mean_linear_predictor = frs_linear_predictor(in, coef);
    EXPECT_DOUBLE_EQ(frs_risk(in, coef), 100.0 * (1.0 - coef.female.baseline_survival));
}

TEST(Frs, HigherSbpRaisesRisk) {
    FrsInput a = worked_example_woman(), b = a;
    a.sbp = 120;
    b.sbp = 160;
    EXPECT_LT(frs_risk(a), frs_risk(b));
}

TEST(Frs, DeltaMatchesBruteForceAndIsAntisymmetric) {
    FrsInput a = worked_example_woman(), b = a;
    b.smoker = false;
    EXPECT_DOUBLE_EQ(frs_delta(a, b), frs_risk(a) - frs_risk(b));
    EXPECT_DOUBLE_EQ(frs_delta(a, b), -frs_delta(b, a));
    EXPECT_DOUBLE_EQ(frs_delta(a, a), 0.0);
    FrsInput m = a;
    m.sex = Sex::male;
    EXPECT_THROW(frs_delta(a, m), DomainError);
}

TEST(Frs, NonPositiveInputIsDomainError) {
    FrsInput in = worked_example_woman();
    in.hdl = 0;
    EXPECT_THROW(frs_risk(in), DomainError);
    in = worked_example_woman();
    in.sbp = -5;
    EXPECT_THROW(frs_risk(in), DomainError);
    in = worked_example_woman();
    in.age = std::nan("");
    EXPECT_THROW(frs_risk(in), DomainError);
}

TEST(Frs, MonotoneAndBoundedOnRandomInputs) {
    std::mt19937_64 rng(7);
    auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    for (int i = 0; i < 2000; ++i) {
        FrsInput in;
        in.age = u(30, 80);
        in.sex = u(0, 1) < 0.5 ? Sex::male : Sex::female;
        in.total_cholesterol = u(100, 400);
        in.hdl = u(20, 100);
        in.sbp = u(90, 200);
        in.bp_treated = u(0, 1) < 0.5;
        in.smoker = u(0, 1) < 0.5;
        const double r = frs_risk(in);
        EXPECT_GT(r, 0.0);
        EXPECT_LT(r, 100.0);
        auto bumped = [&](auto f) {
            FrsInput x = in;
            f(x);
            return frs_risk(x);
        };
        EXPECT_GT(bumped([](FrsInput& x) { x.age += 1; }), r);
        EXPECT_GT(bumped([](FrsInput& x) { x.total_cholesterol += 5; }), r);
        EXPECT_GT(bumped([](FrsInput& x) { x.sbp += 5; }), r);
        EXPECT_LT(bumped([](FrsInput& x) { x.hdl += 5; }), r);
        if (!in.smoker) EXPECT_GT(bumped([](FrsInput& x) { x.smoker = true; }), r);
    }
}

TEST(Frs, CoefficientOverrideFile) {
    rxrl::testing::TempDir dir;
    {
        std::ofstream out(dir / "coef.json");
        out << R"({"female": {"smoker": 0.0}})";
    }
    const auto coef = load_frs_coefficients(dir / "coef.json");
    EXPECT_DOUBLE_EQ(coef.female.smoker, 0.0);
    EXPECT_DOUBLE_EQ(coef.male.smoker, 0.65451);
    FrsInput s = worked_example_woman(), n = s;
    n.smoker = false;
    EXPECT_DOUBLE_EQ(frs_risk(s, coef), frs_risk(n, coef));
    {
        std::ofstream out(dir / "bad.json");
        out << R"({"male": {"baseline_survival": 1.5}})";
    }
    EXPECT_THROW(load_frs_coefficients(dir / "bad.json"), ConfigError);
    EXPECT_THROW(load_frs_coefficients(dir / "missing.json"), IoError);
}
