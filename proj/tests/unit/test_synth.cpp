#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rxrl/errors.hpp"
#include "rxrl/io.hpp"
#include "rxrl/synth.hpp"

using namespace rxrl;

TEST(Synth, ZeroPatientsGivesEmptyCohortAndTruth) {
    SynthConfig cfg;
    cfg.n_patients = 0;
    const auto out = generate_synthetic_cohort(cfg);
    EXPECT_TRUE(out.patients.empty());
    EXPECT_TRUE(out.truth.empty());
}

TEST(Synth, DefaultMissingnessRates) {
    const auto m = SynthConfig::default_missingness();
    EXPECT_DOUBLE_EQ(m.at(Biomarker::a1c), 0.08);
    EXPECT_DOUBLE_EQ(m.at(Biomarker::tc), 0.13);
    EXPECT_DOUBLE_EQ(m.at(Biomarker::ldl), 0.13);
    EXPECT_DOUBLE_EQ(m.at(Biomarker::hdl), 0.13);
    EXPECT_DOUBLE_EQ(m.at(Biomarker::triglycerides), 0.13);
    EXPECT_DOUBLE_EQ(m.at(Biomarker::sbp), 0.01);
    EXPECT_DOUBLE_EQ(m.at(Biomarker::dbp), 0.01);
    EXPECT_DOUBLE_EQ(m.at(Biomarker::bmi), 0.01);
}

TEST(Synth, SameSeedGivesByteIdenticalFiles) {
    SynthConfig cfg;
    cfg.n_patients = 40;
    cfg.seed = 1234;
    std::ostringstream a, b, c;
    write_cohort(generate_synthetic_cohort(cfg).patients, a);
    write_cohort(generate_synthetic_cohort(cfg).patients, b);
    cfg.seed = 1235;
    write_cohort(generate_synthetic_cohort(cfg).patients, c);
    EXPECT_EQ(a.str(), b.str());
    EXPECT_NE(a.str(), c.str());
}

TEST(Synth, InvalidConfigIsConfigError) {
    SynthConfig cfg;
    cfg.behavior_policy_noise = 1.5;
    EXPECT_THROW(generate_synthetic_cohort(cfg), ConfigError);
    cfg = {};
    cfg.effect_scale = 0.0;
    EXPECT_THROW(generate_synthetic_cohort(cfg), ConfigError);
    cfg = {};
    cfg.missingness_rates[Biomarker::a1c] = -0.1;
    EXPECT_THROW(generate_synthetic_cohort(cfg), ConfigError);
    cfg = {};
    cfg.gap_median_days = 0.0;
    EXPECT_THROW(generate_synthetic_cohort(cfg), ConfigError);
}

TEST(Synth, RecordsSatisfyInvariantsAndPhysiologicClamps) {
    SynthConfig cfg;
    cfg.n_patients = 200;
    cfg.seed = 3;
    const auto out = generate_synthetic_cohort(cfg);
    ASSERT_EQ(out.patients.size(), 200u);
    ASSERT_EQ(out.truth.size(), 200u);
    std::vector<int> gaps;
    for (std::size_t i = 0; i < out.patients.size(); ++i) {
        const auto& p = out.patients[i];
        EXPECT_NO_THROW(validate(p));
        EXPECT_EQ(out.truth[i].patient_id, p.patient_id);
        EXPECT_EQ(p.encounters.front().day, 0);
        for (std::size_t e = 0; e < p.encounters.size(); ++e) {
            const auto& panel = p.encounters[e].panel;
            if (auto v = panel[Biomarker::a1c]) EXPECT_TRUE(*v >= 4.0 && *v <= 16.0);
            if (auto v = panel[Biomarker::sbp]) EXPECT_TRUE(*v >= 80.0 && *v <= 220.0);
            for (Biomarker b : {Biomarker::tc, Biomarker::ldl, Biomarker::hdl, Biomarker::triglycerides})
                if (auto v = panel[b]) EXPECT_TRUE(*v >= 10.0 && *v <= 600.0);
            if (e > 0) gaps.push_back(p.encounters[e].day - p.encounters[e - 1].day);
        }
    }
    std::nth_element(gaps.begin(), gaps.begin() + static_cast<long>(gaps.size() / 2), gaps.end());
    const int median = gaps[gaps.size() / 2];
    EXPECT_NEAR(median, 60, 5);
}

TEST(Synth, EveryMenuRegimenHasSupportUnderNoise) {
    SynthConfig cfg;
    cfg.n_patients = 300;
    cfg.seed = 8;
    const auto out = generate_synthetic_cohort(cfg);
    for (auto cls : {TherapeuticClass::antihyperglycemic, TherapeuticClass::antihypertensive,
                     TherapeuticClass::antihyperlipidemic}) {
        for (Regimen r : synthetic_menu(cls)) {
            std::size_t n = 0;
            for (const auto& p : out.patients)
                for (const auto& e : p.encounters)
                    if ((e.prescriptions & class_mask(cls)) == r) ++n;
            EXPECT_GE(n, 20u) << r.label();
        }
    }
}

TEST(Synth, PlantedOptimumGivesLargestOneStepReductionWithoutNoise) {
    SynthConfig cfg;
    cfg.n_patients = 100;
    cfg.seed = 21;
    cfg.observation_noise_scale = 0.0;
    for (auto& [b, rate] : cfg.missingness_rates) rate = 0.0;
    const auto out = generate_synthetic_cohort(cfg);
    struct Channel {
        TherapeuticClass cls;
        Biomarker marker;
        Regimen GroundTruthEntry::*best;
    };
    const Channel channels[] = {
        {TherapeuticClass::antihyperglycemic, Biomarker::a1c, &GroundTruthEntry::glycemia},
        {TherapeuticClass::antihypertensive, Biomarker::sbp, &GroundTruthEntry::bp},
        {TherapeuticClass::antihyperlipidemic, Biomarker::tc, &GroundTruthEntry::cvd},
    };
    std::size_t checked = 0;
    for (std::size_t i = 0; i < out.patients.size(); ++i) {
        const auto& lat = out.latents[i];
        for (const auto& enc : out.patients[i].encounters) {
            for (const auto& ch : channels) {
                const Regimen best = out.truth[i].*ch.best;
                const double best_next = *expected_next_panel(lat, enc.panel, best)[ch.marker];
                for (Regimen r : synthetic_menu(ch.cls)) {
                    if (r == best) continue;
                    const double next = *expected_next_panel(lat, enc.panel, r)[ch.marker];
                    EXPECT_LT(best_next, next) << out.patients[i].patient_id << " " << r.label();
                    ++checked;
                }
            }
        }
    }
    EXPECT_GT(checked, 1000u);
}

TEST(Synth, PlantedRulesFollowDemographics) {
    SynthConfig cfg;
    cfg.n_patients = 300;
    cfg.seed = 4;
    const auto out = generate_synthetic_cohort(cfg);
    for (std::size_t i = 0; i < out.patients.size(); ++i) {
        const auto& d = out.patients[i].demographics;
        const auto& t = out.truth[i];
        EXPECT_EQ(t.glycemia.size(), 1);
        if (d.race == Race::black)
            EXPECT_EQ(t.bp, Regimen{Subclass::CCB});
        else
            EXPECT_EQ(t.bp, d.age_at_first_encounter > 60.0 ? Regimen{Subclass::TD} : Regimen{Subclass::ACE});
        EXPECT_EQ(t.multimorbidity, t.glycemia | t.bp | t.cvd);
        EXPECT_EQ(t.for_target(Target::glycemia), t.glycemia);
    }
}
