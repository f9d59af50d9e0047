#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "rxrl/cohort.hpp"
#include "rxrl/errors.hpp"
#include "rxrl/io.hpp"
#include "rxrl/synth.hpp"
#include "support/builders.hpp"

using namespace rxrl;
using namespace rxrl::testing;

TEST(Subclass, UniverseHas24CodesSplitNineTenFive) {
    int counts[3] = {0, 0, 0};
    for (int i = 0; i < kSubclassCount; ++i) {
        const auto c = static_cast<Subclass>(i);
        ++counts[static_cast<int>(therapeutic_class(c))];
        const auto parsed = parse_subclass(to_string(c));
        ASSERT_TRUE(parsed.has_value());
        EXPECT_EQ(*parsed, c);
    }
    EXPECT_EQ(counts[0], 9);
    EXPECT_EQ(counts[1], 10);
    EXPECT_EQ(counts[2], 5);
    EXPECT_FALSE(parse_subclass("ACARBOSE").has_value());
    EXPECT_EQ(to_string(Subclass::DPP4_BIG), "DPP4-BIG");
}

TEST(Regimen, SetOperationsAndLabels) {
    Regimen r{Subclass::BIG, Subclass::ACE};
    EXPECT_EQ(r.size(), 2);
    EXPECT_TRUE(r.contains(Subclass::BIG));
    EXPECT_FALSE(r.contains(Subclass::TD));
    EXPECT_TRUE(r.contains(Regimen{Subclass::ACE}));
    EXPECT_EQ(r.label(), "BIG+ACE");
    EXPECT_EQ(Regimen().label(), "none");
    EXPECT_EQ((r & class_mask(TherapeuticClass::antihyperglycemic)), Regimen{Subclass::BIG});
    EXPECT_EQ(class_mask(TherapeuticClass::antihyperglycemic).size(), 9);
    EXPECT_EQ(class_mask(TherapeuticClass::antihypertensive).size(), 10);
    EXPECT_EQ(class_mask(TherapeuticClass::antihyperlipidemic).size(), 5);
}

TEST(Regimen, LexicographicOrderOnCodeIndices) {
    const Regimen a{Subclass::PPARg, Subclass::BIG};   // {0, 5}
    const Regimen b{Subclass::PPARg, Subclass::SGLT2}; // {0, 7}
    const Regimen c{Subclass::INSR};                   // {1}
    EXPECT_TRUE(regimen_lex_less(a, b));
    EXPECT_TRUE(regimen_lex_less(b, c));
    EXPECT_TRUE(regimen_lex_less(Regimen{Subclass::PPARg}, a));  // prefix first
    EXPECT_FALSE(regimen_lex_less(a, a));
}

TEST(Validate, RejectsInvariantViolationsNamingThePatient) {
    auto good = patient("ok", {encounter(0, {{Biomarker::a1c, 7.0}}), encounter(30, {})});
    EXPECT_NO_THROW(validate(good));

    auto decreasing = patient("dec", {encounter(10, {}), encounter(5, {})});
    try {
        validate(decreasing);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.patient_id(), "dec");
    }
    EXPECT_THROW(validate(patient("dup", {encounter(3, {}), encounter(3, {})})), ValidationError);
    EXPECT_THROW(validate(patient("empty", {})), ValidationError);
    EXPECT_THROW(validate(patient("neg", {encounter(0, {{Biomarker::a1c, -1.0}})})), ValidationError);
    EXPECT_THROW(validate(patient("bp", {encounter(0, {{Biomarker::sbp, 80.0}, {Biomarker::dbp, 80.0}})})),
                 ValidationError);
    EXPECT_THROW(validate(patient("young", {encounter(0, {})}, 12.0)), ValidationError);
    EXPECT_THROW(validate(patient("negday", {encounter(-1, {})})), ValidationError);
}

namespace {

PatientRecord a1c_patient(double first, double second, int flagged, Regimen rx = {}) {
    std::vector<Encounter> encs = {encounter(0, {{Biomarker::a1c, first}}, rx, flagged > 0),
                                   encounter(60, {{Biomarker::a1c, second}}, {}, flagged > 1),
                                   encounter(120, {}, {}, false)};
    return patient("p", encs);
}

}  // namespace

TEST(Phenotype, CriteriaFromHandEnumeration) {
    // Two flagged encounters.
    EXPECT_TRUE(meets_t2dm_phenotype(a1c_patient(5.0, 5.0, 2)));
    // Two abnormal A1c plus one flag.
    EXPECT_TRUE(meets_t2dm_phenotype(a1c_patient(6.6, 6.7, 1)));
    EXPECT_FALSE(meets_t2dm_phenotype(a1c_patient(6.4, 6.7, 1)));
    // Two abnormal A1c without any flag.
    EXPECT_FALSE(meets_t2dm_phenotype(a1c_patient(7.0, 7.0, 0)));
    // A1c exactly at the cut-off counts.
    EXPECT_TRUE(meets_t2dm_phenotype(a1c_patient(6.5, 6.5, 1)));
    // Any antihyperglycemic other than BIG.
    EXPECT_TRUE(meets_t2dm_phenotype(a1c_patient(5.0, 5.0, 0, Regimen{Subclass::SGLT2})));
    EXPECT_FALSE(meets_t2dm_phenotype(a1c_patient(5.0, 5.0, 0, Regimen{Subclass::BIG})));
    EXPECT_FALSE(meets_t2dm_phenotype(a1c_patient(5.0, 5.0, 0, Regimen{Subclass::ACE})));
    EXPECT_TRUE(meets_t2dm_phenotype(a1c_patient(5.0, 5.0, 0, Regimen{Subclass::DPP4_BIG})));
}

TEST(Phenotype, TwoAbnormalReadingsMustComeFromDistinctEncounters) {
    // One abnormal encounter only, even though the value is far above the cut-off.
    EXPECT_FALSE(meets_t2dm_phenotype(a1c_patient(9.0, 5.0, 1)));
}

TEST(Phenotype, IdempotentSubsetAndMonotone) {
    SynthConfig cfg;
    cfg.n_patients = 120;
    cfg.mean_encounters_per_patient = 4;
    cfg.non_t2dm_fraction = 0.4;
    cfg.seed = 5;
    const auto cohort = generate_synthetic_cohort(cfg).patients;
    const auto once = phenotype_t2dm(cohort);
    const auto twice = phenotype_t2dm(once);
    EXPECT_EQ(once, twice);
    EXPECT_LT(once.size(), cohort.size());
    EXPECT_GT(once.size(), 0u);
    std::size_t j = 0;
    for (const auto& p : cohort)
        if (j < once.size() && once[j].patient_id == p.patient_id) ++j;
    EXPECT_EQ(j, once.size()) << "output must be an order-preserving subset";

    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto p : cohort) {
        const bool before = meets_t2dm_phenotype(p);
        Regimen rx;
        if (u(rng) < 0.5) rx.insert(static_cast<Subclass>(static_cast<int>(u(rng) * kSubclassCount)));
        p.encounters.push_back(encounter(p.encounters.back().day + 30, {{Biomarker::a1c, 5.0 + 4.0 * u(rng)}},
                                         rx, u(rng) < 0.5));
        if (before) EXPECT_TRUE(meets_t2dm_phenotype(p)) << p.patient_id;
    }
    EXPECT_TRUE(phenotype_t2dm(std::vector<PatientRecord>{}).empty());
}

TEST(CohortIo, RoundTripTenRandomPatients) {
    SynthConfig cfg;
    cfg.n_patients = 10;
    cfg.seed = 99;
    const auto cohort = generate_synthetic_cohort(cfg).patients;
    TempDir dir;
    write_cohort(cohort, dir / "c.jsonl");
    const auto back = read_cohort(dir / "c.jsonl");
    EXPECT_EQ(back, cohort);
}

TEST(CohortIo, EmptyFileGivesEmptyCohort) {
    std::istringstream in("");
    EXPECT_TRUE(read_cohort(in).empty());
}

TEST(CohortIo, MalformedLineCitesLineNumber) {
    std::ostringstream good;
    write_cohort(std::vector<PatientRecord>{patient("a", {encounter(0, {})})}, good);
    std::istringstream in(good.str() + "{not json\n");
    try {
        read_cohort(in);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    std::istringstream missing_field(R"({"patient_id":"x","encounters":[]})" "\n");
    EXPECT_THROW(read_cohort(missing_field), ParseError);
    std::istringstream bad_code(
        R"({"patient_id":"x","demographics":{"age":50,"sex":"male","race":"white","smoker":false},)"
        R"("encounters":[{"day":0,"panel":{},"prescriptions":["XYZ"],"icd10_t2dm":false}]})" "\n");
    EXPECT_THROW(read_cohort(bad_code), ParseError);
}

TEST(CohortIo, DecreasingDaysIsValidationError) {
    std::ostringstream out;
    auto p = patient("bad", {encounter(0, {}), encounter(30, {})});
    write_cohort(std::vector<PatientRecord>{p}, out);
    std::string text = out.str();
    const auto pos = text.find("\"day\":30");
    ASSERT_NE(pos, std::string::npos);
    text.replace(pos, 8, "\"day\":-5");
    std::istringstream in(text);
    try {
        read_cohort(in);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.patient_id(), "bad");
    }
}

TEST(CohortIo, MissingBiomarkersAreExplicitNull) {
    std::ostringstream out;
    write_cohort(std::vector<PatientRecord>{patient("n", {encounter(0, {{Biomarker::a1c, 7.25}})})}, out);
    EXPECT_NE(out.str().find("\"sbp\":null"), std::string::npos);
    EXPECT_NE(out.str().find("\"a1c\":7.25"), std::string::npos);
    EXPECT_NE(out.str().find("\"icd10_t2dm\":false"), std::string::npos);
}

TEST(CsvField, QuotesPerRfc4180) {
    EXPECT_EQ(csv_field("plain"), "plain");
    EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
    EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
}
