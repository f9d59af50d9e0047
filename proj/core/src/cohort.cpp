#include "rxrl/cohort.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "rxrl/errors.hpp"

namespace rxrl {

namespace {

constexpr std::array<std::string_view, kSubclassCount> kSubclassNames = {
    "PPARg", "INSR", "GLP1", "DPP4-BIG", "DPP4", "BIG", "INSR-BIG", "SGLT2", "INSO",
    "ARA", "PSD", "ABAB", "ACE-TD", "ARA-TD", "ACE", "TD", "BAB", "CCB", "ARA-CCB",
    "BSS", "HMG", "HMG-CA", "PCSK9", "LIP",
};

constexpr std::array<std::string_view, kBiomarkerCount> kBiomarkerNames = {
    "sbp", "dbp", "bmi", "weight", "a1c", "tc", "ldl", "hdl", "triglycerides", "creatinine",
};

constexpr std::array<std::string_view, kRaceCount> kRaceNames = {
    "black", "native_american", "asian", "white", "other",
};

}  // namespace

std::string_view to_string(Sex s) { return s == Sex::male ? "male" : "female"; }

std::string_view to_string(Race r) { return kRaceNames[static_cast<int>(r)]; }

Sex parse_sex(std::string_view s) {
    if (s == "male") return Sex::male;
    if (s == "female") return Sex::female;
    throw Error("unknown sex '" + std::string(s) + "'");
}

Race parse_race(std::string_view s) {
    for (int i = 0; i < kRaceCount; ++i)
        if (kRaceNames[i] == s) return static_cast<Race>(i);
    throw Error("unknown race '" + std::string(s) + "'");
}

std::string_view to_string(Biomarker b) { return kBiomarkerNames[static_cast<int>(b)]; }

Biomarker parse_biomarker(std::string_view s) {
    for (int i = 0; i < kBiomarkerCount; ++i)
        if (kBiomarkerNames[i] == s) return static_cast<Biomarker>(i);
    throw Error("unknown biomarker '" + std::string(s) + "'");
}

std::string_view to_string(Subclass c) { return kSubclassNames[static_cast<int>(c)]; }

std::optional<Subclass> parse_subclass(std::string_view s) {
    for (int i = 0; i < kSubclassCount; ++i)
        if (kSubclassNames[i] == s) return static_cast<Subclass>(i);
    return std::nullopt;
}

TherapeuticClass therapeutic_class(Subclass c) {
    const int i = static_cast<int>(c);
    if (i < 9) return TherapeuticClass::antihyperglycemic;
    if (i < 19) return TherapeuticClass::antihypertensive;
    return TherapeuticClass::antihyperlipidemic;
}

Regimen::Regimen(std::initializer_list<Subclass> codes) {
    for (Subclass c : codes) insert(c);
}

int Regimen::size() const { return std::popcount(mask_); }

std::vector<Subclass> Regimen::codes() const {
    std::vector<Subclass> out;
    for (int i = 0; i < kSubclassCount; ++i)
        if ((mask_ >> i) & 1u) out.push_back(static_cast<Subclass>(i));
    return out;
}

std::string Regimen::label() const {
    if (empty()) return "none";
    std::string out;
    for (Subclass c : codes()) {
        if (!out.empty()) out += '+';
        out += to_string(c);
    }
    return out;
}

Regimen class_mask(TherapeuticClass cls) {
    switch (cls) {
        case TherapeuticClass::antihyperglycemic: return Regimen(0x1FFu);
        case TherapeuticClass::antihypertensive: return Regimen(0x3FFu << 9);
        case TherapeuticClass::antihyperlipidemic: return Regimen(0x1Fu << 19);
    }
    return Regimen();
}

bool regimen_lex_less(Regimen a, Regimen b) {
    const auto ca = a.codes();
    const auto cb = b.codes();
    return std::lexicographical_compare(ca.begin(), ca.end(), cb.begin(), cb.end());
}

void validate(const PatientRecord& record) {
    const auto& id = record.patient_id;
    const auto& demo = record.demographics;
    if (!std::isfinite(demo.age_at_first_encounter) || demo.age_at_first_encounter < 18.0 ||
        demo.age_at_first_encounter > 110.0)
        throw ValidationError(id, "age_at_first_encounter outside [18, 110]");
    if (record.encounters.empty()) throw ValidationError(id, "no encounters");

    int prev_day = -1;
    for (std::size_t i = 0; i < record.encounters.size(); ++i) {
        const auto& enc = record.encounters[i];
        if (enc.day < 0) throw ValidationError(id, "negative encounter day");
        if (enc.day <= prev_day)
            throw ValidationError(id, "encounter days not strictly increasing at index " +
                                          std::to_string(i));
        prev_day = enc.day;
        for (Biomarker b : kAllBiomarkers) {
            const auto& v = enc.panel[b];
            if (v && !(std::isfinite(*v) && *v > 0.0))
                throw ValidationError(id, std::string(to_string(b)) +
                                              " must be finite and positive at index " +
                                              std::to_string(i));
        }
        const auto& sbp = enc.panel[Biomarker::sbp];
        const auto& dbp = enc.panel[Biomarker::dbp];
        if (sbp && dbp && !(*sbp > *dbp))
            throw ValidationError(id, "sbp must exceed dbp at index " + std::to_string(i));
    }
}

bool meets_t2dm_phenotype(const PatientRecord& record) {
    int flagged = 0;
    int abnormal_a1c = 0;
    const Regimen qualifying_drugs =
        class_mask(TherapeuticClass::antihyperglycemic) & Regimen(~Regimen({Subclass::BIG}).mask());
    bool on_t2dm_drug = false;
    for (const auto& enc : record.encounters) {
        if (enc.icd10_t2dm) ++flagged;
        const auto& a1c = enc.panel[Biomarker::a1c];
        if (a1c && *a1c >= kT2dmA1cCutoff) ++abnormal_a1c;
        if (!(enc.prescriptions & qualifying_drugs).empty()) on_t2dm_drug = true;
    }
    return flagged >= 2 || (abnormal_a1c >= 2 && flagged >= 1) || on_t2dm_drug;
}

Cohort phenotype_t2dm(std::span<const PatientRecord> cohort) {
    Cohort out;
    for (const auto& p : cohort)
        if (meets_t2dm_phenotype(p)) out.push_back(p);
    return out;
}

}  // namespace rxrl
