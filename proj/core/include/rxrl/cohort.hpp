#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rxrl {

enum class Sex : std::uint8_t { male, female };
enum class Race : std::uint8_t { black, native_american, asian, white, other };
inline constexpr int kRaceCount = 5;

std::string_view to_string(Sex s);
std::string_view to_string(Race r);
Sex parse_sex(std::string_view s);
Race parse_race(std::string_view s);

struct Demographics {
    double age_at_first_encounter = 50.0;
    Sex sex = Sex::male;
    Race race = Race::white;
    bool smoker = false;

    bool operator==(const Demographics&) const = default;
};

enum class Biomarker : std::uint8_t {
    sbp,
    dbp,
    bmi,
    weight,
    a1c,
    tc,
    ldl,
    hdl,
    triglycerides,
    creatinine,
};
inline constexpr int kBiomarkerCount = 10;

std::string_view to_string(Biomarker b);
Biomarker parse_biomarker(std::string_view s);
inline constexpr std::array<Biomarker, kBiomarkerCount> kAllBiomarkers = {
    Biomarker::sbp, Biomarker::dbp,           Biomarker::bmi, Biomarker::weight,
    Biomarker::a1c, Biomarker::tc,            Biomarker::ldl, Biomarker::hdl,
    Biomarker::triglycerides, Biomarker::creatinine,
};

// One visit's measurements; any entry may be absent.
struct BiomarkerPanel {
    std::array<std::optional<double>, kBiomarkerCount> values{};

    std::optional<double>& operator[](Biomarker b) { return values[static_cast<int>(b)]; }
    const std::optional<double>& operator[](Biomarker b) const {
        return values[static_cast<int>(b)];
    }
    bool operator==(const BiomarkerPanel&) const = default;
};

enum class TherapeuticClass : std::uint8_t { antihyperglycemic, antihypertensive, antihyperlipidemic };

// The 24 pharmacologic subclasses, grouped by therapeutic class in declaration order.
enum class Subclass : std::uint8_t {
    PPARg, INSR, GLP1, DPP4_BIG, DPP4, BIG, INSR_BIG, SGLT2, INSO,
    ARA, PSD, ABAB, ACE_TD, ARA_TD, ACE, TD, BAB, CCB, ARA_CCB,
    BSS, HMG, HMG_CA, PCSK9, LIP,
};
inline constexpr int kSubclassCount = 24;

std::string_view to_string(Subclass c);
std::optional<Subclass> parse_subclass(std::string_view s);
TherapeuticClass therapeutic_class(Subclass c);

// A set of subclasses, stored as a 24-bit mask. Bit i is Subclass(i).
class Regimen {
public:
    constexpr Regimen() = default;
    constexpr explicit Regimen(std::uint32_t mask) : mask_(mask & kFullMask) {}
    Regimen(std::initializer_list<Subclass> codes);

    static constexpr std::uint32_t kFullMask = (1u << kSubclassCount) - 1;

    constexpr std::uint32_t mask() const { return mask_; }
    constexpr bool empty() const { return mask_ == 0; }
    int size() const;
    bool contains(Subclass c) const { return (mask_ >> static_cast<int>(c)) & 1u; }
    bool contains(Regimen other) const { return (other.mask_ & ~mask_) == 0; }
    void insert(Subclass c) { mask_ |= 1u << static_cast<int>(c); }
    Regimen operator&(Regimen o) const { return Regimen(mask_ & o.mask_); }
    Regimen operator|(Regimen o) const { return Regimen(mask_ | o.mask_); }
    std::vector<Subclass> codes() const;

    // Canonical text form: codes in declaration order joined with '+', "none" when empty.
    std::string label() const;

    bool operator==(const Regimen&) const = default;

private:
    std::uint32_t mask_ = 0;
};

Regimen class_mask(TherapeuticClass cls);

// Lexicographic order on ascending code-index sequences.
bool regimen_lex_less(Regimen a, Regimen b);

struct Encounter {
    int day = 0;
    BiomarkerPanel panel;
    Regimen prescriptions;
    bool icd10_t2dm = false;

    bool operator==(const Encounter&) const = default;
};

struct PatientRecord {
    std::string patient_id;
    Demographics demographics;
    std::vector<Encounter> encounters;

    bool operator==(const PatientRecord&) const = default;
};

using Cohort = std::vector<PatientRecord>;

// Throws ValidationError on the first violated invariant.
void validate(const PatientRecord& record);

// Rule-based T2DM selection. A patient qualifies with any of:
//   two or more ICD-10 flagged encounters;
//   two or more encounters with A1c >= 6.5% and at least one flagged encounter;
//   any antihyperglycemic prescription other than BIG.
bool meets_t2dm_phenotype(const PatientRecord& record);
Cohort phenotype_t2dm(std::span<const PatientRecord> cohort);

inline constexpr double kT2dmA1cCutoff = 6.5;

}  // namespace rxrl
