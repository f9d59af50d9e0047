#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "rxrl/cohort.hpp"
#include "rxrl/rewards.hpp"

namespace rxrl {

struct SynthConfig {
    std::size_t n_patients = 500;
    double mean_encounters_per_patient = 20.0;
    std::map<Biomarker, double> missingness_rates = default_missingness();
    double behavior_policy_noise = 0.3;
    double effect_scale = 1.0;
    // Multiplies every process-noise standard deviation; 0 makes the dynamics deterministic.
    double observation_noise_scale = 1.0;
    double gap_median_days = 60.0;
    double gap_log_sigma = 0.5;
    // Share of generated patients that should fail T2DM phenotyping.
    double non_t2dm_fraction = 0.0;
    std::uint64_t seed = 0;

    static std::map<Biomarker, double> default_missingness();
    void check() const;  // throws ConfigError
};

// The three biomarkers the planted treatment effects act on.
enum class EffectChannel { a1c, sbp, tc };

// Hidden per-patient parameters of the simulator.
struct PatientLatent {
    std::array<double, kBiomarkerCount> baseline{};
    // Additive one-step reduction each subclass produces, per channel, already scaled.
    std::array<std::array<double, kSubclassCount>, 3> effect{};
    double height_m = 1.7;
    double dbp_ratio = 0.6;
    bool diabetic = true;
};

struct GroundTruthEntry {
    std::string patient_id;
    Regimen glycemia;
    Regimen bp;
    Regimen cvd;
    Regimen multimorbidity;

    Regimen for_target(Target t) const;
    bool operator==(const GroundTruthEntry&) const = default;
};

using GroundTruth = std::vector<GroundTruthEntry>;

struct SyntheticCohort {
    Cohort patients;
    GroundTruth truth;
    std::vector<PatientLatent> latents;  // parallel to patients
};

// Regimens the simulated clinicians choose from, per class (empty regimen first).
const std::vector<Regimen>& synthetic_menu(TherapeuticClass cls);

// Guideline first-line subclass the simulated clinician reaches for.
Subclass guideline_first_line(TherapeuticClass cls);

// Noise-free expected one-step evolution of the true (unmasked) panel.
BiomarkerPanel expected_next_panel(const PatientLatent& latent, const BiomarkerPanel& current,
                                   Regimen regimen);

// Total planted reduction of one channel for a regimen.
double planted_effect(const PatientLatent& latent, EffectChannel ch, Regimen regimen);

SyntheticCohort generate_synthetic_cohort(const SynthConfig& cfg);

// Mean-reversion rate of every simulated biomarker per encounter.
inline constexpr double kReversionRate = 0.4;

}  // namespace rxrl
