#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rxrl/cohort.hpp"
#include "rxrl/rewards.hpp"
#include "rxrl/risk.hpp"

namespace rxrl {

using StateVector = Eigen::VectorXd;

// Fixed state layout.
namespace layout {
inline constexpr int kAge = 0;
inline constexpr int kSexFemale = 1;
inline constexpr int kRaceBegin = 2;
inline constexpr int kSmoker = kRaceBegin + kRaceCount;               // 7
inline constexpr int kCurrentBegin = kSmoker + 1;                     // 8
inline constexpr int kTrailingBegin = kCurrentBegin + kBiomarkerCount;   // 18
inline constexpr int kHistoryBegin = kTrailingBegin + kBiomarkerCount;   // 28
inline constexpr int kDaysSincePrevious = kHistoryBegin + kSubclassCount;  // 52
inline constexpr int kDaysSinceFirst = kDaysSincePrevious + 1;             // 53
inline constexpr int kStateDim = kDaysSinceFirst + 1;                      // 54

inline constexpr int current(Biomarker b) { return kCurrentBegin + static_cast<int>(b); }
inline constexpr int trailing(Biomarker b) { return kTrailingBegin + static_cast<int>(b); }
inline constexpr int history(Subclass c) { return kHistoryBegin + static_cast<int>(c); }

bool is_continuous(int feature);
const std::vector<std::string>& feature_names();
}  // namespace layout

// Window for trailing biomarker means and prescription history, inclusive.
inline constexpr int kHistoryWindowDays = 183;

struct FeatureStats {
    std::vector<double> mean;
    std::vector<double> sd;

    std::size_t dim() const { return mean.size(); }
    bool operator==(const FeatureStats&) const = default;
};

class ActionVocabulary {
public:
    ActionVocabulary() = default;
    ActionVocabulary(Target target, std::vector<Regimen> regimens,
                     std::vector<std::uint64_t> frequencies);

    Target target() const { return target_; }
    int size() const { return static_cast<int>(regimens_.size()); }
    Regimen regimen(int id) const { return regimens_.at(static_cast<std::size_t>(id)); }
    std::uint64_t frequency(int id) const { return frequencies_.at(static_cast<std::size_t>(id)); }
    const std::vector<Regimen>& regimens() const { return regimens_; }
    const std::vector<std::uint64_t>& frequencies() const { return frequencies_; }

    // Subclasses the target is allowed to prescribe.
    Regimen allowed() const;

    std::optional<int> find(Regimen r) const;

    // Restricts to the target's classes, then picks the exact entry or, failing
    // that, the largest vocabulary entry contained in it (earlier id on ties).
    int map(Regimen logged) const;

    bool operator==(const ActionVocabulary& o) const {
        return target_ == o.target_ && regimens_ == o.regimens_ && frequencies_ == o.frequencies_;
    }

    static constexpr int kEmptyId = 0;

private:
    Target target_ = Target::glycemia;
    std::vector<Regimen> regimens_;
    std::vector<std::uint64_t> frequencies_;
    std::unordered_map<std::uint32_t, int> index_;
};

Regimen target_classes(Target t);

// Empty regimen is always id 0; the rest follow by descending frequency, then lexicographically.
ActionVocabulary build_action_vocab(std::span<const PatientRecord> cohort, Target target,
                                    std::uint64_t min_count = 5);

// Subclasses prescribed at prior encounters within the trailing window.
Regimen prescription_history(const PatientRecord& record, std::size_t encounter_index);

double age_at(const PatientRecord& record, std::size_t encounter_index);

// Raw features; biomarkers missing after imputation come out as NaN unless stats
// are given, in which case continuous features are z-scored and NaN becomes 0.
StateVector featurize(const PatientRecord& record, std::size_t encounter_index,
                      const FeatureStats* stats = nullptr);

StateVector standardize(const StateVector& raw, const FeatureStats& stats);

// Means and sample sds over non-NaN values of continuous features; binary
// features get (0, 1) so they pass through unchanged. Zero-variance sd becomes 1.
FeatureStats fit_feature_stats(std::span<const StateVector> raw_states);

std::optional<FrsInput> frs_input_at(const PatientRecord& record, std::size_t encounter_index);

// Component rewards for the transition from encounter i to i + 1. A component
// whose biomarkers are missing after imputation contributes 0.
RewardComponents transition_rewards(const PatientRecord& record, std::size_t i,
                                    const RewardParams& params,
                                    const FrsCoefficients& coef = FrsCoefficients::framingham_general_cvd());

struct TransitionTuple {
    StateVector state;
    int action_id = 0;
    double reward = 0.0;
    StateVector next_state;
    bool terminal = false;
    std::string patient_id;
    int encounter_index = 0;
};

struct TransitionDataset {
    std::vector<TransitionTuple> tuples;
    FeatureStats stats;
    RewardParams reward_params;
};

// Fitting mode: feature stats and (for multimorbidity) reward standardization
// come from this cohort. Throws EmptyDatasetError if no patient has two encounters.
TransitionDataset build_transitions(std::span<const PatientRecord> cohort, Target target,
                                    const ActionVocabulary& vocab, RewardParams params,
                                    const FrsCoefficients& coef = FrsCoefficients::framingham_general_cvd());

// Frozen mode: reuse statistics fitted on a training cohort.
std::vector<TransitionTuple> build_transitions_frozen(
    std::span<const PatientRecord> cohort, Target target, const ActionVocabulary& vocab,
    const FeatureStats& stats, const RewardParams& params,
    const FrsCoefficients& coef = FrsCoefficients::framingham_general_cvd());

}  // namespace rxrl
