#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rxrl/knn.hpp"
#include "rxrl/pca.hpp"
#include "rxrl/qnet.hpp"
#include "rxrl/stats.hpp"

namespace rxrl {

enum class Outcome { a1c, sbp, frs };
inline constexpr int kOutcomeCount = 3;
inline constexpr std::array<Outcome, kOutcomeCount> kAllOutcomes = {Outcome::a1c, Outcome::sbp,
                                                                    Outcome::frs};
std::string_view to_string(Outcome o);

// Exceedance cut-offs: A1c > 8 %, SBP > 140 mmHg, FRS > 20 %.
double outcome_threshold(Outcome o);

// One logged decision with its next-encounter outcomes.
struct EvalEncounter {
    std::string patient_id;
    int encounter_index = 0;
    StateVector state;  // standardized
    int logged_action = 0;
    Regimen logged_regimen;
    std::array<double, kOutcomeCount> outcome{};  // NaN when missing after imputation
    Sex sex = Sex::male;
    Race race = Race::white;
    bool smoker = false;
    double age = 0.0;
};

// Every consecutive encounter pair of every patient; the cohort should already be imputed.
std::vector<EvalEncounter> build_eval_encounters(
    std::span<const PatientRecord> cohort, const ActionVocabulary& vocab, const FeatureStats& stats,
    const FrsCoefficients& coef = FrsCoefficients::framingham_general_cvd());

Eigen::MatrixXd state_matrix(std::span<const EvalEncounter> encounters);

// One kNN index per outcome over the PCA-projected pool.
struct OutcomeIndex {
    PcaModel pca;
    std::array<KnnIndex, kOutcomeCount> index;
};
OutcomeIndex build_outcome_index(const PcaModel& pca, std::span<const EvalEncounter> pool);

struct EncounterRow {
    std::string patient_id;
    int encounter_index = 0;
    int logged_action = 0;
    int policy_action = 0;
    bool consistent = false;
    std::array<double, kOutcomeCount> clinician_outcome{};
    std::array<double, kOutcomeCount> policy_outcome{};  // observed if consistent, else imputed; NaN if unsupported
    std::array<std::size_t, kOutcomeCount> neighbors_used{};
    bool fewer_than_k = false;
    bool tie_expanded = false;
    bool unsupported = false;
    int logged_size = 0;
    int policy_size = 0;
    Sex sex = Sex::male;
    Race race = Race::white;
    bool smoker = false;
    double age = 0.0;
};

struct OutcomeComparison {
    Outcome outcome = Outcome::a1c;
    MeanSe policy;
    MeanSe clinician;
    double threshold = 0.0;
    std::size_t policy_exceed = 0;
    std::size_t clinician_exceed = 0;
    double policy_rate = 0.0;
    double clinician_rate = 0.0;
    std::optional<TestResult> mean_test;  // Welch
    std::optional<TestResult> rate_test;  // two-proportion z
};

struct SubgroupRow {
    std::string dimension;
    std::string group;
    std::size_t encounters = 0;
    std::size_t concordant = 0;
    std::size_t discrepant = 0;
    std::array<MeanSe, kOutcomeCount> policy{};
    std::array<MeanSe, kOutcomeCount> clinician{};
};

struct DiscrepancyCell {
    int clinician_action = 0;
    int policy_action = 0;
    std::size_t count = 0;
    // Mean of policy minus clinician outcome over supported rows; NaN if none.
    std::array<double, kOutcomeCount> mean_delta{};
};

struct HistogramRow {
    int n_subclasses = 0;
    std::size_t clinician = 0;
    std::size_t policy = 0;
};

struct EvalOptions {
    std::size_t k = 10;
    double variance_target = 0.90;
    unsigned threads = 1;
};

struct EvalReport {
    Target target = Target::glycemia;
    std::size_t k = 10;
    int pca_components = 0;
    double pca_explained = 0.0;
    std::size_t total = 0;
    std::size_t concordant = 0;
    std::size_t discrepant = 0;
    std::size_t unsupported = 0;
    std::size_t fewer_than_k = 0;
    std::size_t tie_expanded = 0;
    double concordance = 0.0;
    std::array<OutcomeComparison, kOutcomeCount> outcomes{};
    std::vector<SubgroupRow> subgroups;
    std::vector<DiscrepancyCell> discrepancy;
    std::vector<HistogramRow> histogram;
    std::vector<EncounterRow> rows;
};

// Scores the greedy policy against logged decisions on `encounters`. The kNN
// pool is `encounters` plus `extra_pool` (for a train+test pool). Throws
// InputError on an empty set and VocabularyMismatchError when the model was
// trained on a different action vocabulary.
EvalReport evaluate_policy(const QNetworkParams& model, const ActionVocabulary& vocab,
                           std::span<const EvalEncounter> encounters, const EvalOptions& options,
                           std::span<const EvalEncounter> extra_pool = {});

// Aggregates recomputed from per-encounter rows alone.
void summarize_rows(EvalReport& report);

struct ValidityRow {
    Outcome outcome = Outcome::a1c;
    std::size_t n = 0;
    std::size_t skipped = 0;
    double imputed_mean = 0.0;
    double observed_mean = 0.0;
    std::optional<double> pearson_r;
};

struct ValidityReport {
    std::size_t k = 10;
    std::array<ValidityRow, kOutcomeCount> rows{};
};

// Leave-one-out imputation of each encounter's own logged action.
ValidityReport imputation_validity_check(std::span<const EvalEncounter> encounters,
                                         const PcaModel& pca, std::size_t k);

// Same check at several k.
std::vector<ValidityReport> validity_sensitivity(std::span<const EvalEncounter> encounters,
                                                 const PcaModel& pca,
                                                 std::span<const std::size_t> ks);

struct FeatureBlock {
    std::string name;
    std::vector<int> features;
};

// demographics, one block per biomarker (current and trailing mean),
// prescription history, encounter timing.
std::vector<FeatureBlock> default_feature_blocks();

struct ImportanceScore {
    std::string block;
    double score = 0.0;  // share of recommendations that change, in [0, 1]
};

// Shuffles one block at a time across rows and measures how often the greedy
// action changes, averaged over repeats. Sorted by descending score.
std::vector<ImportanceScore> permutation_importance(
    const QNetworkParams& model, const Eigen::MatrixXd& states, int n_repeats, std::uint64_t seed,
    const std::vector<FeatureBlock>& blocks = default_feature_blocks());

struct PlantedAgreement {
    std::size_t n = 0;
    double policy = 0.0;     // share of rows where the policy picks the planted optimum
    double clinician = 0.0;  // same for the logged regimen
};

// truth maps patient id to the planted optimal regimen for the report's target.
PlantedAgreement planted_agreement(const EvalReport& report, const ActionVocabulary& vocab,
                                   const std::map<std::string, Regimen>& truth);

}  // namespace rxrl
