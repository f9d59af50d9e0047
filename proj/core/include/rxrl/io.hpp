#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "rxrl/cohort.hpp"
#include "rxrl/evaluator.hpp"
#include "rxrl/preprocess.hpp"
#include "rxrl/synth.hpp"
#include "rxrl/trainer.hpp"

namespace rxrl {

// Cohort files: one JSON patient object per line, missing biomarkers as null.
void write_cohort(std::span<const PatientRecord> cohort, const std::filesystem::path& path);
void write_cohort(std::span<const PatientRecord> cohort, std::ostream& out);
// Throws ParseError (with line number) or ValidationError (with patient id).
Cohort read_cohort(const std::filesystem::path& path);
Cohort read_cohort(std::istream& in);

// Ground truth: one {"patient_id", "optimal": {target: [codes]}} object per line.
void write_ground_truth(std::span<const GroundTruthEntry> truth, const std::filesystem::path& path);
GroundTruth read_ground_truth(const std::filesystem::path& path);
std::map<std::string, Regimen> truth_for_target(std::span<const GroundTruthEntry> truth, Target t);

void write_transitions(std::span<const TransitionTuple> tuples, const std::filesystem::path& path);
std::vector<TransitionTuple> read_transitions(const std::filesystem::path& path);

// Sidecar written next to prepared transitions and read by train/evaluate.
struct PreparedMetadata {
    Target target = Target::glycemia;
    FeatureStats feature_stats;
    ActionVocabulary vocabulary;
    RewardParams reward_params;
    std::uint64_t split_seed = 0;
    std::vector<std::string> train_patients;
    std::vector<std::string> test_patients;
    std::size_t train_transitions = 0;
    std::size_t test_transitions = 0;
};

void write_metadata(const PreparedMetadata& meta, const std::filesystem::path& path);
PreparedMetadata read_metadata(const std::filesystem::path& path);

void write_train_report(const FullSchemeResult& result, const TrainConfig& cfg,
                        const std::filesystem::path& path);

struct EvalArtifacts {
    EvalReport report;
    ValidityReport validity;
    std::vector<ValidityReport> sensitivity;
    std::vector<ImportanceScore> importance;
    std::optional<PlantedAgreement> planted;
};

// eval_report.json plus discrepancy_matrix.csv, subgroups.csv, encounters.csv,
// prescription_counts.csv, importance.csv in `dir`.
void write_eval_artifacts(const EvalArtifacts& art, const ActionVocabulary& vocab,
                          const std::filesystem::path& dir);

// RFC 4180 field quoting.
std::string csv_field(const std::string& s);

}  // namespace rxrl
