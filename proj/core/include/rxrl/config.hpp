#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "rxrl/rewards.hpp"
#include "rxrl/synth.hpp"
#include "rxrl/trainer.hpp"

namespace rxrl {

enum class NeighborPool { test, train_test };
std::string_view to_string(NeighborPool p);

struct EvalConfig {
    std::size_t k = 10;
    double variance_target = 0.90;
    NeighborPool neighbor_pool = NeighborPool::test;
    int importance_repeats = 5;
    std::vector<std::size_t> sensitivity_ks = {8, 9, 10};
};

struct PathsConfig {
    std::filesystem::path cohort = "cohort.jsonl";
    std::filesystem::path truth = "ground_truth.jsonl";
    std::filesystem::path prepared = "prepared";  // directory
    std::filesystem::path model = "model.rxq";
    std::filesystem::path reports = "reports";    // directory
};

struct PipelineConfig {
    PathsConfig paths;
    Target target = Target::glycemia;
    double train_fraction = 0.6;
    std::uint64_t min_count = 5;
    SynthConfig synth;
    TrainConfig train;
    EvalConfig eval;
    std::uint64_t seed = 0;
    unsigned threads = 1;

    // Per-stage seeds derived from the global seed.
    std::uint64_t synth_seed() const;
    std::uint64_t split_seed() const;
    std::uint64_t train_seed() const;
    std::uint64_t importance_seed() const;

    void check() const;  // throws ConfigError
};

// One settable key, e.g. "train.learning_rate".
struct ConfigKey {
    std::string key;
    std::string help;
    std::function<void(PipelineConfig&, const std::string&)> set;
    std::function<std::string(const PipelineConfig&)> get;
};

const std::vector<ConfigKey>& config_keys();

// Throws ConfigError for unknown keys or unparsable values.
void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value);

// Flat "section.key = value" lines; '#' starts a comment; blank lines ignored.
void apply_config_text(PipelineConfig& cfg, const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);

// Every key in registry order, in the same format load_config reads.
std::string dump_config(const PipelineConfig& cfg);

}  // namespace rxrl
