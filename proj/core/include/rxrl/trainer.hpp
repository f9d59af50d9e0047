#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rxrl/cohort.hpp"
#include "rxrl/qnet.hpp"

namespace rxrl {

struct TrainConfig {
    double gamma = 0.9;
    std::size_t minibatch_size = 256;
    std::int64_t target_sync_period = 1000;
    AdamConfig adam;
    // Iterations without validation improvement before stopping; checked at eval points.
    std::int64_t early_stop_patience = 5000;
    std::int64_t max_iterations = 20000;
    std::int64_t validation_eval_period = 100;
    // A validation error counts as an improvement when below best - min_delta.
    double min_delta = 0.0;
    std::vector<int> hidden_sizes = kDefaultHiddenSizes;
    double dropout_rate = 0.5;
    double validation_fraction = 0.2;
    std::uint64_t seed = 0;

    static constexpr std::int64_t kNoEarlyStop = std::numeric_limits<std::int64_t>::max();

    void check() const;  // throws ConfigError
};

enum class StopReason { max_iterations, early_stop, fixed_l };
std::string_view to_string(StopReason r);

struct ValidationPoint {
    std::int64_t iteration = 0;
    double td_error = 0.0;
    // Share of validation rows where the greedy action equals the logged one.
    double consistency = 0.0;
};

struct TrainReport {
    std::int64_t iterations_run = 0;
    std::vector<ValidationPoint> curve;
    double best_td_error = std::numeric_limits<double>::infinity();
    std::int64_t best_iteration = 0;
    StopReason stop_reason = StopReason::max_iterations;
    double wall_seconds = 0.0;
};

// Optional instrumentation for tests and logging.
struct TrainHooks {
    // Replaces the validation TD error computation when set.
    std::function<double(std::int64_t iteration, const QNetworkParams& params)> validation_override;
    // Called after every update with the online and target networks.
    std::function<void(std::int64_t iteration, const QNetworkParams& params,
                       const QNetworkParams& target)> on_iteration;
    // Called at every validation point.
    std::function<void(const ValidationPoint&)> on_validation;
};

struct TrainResult {
    QNetworkParams params;
    TrainReport report;
};

struct PatientSplit {
    std::vector<std::size_t> first;   // indices into the input, ascending
    std::vector<std::size_t> second;
};

// Patient-level random split; the first part gets ceil(fraction * n).
PatientSplit split_indices(std::size_t n, double first_fraction, std::uint64_t seed);

std::pair<Cohort, Cohort> split_patients(std::span<const PatientRecord> cohort,
                                         double train_fraction, std::uint64_t seed);

// Mean squared TD error with Q(s'; params) bootstrapping, eval mode.
double validation_td_error(const QNetworkParams& params, const Batch& batch, double gamma);

// Batch DQN: uniform minibatches with replacement, fixed targets from a lagged
// copy synced every target_sync_period, Adam on the TD gradient, early
// stopping on validation TD error. Returns the parameters at stop.
TrainResult train_dqn(std::span<const TransitionTuple> transitions,
                      std::span<const TransitionTuple> validation, const TrainConfig& cfg,
                      int n_actions, const TrainHooks& hooks = {});

struct FullSchemeResult {
    QNetworkParams params;   // the step-B model
    TrainReport holdout;     // step A, with early stopping
    TrainReport final_run;   // step B, exactly L iterations
    std::vector<std::string> validation_patients;
};

// Step A: hold out a fraction of patients, train the rest with early stopping,
// and record L. Step B: retrain from a fresh init on every transition for L iterations.
FullSchemeResult train_full_scheme(std::span<const TransitionTuple> transitions,
                                   const TrainConfig& cfg, int n_actions,
                                   const TrainHooks& hooks = {});

}  // namespace rxrl
