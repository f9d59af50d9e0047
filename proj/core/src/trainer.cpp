#include "rxrl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "rxrl/errors.hpp"
#include "rxrl/seeding.hpp"

namespace rxrl {

void TrainConfig::check() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
    if (minibatch_size < 1) throw ConfigError("minibatch_size must be >= 1");
    if (target_sync_period < 1) throw ConfigError("target_sync_period must be >= 1");
    if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
    if (max_iterations < 0) throw ConfigError("max_iterations must be >= 0");
    if (validation_eval_period < 1) throw ConfigError("validation_eval_period must be >= 1");
    if (!(min_delta >= 0.0)) throw ConfigError("min_delta must be >= 0");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
        throw ConfigError("validation_fraction must lie in (0, 1)");
    if (!(adam.learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
}

std::string_view to_string(StopReason r) {
    switch (r) {
        case StopReason::max_iterations: return "max_iterations";
        case StopReason::early_stop: return "early_stop";
        case StopReason::fixed_l: return "fixed_L";
    }
    return "?";
}

PatientSplit split_indices(std::size_t n, double first_fraction, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_first =
        std::min(n, static_cast<std::size_t>(std::ceil(first_fraction * static_cast<double>(n) - 1e-9)));
    PatientSplit s;
    s.first.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_first));
    s.second.assign(order.begin() + static_cast<std::ptrdiff_t>(n_first), order.end());
    std::sort(s.first.begin(), s.first.end());
    std::sort(s.second.begin(), s.second.end());
    return s;
}

std::pair<Cohort, Cohort> split_patients(std::span<const PatientRecord> cohort,
                                         double train_fraction, std::uint64_t seed) {
    const auto s = split_indices(cohort.size(), train_fraction, seed);
    std::pair<Cohort, Cohort> out;
    for (auto i : s.first) out.first.push_back(cohort[i]);
    for (auto i : s.second) out.second.push_back(cohort[i]);
    return out;
}

double validation_td_error(const QNetworkParams& params, const Batch& batch, double gamma) {
    return td_loss(params, params, batch, gamma).loss;
}

namespace {

double consistency(const QNetworkParams& params, const Batch& batch) {
    if (batch.size() == 0) return 0.0;
    const Eigen::MatrixXd q = forward_batch(params, batch.states);
    std::size_t agree = 0;
    for (Eigen::Index i = 0; i < batch.size(); ++i)
        if (argmax_action(q.row(i).transpose()) == batch.actions[static_cast<std::size_t>(i)]) ++agree;
    return static_cast<double>(agree) / static_cast<double>(batch.size());
}

TrainResult run_training(std::span<const TransitionTuple> transitions,
                         std::span<const TransitionTuple> validation, const TrainConfig& cfg,
                         int n_actions, const TrainHooks& hooks, bool early_stopping,
                         std::int64_t iterations) {
    cfg.check();
    if (transitions.empty()) throw InputError("training transitions are empty");
    if (early_stopping && validation.empty()) throw InputError("validation transitions are empty");
    for (const auto& t : transitions)
        if (t.action_id < 0 || t.action_id >= n_actions)
            throw InputError("action id " + std::to_string(t.action_id) + " outside vocabulary");

    const auto started = std::chrono::steady_clock::now();
    const int input_dim = static_cast<int>(transitions.front().state.size());

    TrainResult result;
    result.params = init_qnetwork(input_dim, n_actions, derive_seed(cfg.seed, "init"),
                                  cfg.hidden_sizes, cfg.dropout_rate);
    QNetworkParams target = result.params;
    AdamState adam = AdamState::for_params(result.params, cfg.adam);
    auto& report = result.report;

    Batch val_batch;
    if (!validation.empty()) val_batch = make_batch(validation);

    std::mt19937_64 sampler(derive_seed(cfg.seed, "minibatch"));
    std::uniform_int_distribution<std::size_t> pick(0, transitions.size() - 1);
    std::vector<std::size_t> rows(cfg.minibatch_size);
    const std::uint64_t mask_stream = derive_seed(cfg.seed, "dropout");

    double last_loss = 0.0;
    std::int64_t k = 0;
    report.stop_reason = early_stopping ? StopReason::max_iterations : StopReason::fixed_l;
    for (k = 1; k <= iterations; ++k) {
        for (auto& r : rows) r = pick(sampler);
        const Batch batch = make_batch(transitions, rows);
        const Eigen::VectorXd targets = td_targets(target, batch, cfg.gamma);
        auto lg = backward(result.params, batch, targets,
                           ForwardMode::training(derive_seed(mask_stream, static_cast<std::uint64_t>(k))));
        if (!std::isfinite(lg.loss)) throw DivergenceError(k);
        adam_step(result.params, lg.gradient, adam);
        if (!result.params.all_finite()) throw DivergenceError(k);
        last_loss = lg.loss;

        if (k % cfg.target_sync_period == 0) target = result.params;
        if (hooks.on_iteration) hooks.on_iteration(k, result.params, target);

        if (early_stopping && k % cfg.validation_eval_period == 0) {
            ValidationPoint pt;
            pt.iteration = k;
            pt.td_error = hooks.validation_override
                              ? hooks.validation_override(k, result.params)
                              : validation_td_error(result.params, val_batch, cfg.gamma);
            if (!std::isfinite(pt.td_error)) throw DivergenceError(k);
            pt.consistency = consistency(result.params, val_batch);
            report.curve.push_back(pt);
            if (hooks.on_validation) hooks.on_validation(pt);
            if (pt.td_error < report.best_td_error - cfg.min_delta) {
                report.best_td_error = pt.td_error;
                report.best_iteration = k;
            }
            if (k - report.best_iteration >= cfg.early_stop_patience) {
                report.stop_reason = StopReason::early_stop;
                break;
            }
        }
    }
    report.iterations_run = std::min(k, iterations);

    // Without early stopping there is no validation curve; record one closing point.
    if (!early_stopping && !validation.empty()) {
        ValidationPoint pt{report.iterations_run,
                           validation_td_error(result.params, val_batch, cfg.gamma),
                           consistency(result.params, val_batch)};
        report.curve.push_back(pt);
        report.best_td_error = pt.td_error;
        report.best_iteration = report.iterations_run;
    }

    result.params.training.iterations = report.iterations_run;
    result.params.training.final_td_error =
        report.curve.empty() ? last_loss : report.curve.back().td_error;
    result.params.training.seed = cfg.seed;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

}  // namespace

TrainResult train_dqn(std::span<const TransitionTuple> transitions,
                      std::span<const TransitionTuple> validation, const TrainConfig& cfg,
                      int n_actions, const TrainHooks& hooks) {
    if (transitions.empty()) throw InputError("training transitions are empty");
    if (cfg.max_iterations == 0) {
        cfg.check();
        TrainResult r;
        r.params = init_qnetwork(static_cast<int>(transitions.front().state.size()), n_actions,
                                 derive_seed(cfg.seed, "init"), cfg.hidden_sizes, cfg.dropout_rate);
        r.params.training.seed = cfg.seed;
        r.report.stop_reason = StopReason::max_iterations;
        return r;
    }
    return run_training(transitions, validation, cfg, n_actions, hooks, true, cfg.max_iterations);
}

FullSchemeResult train_full_scheme(std::span<const TransitionTuple> transitions,
                                   const TrainConfig& cfg, int n_actions, const TrainHooks& hooks) {
    cfg.check();
    if (transitions.empty()) throw InputError("training transitions are empty");

    // Patient ids in first-seen order.
    std::vector<std::string> patients;
    std::map<std::string, std::size_t> slot;
    for (const auto& t : transitions)
        if (slot.emplace(t.patient_id, patients.size()).second) patients.push_back(t.patient_id);
    if (patients.size() < 2)
        throw InputError("need at least two patients to hold out a validation cohort");

    auto split = split_indices(patients.size(), cfg.validation_fraction, derive_seed(cfg.seed, "holdout"));
    // Never leave the fitting side empty.
    if (split.second.empty()) {
        split.second.push_back(split.first.back());
        split.first.pop_back();
    }
    std::set<std::string> held_out;
    FullSchemeResult out;
    for (auto i : split.first) {
        held_out.insert(patients[i]);
        out.validation_patients.push_back(patients[i]);
    }

    std::vector<TransitionTuple> fit_part, val_part;
    for (const auto& t : transitions)
        (held_out.count(t.patient_id) ? val_part : fit_part).push_back(t);

    TrainResult step_a = train_dqn(fit_part, val_part, cfg, n_actions, hooks);
    out.holdout = step_a.report;
    const std::int64_t L = step_a.report.iterations_run;

    TrainHooks step_b_hooks;
    step_b_hooks.on_iteration = hooks.on_iteration;
    TrainResult step_b = run_training(transitions, {}, cfg, n_actions, step_b_hooks, false, L);
    step_b.report.stop_reason = StopReason::fixed_l;
    out.params = std::move(step_b.params);
    out.final_run = std::move(step_b.report);
    return out;
}

}  // namespace rxrl
