#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "rxrl/preprocess.hpp"
#include "rxrl/rewards.hpp"

namespace rxrl {

// Row-vector convention: out = in * weight + bias, weight is fan_in x fan_out.
struct DenseLayer {
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;

    bool operator==(const DenseLayer& o) const {
        return weight.rows() == o.weight.rows() && weight.cols() == o.weight.cols() &&
               bias.size() == o.bias.size() && weight == o.weight && bias == o.bias;
    }
};

enum class Activation : std::uint8_t { relu = 1 };

struct TrainingMeta {
    std::int64_t iterations = 0;
    double final_td_error = 0.0;
    std::uint64_t seed = 0;
    bool operator==(const TrainingMeta&) const = default;
};

inline const std::vector<int> kDefaultHiddenSizes = {256, 512, 256};

// The model artifact: network weights plus everything needed to use them.
struct QNetworkParams {
    std::vector<DenseLayer> layers;
    Activation activation = Activation::relu;
    double dropout_rate = 0.5;

    FeatureStats feature_stats;
    ActionVocabulary vocabulary;
    RewardParams reward_params;
    TrainingMeta training;

    int input_dim() const { return static_cast<int>(layers.front().weight.rows()); }
    int n_actions() const { return static_cast<int>(layers.back().weight.cols()); }
    std::vector<int> layer_sizes() const;
    bool all_finite() const;
};

// Gradients share the parameter layout.
using Gradient = std::vector<DenseLayer>;

Gradient zeros_like(const QNetworkParams& params);

// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
QNetworkParams init_qnetwork(int input_dim, int n_actions, std::uint64_t seed,
                             const std::vector<int>& hidden = kDefaultHiddenSizes,
                             double dropout_rate = 0.5);

// Eval runs without dropout. Train drops each hidden unit with the params'
// dropout rate and rescales survivors, with masks drawn from mask_seed.
struct ForwardMode {
    bool train = false;
    std::uint64_t mask_seed = 0;

    static ForwardMode eval() { return {}; }
    static ForwardMode training(std::uint64_t seed) { return {true, seed}; }
};

Eigen::VectorXd forward(const QNetworkParams& params, const StateVector& state,
                        ForwardMode mode = ForwardMode::eval());

// states is batch x input_dim; result is batch x n_actions.
Eigen::MatrixXd forward_batch(const QNetworkParams& params, const Eigen::MatrixXd& states,
                              ForwardMode mode = ForwardMode::eval());

// Dense view of a set of transitions.
struct Batch {
    Eigen::MatrixXd states;
    Eigen::MatrixXd next_states;
    std::vector<int> actions;
    Eigen::VectorXd rewards;
    std::vector<bool> terminal;

    Eigen::Index size() const { return states.rows(); }
};

Batch make_batch(std::span<const TransitionTuple> tuples);
Batch make_batch(std::span<const TransitionTuple> tuples, std::span<const std::size_t> rows);

// r + gamma * max_a' Q(s', a'; target_params), or r for terminal rows. Eval mode.
Eigen::VectorXd td_targets(const QNetworkParams& target_params, const Batch& batch, double gamma);

struct TdLoss {
    double loss = 0.0;
    Eigen::VectorXd targets;
    Eigen::VectorXd predictions;
};

// Mean squared TD error with targets held fixed. Eval mode on both networks.
TdLoss td_loss(const QNetworkParams& params, const QNetworkParams& target_params,
               const Batch& batch, double gamma);

struct LossAndGradient {
    double loss = 0.0;
    Gradient gradient;
};

// Exact gradient of mean_i (Q(s_i, a_i) - target_i)^2. Only the taken action's
// output contributes per row. In train mode the masks come from mode.mask_seed.
LossAndGradient backward(const QNetworkParams& params, const Batch& batch,
                         const Eigen::VectorXd& targets, ForwardMode mode = ForwardMode::eval());

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::int64_t step = 0;
    Gradient first_moment;
    Gradient second_moment;

    static AdamState for_params(const QNetworkParams& params, AdamConfig config = {});
};

// Bias-corrected Adam descent step; increments adam.step.
void adam_step(QNetworkParams& params, const Gradient& grad, AdamState& adam);

// Greedy action in eval mode; ties go to the lowest id.
int argmax_action(const Eigen::VectorXd& q);
int recommend(const QNetworkParams& params, const StateVector& state);

inline constexpr std::uint32_t kModelFormatVersion = 1;

void save_qnetwork(const QNetworkParams& params, const std::filesystem::path& path);
QNetworkParams load_qnetwork(const std::filesystem::path& path);

// Serialized bytes; save_qnetwork writes exactly these.
std::string serialize_qnetwork(const QNetworkParams& params);
QNetworkParams deserialize_qnetwork(const std::string& bytes);

}  // namespace rxrl
