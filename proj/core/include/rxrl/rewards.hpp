#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>

namespace rxrl {

enum class Target { glycemia, bp, cvd, multimorbidity };

std::string_view to_string(Target t);
Target parse_target(std::string_view s);

struct StandardizationStats {
    double mean = 0.0;
    double sd = 1.0;
};

// Per-transition rewards of the three single-outcome targets, before combining.
struct RewardComponents {
    double glycemia = 0.0;
    double bp = 0.0;
    double cvd = 0.0;
};

struct RewardParams {
    double a1c_threshold = 5.6;
    double a1c_sigma = 1.58;
    double sbp_threshold = 120.0;
    double sbp_sigma = 17.7;
    double discount = 0.9;
    // glycemia, bp, cvd order; absent until fitted on training transitions.
    std::optional<std::array<StandardizationStats, 3>> multimorbidity_stats;

    void check() const;
};

// Improvement-positive reward for A1c: zero unless both values are at or above the threshold.
double glycemia_reward(double a1c_t, double a1c_next, const RewardParams& params = {});
double bp_reward(double sbp_t, double sbp_next, const RewardParams& params = {});
double cvd_reward(double frs_t, double frs_next);

// Mean of the three standardized component rewards. Throws StateError if unfitted.
double multimorbidity_reward(const RewardComponents& r, const RewardParams& params);

// Fits mean and sample sd of each component; a zero sd is replaced by 1.
std::array<StandardizationStats, 3> fit_multimorbidity_stats(
    std::span<const RewardComponents> components);

double target_reward(Target t, const RewardComponents& r, const RewardParams& params);

}  // namespace rxrl
