#include "rxrl/rewards.hpp"

#include <cmath>
#include <string>

#include "rxrl/errors.hpp"

namespace rxrl {

std::string_view to_string(Target t) {
    switch (t) {
        case Target::glycemia: return "glycemia";
        case Target::bp: return "bp";
        case Target::cvd: return "cvd";
        case Target::multimorbidity: return "multimorbidity";
    }
    return "?";
}

Target parse_target(std::string_view s) {
    if (s == "glycemia") return Target::glycemia;
    if (s == "bp") return Target::bp;
    if (s == "cvd") return Target::cvd;
    if (s == "multimorbidity") return Target::multimorbidity;
    throw ConfigError("unknown target '" + std::string(s) +
                      "' (expected glycemia, bp, cvd or multimorbidity)");
}

void RewardParams::check() const {
    if (!(a1c_sigma > 0.0) || !(sbp_sigma > 0.0)) throw ConfigError("reward sigmas must be > 0");
    if (!(discount > 0.0 && discount < 1.0)) throw ConfigError("discount must lie in (0, 1)");
}

namespace {

double severity_weighted_drop(double now, double next, double threshold, double sigma) {
    if (now >= threshold && next >= threshold) return (now - next) * (now - threshold) / sigma;
    return 0.0;
}

}  // namespace

double glycemia_reward(double a1c_t, double a1c_next, const RewardParams& params) {
    return severity_weighted_drop(a1c_t, a1c_next, params.a1c_threshold, params.a1c_sigma);
}

double bp_reward(double sbp_t, double sbp_next, const RewardParams& params) {
    return severity_weighted_drop(sbp_t, sbp_next, params.sbp_threshold, params.sbp_sigma);
}

double cvd_reward(double frs_t, double frs_next) { return frs_t - frs_next; }

double multimorbidity_reward(const RewardComponents& r, const RewardParams& params) {
    if (!params.multimorbidity_stats)
        throw StateError("multimorbidity standardization stats have not been fitted");
    const auto& s = *params.multimorbidity_stats;
    return ((r.glycemia - s[0].mean) / s[0].sd + (r.bp - s[1].mean) / s[1].sd +
            (r.cvd - s[2].mean) / s[2].sd) /
           3.0;
}

std::array<StandardizationStats, 3> fit_multimorbidity_stats(
    std::span<const RewardComponents> components) {
    std::array<StandardizationStats, 3> out{};
    const auto n = static_cast<double>(components.size());
    if (components.empty()) return out;
    auto field = [](const RewardComponents& c, int k) {
        return k == 0 ? c.glycemia : (k == 1 ? c.bp : c.cvd);
    };
    for (int k = 0; k < 3; ++k) {
        double mean = 0.0;
        for (const auto& c : components) mean += field(c, k);
        mean /= n;
        double ss = 0.0;
        for (const auto& c : components) ss += (field(c, k) - mean) * (field(c, k) - mean);
        const double sd = components.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        out[k] = {mean, sd > 0.0 ? sd : 1.0};
    }
    return out;
}

double target_reward(Target t, const RewardComponents& r, const RewardParams& params) {
    switch (t) {
        case Target::glycemia: return r.glycemia;
        case Target::bp: return r.bp;
        case Target::cvd: return r.cvd;
        case Target::multimorbidity: return multimorbidity_reward(r, params);
    }
    return 0.0;
}

}  // namespace rxrl
