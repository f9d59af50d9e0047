#include "rxrl/risk.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "rxrl/errors.hpp"

namespace rxrl {

FrsCoefficients FrsCoefficients::framingham_general_cvd() {
    FrsCoefficients c;
    c.female = {
        .ln_age = 2.32888,
        .ln_total_cholesterol = 1.20904,
        .ln_hdl = -0.70833,
        .ln_sbp_untreated = 2.76157,
        .ln_sbp_treated = 2.82263,
        .smoker = 0.52873,
        .diabetes = 0.69154,
        .baseline_survival = 0.95012,
        .mean_linear_predictor = 26.1931,
    };
    c.male = {
        .ln_age = 3.06117,
        .ln_total_cholesterol = 1.12370,
        .ln_hdl = -0.93263,
        .ln_sbp_untreated = 1.93303,
        .ln_sbp_treated = 1.99881,
        .smoker = 0.65451,
        .diabetes = 0.57367,
        .baseline_survival = 0.88936,
        .mean_linear_predictor = 23.9802,
    };
    return c;
}

double frs_linear_predictor(const FrsInput& in, const FrsCoefficients& coef) {
    if (!(in.age > 0.0) || !(in.total_cholesterol > 0.0) || !(in.hdl > 0.0) || !(in.sbp > 0.0))
        throw DomainError("FRS covariates must be strictly positive");
    const auto& b = coef.for_sex(in.sex);
    return b.ln_age * std::log(in.age) + b.ln_total_cholesterol * std::log(in.total_cholesterol) +
           b.ln_hdl * std::log(in.hdl) +
           (in.bp_treated ? b.ln_sbp_treated : b.ln_sbp_untreated) * std::log(in.sbp) +
           (in.smoker ? b.smoker : 0.0) + (in.diabetic ? b.diabetes : 0.0);
}

double frs_risk(const FrsInput& in, const FrsCoefficients& coef) {
    const auto& b = coef.for_sex(in.sex);
    const double lp = frs_linear_predictor(in, coef);
    return 100.0 * (1.0 - std::pow(b.baseline_survival, std::exp(lp - b.mean_linear_predictor)));
}

double frs_delta(const FrsInput& before, const FrsInput& after, const FrsCoefficients& coef) {
    if (before.sex != after.sex) throw DomainError("frs_delta requires inputs of the same sex");
    return frs_risk(before, coef) - frs_risk(after, coef);
}

namespace {

void read_sex(const nlohmann::json& j, FrsSexCoefficients& c) {
    auto get = [&](const char* key, double& out) {
        if (j.contains(key)) out = j.at(key).get<double>();
    };
    get("ln_age", c.ln_age);
    get("ln_total_cholesterol", c.ln_total_cholesterol);
    get("ln_hdl", c.ln_hdl);
    get("ln_sbp_untreated", c.ln_sbp_untreated);
    get("ln_sbp_treated", c.ln_sbp_treated);
    get("smoker", c.smoker);
    get("diabetes", c.diabetes);
    get("baseline_survival", c.baseline_survival);
    get("mean_linear_predictor", c.mean_linear_predictor);
}

}  // namespace

FrsCoefficients load_frs_coefficients(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open coefficient file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed coefficient file " + path.string() + ": " + e.what());
    }
    auto coef = FrsCoefficients::framingham_general_cvd();
    if (j.contains("male")) read_sex(j.at("male"), coef.male);
    if (j.contains("female")) read_sex(j.at("female"), coef.female);
    for (const auto* c : {&coef.male, &coef.female})
        if (!(c->baseline_survival > 0.0 && c->baseline_survival < 1.0))
            throw ConfigError("baseline_survival must lie in (0, 1)");
    return coef;
}

}  // namespace rxrl
