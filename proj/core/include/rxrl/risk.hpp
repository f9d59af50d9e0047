#pragma once

#include <filesystem>

#include "rxrl/cohort.hpp"

namespace rxrl {

// Covariates of the sex-specific general cardiovascular 10-year risk profile.
struct FrsInput {
    double age = 0.0;
    Sex sex = Sex::male;
    double total_cholesterol = 0.0;
    double hdl = 0.0;
    double sbp = 0.0;
    bool bp_treated = false;
    bool smoker = false;
    bool diabetic = true;
};

struct FrsSexCoefficients {
    double ln_age = 0.0;
    double ln_total_cholesterol = 0.0;
    double ln_hdl = 0.0;
    double ln_sbp_untreated = 0.0;
    double ln_sbp_treated = 0.0;
    double smoker = 0.0;
    double diabetes = 0.0;
    double baseline_survival = 0.0;   // S0 at 10 years
    double mean_linear_predictor = 0.0;
};

struct FrsCoefficients {
    FrsSexCoefficients male;
    FrsSexCoefficients female;

    const FrsSexCoefficients& for_sex(Sex s) const { return s == Sex::male ? male : female; }

    // D'Agostino et al., Circulation 2008;117:743-753, general CVD model with lipids.
    static FrsCoefficients framingham_general_cvd();
};

// Linear predictor sum(beta * x) for the input's sex.
double frs_linear_predictor(const FrsInput& in, const FrsCoefficients& coef);

// 10-year risk in percent: 100 * (1 - S0^exp(L - Lbar)).
// Throws DomainError for a non-positive continuous covariate.
double frs_risk(const FrsInput& in,
                const FrsCoefficients& coef = FrsCoefficients::framingham_general_cvd());

// Percentage-point change; positive means risk went down.
double frs_delta(const FrsInput& before, const FrsInput& after,
                 const FrsCoefficients& coef = FrsCoefficients::framingham_general_cvd());

// Override file: JSON object {"male": {...}, "female": {...}} with the
// FrsSexCoefficients field names. Missing fields keep their default.
FrsCoefficients load_frs_coefficients(const std::filesystem::path& path);

}  // namespace rxrl
