#pragma once

#include <optional>
#include <span>

#include "rxrl/cohort.hpp"

namespace rxrl {

struct TimedValue {
    int day = 0;
    double value = 0.0;
};

// Exponentially decaying weighted average over a trailing window.
// Weight of an observation lagging the query by d days is 0.5^(d / half_life_days).
struct EdwaParams {
    int window_days = 90;
    double half_life_days = 30.0;
};

// Returns nothing when no observation falls in [query_day - window, query_day].
std::optional<double> edwa_impute(std::span<const TimedValue> series, int query_day,
                                  const EdwaParams& params = {});

// Fills every missing biomarker from the same patient's observed values.
// Only originally observed values feed the average, never earlier imputations.
PatientRecord impute_record(const PatientRecord& record, const EdwaParams& params = {});
Cohort impute_cohort(std::span<const PatientRecord> cohort, const EdwaParams& params = {});

}  // namespace rxrl
