#include "rxrl/edwa.hpp"

#include <cmath>

namespace rxrl {

std::optional<double> edwa_impute(std::span<const TimedValue> series, int query_day,
                                  const EdwaParams& params) {
    double num = 0.0;
    double den = 0.0;
    for (const auto& obs : series) {
        const int lag = query_day - obs.day;
        if (lag < 0 || lag > params.window_days) continue;
        const double w = std::pow(0.5, lag / params.half_life_days);
        num += w * obs.value;
        den += w;
    }
    if (den == 0.0) return std::nullopt;
    return num / den;
}

PatientRecord impute_record(const PatientRecord& record, const EdwaParams& params) {
    PatientRecord out = record;
    for (Biomarker b : kAllBiomarkers) {
        std::vector<TimedValue> seen;
        for (std::size_t i = 0; i < record.encounters.size(); ++i) {
            const auto& enc = record.encounters[i];
            if (const auto& v = enc.panel[b]) {
                seen.push_back({enc.day, *v});
            } else if (auto filled = edwa_impute(seen, enc.day, params)) {
                out.encounters[i].panel[b] = *filled;
            }
        }
    }
    // Imputed pressures may cross; drop the diastolic value rather than break the panel invariant.
    for (auto& enc : out.encounters) {
        auto& sbp = enc.panel[Biomarker::sbp];
        auto& dbp = enc.panel[Biomarker::dbp];
        if (sbp && dbp && !(*sbp > *dbp)) dbp.reset();
    }
    return out;
}

Cohort impute_cohort(std::span<const PatientRecord> cohort, const EdwaParams& params) {
    Cohort out;
    out.reserve(cohort.size());
    for (const auto& p : cohort) out.push_back(impute_record(p, params));
    return out;
}

}  // namespace rxrl
