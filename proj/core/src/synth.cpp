#include "rxrl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "rxrl/errors.hpp"
#include "rxrl/seeding.hpp"

namespace rxrl {

namespace {

using Rng = std::mt19937_64;

constexpr double kLipidThreshold = 200.0;
constexpr double kLipidSigma = 40.0;

struct Range {
    double lo, hi;
};

Range clamp_range(Biomarker b) {
    switch (b) {
        case Biomarker::a1c: return {4.0, 16.0};
        case Biomarker::sbp: return {80.0, 220.0};
        case Biomarker::dbp: return {40.0, 140.0};
        case Biomarker::tc:
        case Biomarker::ldl:
        case Biomarker::hdl:
        case Biomarker::triglycerides: return {10.0, 600.0};
        case Biomarker::bmi: return {15.0, 70.0};
        case Biomarker::weight: return {35.0, 250.0};
        case Biomarker::creatinine: return {0.3, 8.0};
    }
    return {0.0, 1e9};
}

double noise_sd(Biomarker b) {
    switch (b) {
        case Biomarker::a1c: return 0.12;
        case Biomarker::sbp: return 3.0;
        case Biomarker::dbp: return 2.0;
        case Biomarker::bmi: return 0.3;
        case Biomarker::weight: return 0.0;  // derived from bmi
        case Biomarker::tc: return 6.0;
        case Biomarker::ldl: return 5.0;
        case Biomarker::hdl: return 1.5;
        case Biomarker::triglycerides: return 10.0;
        case Biomarker::creatinine: return 0.05;
    }
    return 0.0;
}

double clamp_to(Biomarker b, double v) {
    const auto r = clamp_range(b);
    return std::clamp(v, r.lo, r.hi);
}

double round_to(double v, double step) {
    const double inv = std::round(1.0 / step);
    return std::round(v * inv) / inv;
}

double observation_step(Biomarker b) {
    return (b == Biomarker::a1c || b == Biomarker::creatinine) ? 0.01 : 0.1;
}

int channel_index(EffectChannel ch) { return static_cast<int>(ch); }

Regimen single(Subclass c) { return Regimen({c}); }

// Planted best choice per class, from observable demographics and baselines.
Subclass best_glycemic(double age, double bmi_baseline) {
    const bool older = age > 60.0;
    const bool heavy = bmi_baseline > 31.0;
    if (!older && !heavy) return Subclass::BIG;
    if (!older && heavy) return Subclass::GLP1;
    if (older && !heavy) return Subclass::DPP4;
    return Subclass::SGLT2;
}

Subclass best_antihypertensive(double age, Race race) {
    if (race == Race::black) return Subclass::CCB;
    return age > 60.0 ? Subclass::TD : Subclass::ACE;
}

Subclass best_lipid(double tc_baseline, Sex sex) {
    if (tc_baseline > 230.0) return Subclass::PCSK9;
    return sex == Sex::female ? Subclass::HMG : Subclass::HMG_CA;
}

void fill_effects(PatientLatent& latent, EffectChannel ch, TherapeuticClass cls, Subclass best,
                  double best_effect, double other_lo, double other_hi, double off_menu,
                  double scale, Rng& rng) {
    std::uniform_real_distribution<double> other(other_lo, other_hi);
    auto& eff = latent.effect[channel_index(ch)];
    const auto& menu = synthetic_menu(cls);
    for (int i = 0; i < kSubclassCount; ++i) {
        const auto code = static_cast<Subclass>(i);
        if (therapeutic_class(code) != cls) continue;
        const bool on_menu = std::find(menu.begin(), menu.end(), single(code)) != menu.end();
        double e = on_menu ? other(rng) : off_menu;
        if (code == best) e = best_effect;
        eff[i] = e * scale;
    }
}

double severity(double value, double threshold, double sigma) { return (value - threshold) / sigma; }

}  // namespace

std::map<Biomarker, double> SynthConfig::default_missingness() {
    return {
        {Biomarker::sbp, 0.01},           {Biomarker::dbp, 0.01},  {Biomarker::bmi, 0.01},
        {Biomarker::weight, 0.01},        {Biomarker::a1c, 0.08},  {Biomarker::tc, 0.13},
        {Biomarker::ldl, 0.13},           {Biomarker::hdl, 0.13},
        {Biomarker::triglycerides, 0.13}, {Biomarker::creatinine, 0.15},
    };
}

void SynthConfig::check() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!(mean_encounters_per_patient >= 1.0))
        throw ConfigError("mean_encounters_per_patient must be >= 1");
    for (const auto& [b, p] : missingness_rates)
        if (!prob(p))
            throw ConfigError("missingness rate for " + std::string(to_string(b)) +
                              " outside [0, 1]");
    if (!prob(behavior_policy_noise)) throw ConfigError("behavior_policy_noise outside [0, 1]");
    if (!prob(non_t2dm_fraction)) throw ConfigError("non_t2dm_fraction outside [0, 1]");
    if (!(effect_scale > 0.0)) throw ConfigError("effect_scale must be > 0");
    if (!(observation_noise_scale >= 0.0)) throw ConfigError("observation_noise_scale must be >= 0");
    if (!(gap_median_days >= 1.0)) throw ConfigError("gap_median_days must be >= 1");
    if (!(gap_log_sigma >= 0.0)) throw ConfigError("gap_log_sigma must be >= 0");
}

Regimen GroundTruthEntry::for_target(Target t) const {
    switch (t) {
        case Target::glycemia: return glycemia;
        case Target::bp: return bp;
        case Target::cvd: return cvd;
        case Target::multimorbidity: return multimorbidity;
    }
    return {};
}

const std::vector<Regimen>& synthetic_menu(TherapeuticClass cls) {
    static const std::vector<Regimen> glycemic = {
        Regimen(), single(Subclass::BIG), single(Subclass::DPP4), single(Subclass::SGLT2),
        single(Subclass::GLP1), single(Subclass::INSO),
    };
    static const std::vector<Regimen> antihypertensive = {
        Regimen(), single(Subclass::ACE), single(Subclass::ARA), single(Subclass::CCB),
        single(Subclass::TD), single(Subclass::BAB),
    };
    static const std::vector<Regimen> lipid = {
        Regimen(), single(Subclass::HMG), single(Subclass::HMG_CA), single(Subclass::PCSK9),
        single(Subclass::BSS), single(Subclass::LIP),
    };
    switch (cls) {
        case TherapeuticClass::antihyperglycemic: return glycemic;
        case TherapeuticClass::antihypertensive: return antihypertensive;
        case TherapeuticClass::antihyperlipidemic: return lipid;
    }
    return glycemic;
}

Subclass guideline_first_line(TherapeuticClass cls) {
    switch (cls) {
        case TherapeuticClass::antihyperglycemic: return Subclass::BIG;
        case TherapeuticClass::antihypertensive: return Subclass::ACE;
        case TherapeuticClass::antihyperlipidemic: return Subclass::HMG;
    }
    return Subclass::BIG;
}

double planted_effect(const PatientLatent& latent, EffectChannel ch, Regimen regimen) {
    double total = 0.0;
    for (Subclass c : regimen.codes()) total += latent.effect[channel_index(ch)][static_cast<int>(c)];
    return total;
}

BiomarkerPanel expected_next_panel(const PatientLatent& latent, const BiomarkerPanel& current,
                                   Regimen regimen) {
    BiomarkerPanel next;
    auto revert = [&](Biomarker b) {
        const double cur = current[b].value_or(latent.baseline[static_cast<int>(b)]);
        return cur + kReversionRate * (latent.baseline[static_cast<int>(b)] - cur);
    };
    const double d_a1c = planted_effect(latent, EffectChannel::a1c, regimen);
    const double d_sbp = planted_effect(latent, EffectChannel::sbp, regimen);
    const double d_tc = planted_effect(latent, EffectChannel::tc, regimen);

    for (Biomarker b : kAllBiomarkers) {
        double v = revert(b);
        if (b == Biomarker::a1c) v -= d_a1c;
        if (b == Biomarker::sbp) v -= d_sbp;
        if (b == Biomarker::tc) v -= d_tc;
        if (b == Biomarker::ldl) v -= 0.8 * d_tc;
        next[b] = v;
    }
    return next;
}

namespace {

// Applies noise, couples derived vitals, and clamps to physiologic ranges.
void finalize_state(const PatientLatent& latent, BiomarkerPanel& state, double noise_scale,
                    Rng& rng) {
    std::normal_distribution<double> unit(0.0, 1.0);
    for (Biomarker b : kAllBiomarkers) {
        const double z = unit(rng);
        if (b == Biomarker::weight || b == Biomarker::dbp) continue;
        state[b] = clamp_to(b, *state[b] + noise_scale * noise_sd(b) * z);
    }
    const double sbp = *state[Biomarker::sbp];
    const double dbp = latent.dbp_ratio * sbp + noise_scale * noise_sd(Biomarker::dbp) * unit(rng);
    state[Biomarker::dbp] = std::clamp(dbp, 40.0, sbp - 5.0);
    state[Biomarker::weight] =
        clamp_to(Biomarker::weight, *state[Biomarker::bmi] * latent.height_m * latent.height_m);
}

PatientLatent draw_latent(const Demographics& demo, bool diabetic, double effect_scale, Rng& rng) {
    PatientLatent lat;
    lat.diabetic = diabetic;
    auto normal = [&](double m, double s) { return std::normal_distribution<double>(m, s)(rng); };
    auto& base = lat.baseline;
    auto set = [&](Biomarker b, double v) { base[static_cast<int>(b)] = clamp_to(b, v); };
    set(Biomarker::a1c, diabetic ? std::uniform_real_distribution<double>(7.6, 10.4)(rng)
                                 : normal(5.9, 0.2));
    set(Biomarker::sbp, normal(146.0, 12.0));
    set(Biomarker::bmi, normal(31.0, 5.0));
    set(Biomarker::tc, normal(212.0, 28.0));
    set(Biomarker::ldl, 0.62 * base[static_cast<int>(Biomarker::tc)] - 15.0 + normal(0.0, 8.0));
    set(Biomarker::hdl, std::clamp(normal(demo.sex == Sex::female ? 52.0 : 44.0, 9.0), 25.0, 95.0));
    set(Biomarker::triglycerides, normal(165.0, 45.0));
    set(Biomarker::creatinine, std::clamp(normal(1.0, 0.2), 0.5, 2.5));
    lat.height_m = normal(demo.sex == Sex::female ? 1.62 : 1.75, 0.07);
    lat.dbp_ratio = std::clamp(normal(0.58, 0.04), 0.45, 0.7);
    set(Biomarker::dbp, lat.dbp_ratio * base[static_cast<int>(Biomarker::sbp)]);
    set(Biomarker::weight,
        base[static_cast<int>(Biomarker::bmi)] * lat.height_m * lat.height_m);

    const double age = demo.age_at_first_encounter;
    fill_effects(lat, EffectChannel::a1c, TherapeuticClass::antihyperglycemic,
                 best_glycemic(age, base[static_cast<int>(Biomarker::bmi)]), 0.6, 0.12, 0.3, 0.08,
                 effect_scale, rng);
    fill_effects(lat, EffectChannel::sbp, TherapeuticClass::antihypertensive,
                 best_antihypertensive(age, demo.race), 8.0, 1.5, 4.0, 1.0, effect_scale, rng);
    fill_effects(lat, EffectChannel::tc, TherapeuticClass::antihyperlipidemic,
                 best_lipid(base[static_cast<int>(Biomarker::tc)], demo.sex), 25.0, 5.0, 12.0, 3.0,
                 effect_scale, rng);
    return lat;
}

Regimen clinician_regimen(const PatientLatent& lat, const BiomarkerPanel& state, double noise,
                          Rng& rng) {
    const double sev_g = severity(*state[Biomarker::a1c], 5.6, 1.58);
    const double sev_b = severity(*state[Biomarker::sbp], 120.0, 17.7);
    const double sev_l = severity(*state[Biomarker::tc], kLipidThreshold, kLipidSigma);

    std::array<Regimen, 3> per_class{};
    const double top = std::max({sev_g, sev_b, sev_l});
    if (top > 0.0) {
        // Ties go to the earlier class in glycemia, bp, lipid order.
        const int cls = sev_g == top ? 0 : (sev_b == top ? 1 : 2);
        per_class[cls] = single(guideline_first_line(static_cast<TherapeuticClass>(cls)));
    }
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int cls = 0; cls < 3; ++cls) {
        const double draw = u(rng);
        const auto& menu = synthetic_menu(static_cast<TherapeuticClass>(cls));
        std::uniform_int_distribution<std::size_t> pick(0, menu.size() - 1);
        const std::size_t choice = pick(rng);
        if (cls == 0 && !lat.diabetic) continue;  // only metformin-class for non-diabetics
        if (draw < noise) per_class[cls] = menu[choice];
    }
    return per_class[0] | per_class[1] | per_class[2];
}

BiomarkerPanel observe(const BiomarkerPanel& state, const std::map<Biomarker, double>& missing,
                       Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    BiomarkerPanel obs;
    for (Biomarker b : kAllBiomarkers) {
        const double draw = u(rng);
        const auto it = missing.find(b);
        const double rate = it == missing.end() ? 0.0 : it->second;
        if (draw < rate) continue;
        obs[b] = round_to(*state[b], observation_step(b));
    }
    // Rounding can make a tight pair touch; keep sbp > dbp.
    if (obs[Biomarker::sbp] && obs[Biomarker::dbp] && !(*obs[Biomarker::sbp] > *obs[Biomarker::dbp]))
        obs[Biomarker::dbp].reset();
    return obs;
}

}  // namespace

SyntheticCohort generate_synthetic_cohort(const SynthConfig& cfg) {
    cfg.check();
    SyntheticCohort out;
    out.patients.reserve(cfg.n_patients);
    for (std::size_t i = 0; i < cfg.n_patients; ++i) {
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));
        std::uniform_real_distribution<double> u(0.0, 1.0);

        PatientRecord rec;
        char id[32];
        std::snprintf(id, sizeof id, "P%06zu", i + 1);
        rec.patient_id = id;

        auto& demo = rec.demographics;
        demo.age_at_first_encounter = std::round(std::uniform_real_distribution<double>(30.0, 82.0)(rng) * 10.0) / 10.0;
        demo.sex = u(rng) < 0.5 ? Sex::male : Sex::female;
        {
            const double r = u(rng);
            demo.race = r < 0.2    ? Race::black
                        : r < 0.22 ? Race::native_american
                        : r < 0.32 ? Race::asian
                        : r < 0.87 ? Race::white
                                   : Race::other;
        }
        demo.smoker = u(rng) < 0.3;
        const bool diabetic = !(u(rng) < cfg.non_t2dm_fraction);

        PatientLatent lat = draw_latent(demo, diabetic, cfg.effect_scale, rng);

        std::poisson_distribution<int> extra(std::max(0.0, cfg.mean_encounters_per_patient - 1.0));
        const int n_enc = 1 + extra(rng);
        std::lognormal_distribution<double> gap(std::log(cfg.gap_median_days), cfg.gap_log_sigma);

        // Untreated patients start a little above their set point.
        BiomarkerPanel state;
        for (Biomarker b : kAllBiomarkers) state[b] = lat.baseline[static_cast<int>(b)];
        state[Biomarker::a1c] = *state[Biomarker::a1c] + 0.3;
        finalize_state(lat, state, cfg.observation_noise_scale, rng);

        int day = 0;
        for (int e = 0; e < n_enc; ++e) {
            if (e > 0) day += std::max(1, static_cast<int>(std::lround(gap(rng))));
            Encounter enc;
            enc.day = day;
            enc.prescriptions = clinician_regimen(lat, state, cfg.behavior_policy_noise, rng);
            enc.icd10_t2dm = diabetic && u(rng) < 0.8;
            enc.panel = observe(state, cfg.missingness_rates, rng);
            rec.encounters.push_back(enc);

            state = expected_next_panel(lat, state, enc.prescriptions);
            finalize_state(lat, state, cfg.observation_noise_scale, rng);
        }

        GroundTruthEntry truth;
        truth.patient_id = rec.patient_id;
        auto argmax_menu = [&](TherapeuticClass cls, EffectChannel ch) {
            Regimen best;
            double best_eff = -1.0;
            for (Regimen r : synthetic_menu(cls)) {
                const double e = planted_effect(lat, ch, r);
                if (e > best_eff) best_eff = e, best = r;
            }
            return best;
        };
        truth.glycemia = argmax_menu(TherapeuticClass::antihyperglycemic, EffectChannel::a1c);
        truth.bp = argmax_menu(TherapeuticClass::antihypertensive, EffectChannel::sbp);
        truth.cvd = argmax_menu(TherapeuticClass::antihyperlipidemic, EffectChannel::tc);
        truth.multimorbidity = truth.glycemia | truth.bp | truth.cvd;

        out.patients.push_back(std::move(rec));
        out.truth.push_back(std::move(truth));
        out.latents.push_back(lat);
    }
    return out;
}

}  // namespace rxrl
