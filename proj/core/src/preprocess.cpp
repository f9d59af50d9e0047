#include "rxrl/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "rxrl/errors.hpp"

namespace rxrl {

namespace layout {

bool is_continuous(int f) {
    return f == kAge || (f >= kCurrentBegin && f < kHistoryBegin) || f == kDaysSincePrevious ||
           f == kDaysSinceFirst;
}

const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n(kStateDim);
        n[kAge] = "age";
        n[kSexFemale] = "sex_female";
        for (int r = 0; r < kRaceCount; ++r)
            n[kRaceBegin + r] = "race_" + std::string(to_string(static_cast<Race>(r)));
        n[kSmoker] = "smoker";
        for (Biomarker b : kAllBiomarkers) {
            n[current(b)] = std::string(to_string(b));
            n[trailing(b)] = std::string(to_string(b)) + "_mean183";
        }
        for (int c = 0; c < kSubclassCount; ++c)
            n[kHistoryBegin + c] = "rx_" + std::string(to_string(static_cast<Subclass>(c)));
        n[kDaysSincePrevious] = "days_since_previous";
        n[kDaysSinceFirst] = "days_since_first";
        return n;
    }();
    return names;
}

}  // namespace layout

Regimen target_classes(Target t) {
    switch (t) {
        case Target::glycemia: return class_mask(TherapeuticClass::antihyperglycemic);
        case Target::bp: return class_mask(TherapeuticClass::antihypertensive);
        case Target::cvd: return class_mask(TherapeuticClass::antihyperlipidemic);
        case Target::multimorbidity: return Regimen(Regimen::kFullMask);
    }
    return {};
}

ActionVocabulary::ActionVocabulary(Target target, std::vector<Regimen> regimens,
                                   std::vector<std::uint64_t> frequencies)
    : target_(target), regimens_(std::move(regimens)), frequencies_(std::move(frequencies)) {
    if (regimens_.size() != frequencies_.size())
        throw Error("vocabulary regimens and frequencies differ in length");
    if (regimens_.empty() || !regimens_.front().empty())
        throw Error("vocabulary must start with the empty regimen");
    for (std::size_t i = 0; i < regimens_.size(); ++i) {
        if (!target_classes(target_).contains(regimens_[i]))
            throw Error("vocabulary entry " + regimens_[i].label() + " outside target classes");
        if (!index_.emplace(regimens_[i].mask(), static_cast<int>(i)).second)
            throw Error("duplicate vocabulary entry " + regimens_[i].label());
    }
}

Regimen ActionVocabulary::allowed() const { return target_classes(target_); }

std::optional<int> ActionVocabulary::find(Regimen r) const {
    const auto it = index_.find(r.mask());
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

int ActionVocabulary::map(Regimen logged) const {
    const Regimen restricted = logged & allowed();
    if (auto id = find(restricted)) return *id;
    int best = kEmptyId;
    int best_size = 0;
    for (int i = 0; i < size(); ++i) {
        const Regimen r = regimens_[static_cast<std::size_t>(i)];
        if (restricted.contains(r) && r.size() > best_size) {
            best = i;
            best_size = r.size();
        }
    }
    return best;
}

ActionVocabulary build_action_vocab(std::span<const PatientRecord> cohort, Target target,
                                    std::uint64_t min_count) {
    const Regimen allowed = target_classes(target);
    std::map<std::uint32_t, std::uint64_t> counts;
    for (const auto& p : cohort)
        for (const auto& enc : p.encounters) ++counts[(enc.prescriptions & allowed).mask()];

    std::vector<std::pair<Regimen, std::uint64_t>> entries;
    for (const auto& [mask, n] : counts)
        if (mask != 0 && n >= min_count) entries.emplace_back(Regimen(mask), n);
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return regimen_lex_less(a.first, b.first);
    });

    std::vector<Regimen> regimens{Regimen()};
    std::vector<std::uint64_t> freq{counts.count(0) ? counts.at(0) : 0};
    for (const auto& [r, n] : entries) {
        regimens.push_back(r);
        freq.push_back(n);
    }
    return ActionVocabulary(target, std::move(regimens), std::move(freq));
}

Regimen prescription_history(const PatientRecord& record, std::size_t encounter_index) {
    const int today = record.encounters.at(encounter_index).day;
    Regimen hist;
    for (std::size_t j = 0; j < encounter_index; ++j)
        if (today - record.encounters[j].day <= kHistoryWindowDays)
            hist = hist | record.encounters[j].prescriptions;
    return hist;
}

double age_at(const PatientRecord& record, std::size_t encounter_index) {
    return record.demographics.age_at_first_encounter +
           record.encounters.at(encounter_index).day / 365.25;
}

StateVector featurize(const PatientRecord& record, std::size_t encounter_index,
                      const FeatureStats* stats) {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    const auto& encs = record.encounters;
    const auto& enc = encs.at(encounter_index);
    const auto& demo = record.demographics;

    StateVector x = StateVector::Zero(layout::kStateDim);
    x[layout::kAge] = age_at(record, encounter_index);
    x[layout::kSexFemale] = demo.sex == Sex::female ? 1.0 : 0.0;
    x[layout::kRaceBegin + static_cast<int>(demo.race)] = 1.0;
    x[layout::kSmoker] = demo.smoker ? 1.0 : 0.0;

    for (Biomarker b : kAllBiomarkers) {
        x[layout::current(b)] = enc.panel[b].value_or(nan);
        double sum = 0.0;
        int n = 0;
        for (std::size_t j = 0; j < encounter_index; ++j) {
            if (enc.day - encs[j].day > kHistoryWindowDays) continue;
            if (const auto& v = encs[j].panel[b]) {
                sum += *v;
                ++n;
            }
        }
        x[layout::trailing(b)] = n > 0 ? sum / n : nan;
    }

    const Regimen hist = prescription_history(record, encounter_index);
    for (int c = 0; c < kSubclassCount; ++c)
        x[layout::kHistoryBegin + c] = hist.contains(static_cast<Subclass>(c)) ? 1.0 : 0.0;

    x[layout::kDaysSincePrevious] =
        encounter_index == 0 ? 0.0 : static_cast<double>(enc.day - encs[encounter_index - 1].day);
    x[layout::kDaysSinceFirst] = static_cast<double>(enc.day - encs.front().day);

    if (stats) return standardize(x, *stats);
    return x;
}

StateVector standardize(const StateVector& raw, const FeatureStats& stats) {
    if (static_cast<std::size_t>(raw.size()) != stats.dim())
        throw ShapeError("state has " + std::to_string(raw.size()) + " features, stats have " +
                         std::to_string(stats.dim()));
    StateVector z(raw.size());
    for (Eigen::Index i = 0; i < raw.size(); ++i) {
        const double v = raw[i];
        z[i] = std::isnan(v) ? 0.0 : (v - stats.mean[i]) / stats.sd[i];
    }
    return z;
}

FeatureStats fit_feature_stats(std::span<const StateVector> raw_states) {
    FeatureStats s;
    s.mean.assign(layout::kStateDim, 0.0);
    s.sd.assign(layout::kStateDim, 1.0);
    for (int f = 0; f < layout::kStateDim; ++f) {
        if (!layout::is_continuous(f)) continue;
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& x : raw_states)
            if (!std::isnan(x[f])) sum += x[f], ++n;
        if (n == 0) continue;
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (const auto& x : raw_states)
            if (!std::isnan(x[f])) ss += (x[f] - mean) * (x[f] - mean);
        const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
        s.mean[f] = mean;
        s.sd[f] = sd > 0.0 ? sd : 1.0;
    }
    return s;
}

std::optional<FrsInput> frs_input_at(const PatientRecord& record, std::size_t i) {
    const auto& panel = record.encounters.at(i).panel;
    const auto& tc = panel[Biomarker::tc];
    const auto& hdl = panel[Biomarker::hdl];
    const auto& sbp = panel[Biomarker::sbp];
    if (!tc || !hdl || !sbp) return std::nullopt;
    FrsInput in;
    in.age = age_at(record, i);
    in.sex = record.demographics.sex;
    in.total_cholesterol = *tc;
    in.hdl = *hdl;
    in.sbp = *sbp;
    in.bp_treated =
        !(prescription_history(record, i) & class_mask(TherapeuticClass::antihypertensive)).empty();
    in.smoker = record.demographics.smoker;
    in.diabetic = true;
    return in;
}

RewardComponents transition_rewards(const PatientRecord& record, std::size_t i,
                                    const RewardParams& params, const FrsCoefficients& coef) {
    RewardComponents r;
    const auto& now = record.encounters.at(i).panel;
    const auto& next = record.encounters.at(i + 1).panel;
    if (now[Biomarker::a1c] && next[Biomarker::a1c])
        r.glycemia = glycemia_reward(*now[Biomarker::a1c], *next[Biomarker::a1c], params);
    if (now[Biomarker::sbp] && next[Biomarker::sbp])
        r.bp = bp_reward(*now[Biomarker::sbp], *next[Biomarker::sbp], params);
    const auto f_now = frs_input_at(record, i);
    const auto f_next = frs_input_at(record, i + 1);
    if (f_now && f_next) r.cvd = cvd_reward(frs_risk(*f_now, coef), frs_risk(*f_next, coef));
    return r;
}

namespace {

struct RawTuple {
    const PatientRecord* record;
    std::size_t index;
    RewardComponents components;
    int action_id;
    bool terminal;
};

std::vector<RawTuple> enumerate_pairs(std::span<const PatientRecord> cohort,
                                      const ActionVocabulary& vocab, const RewardParams& params,
                                      const FrsCoefficients& coef) {
    std::vector<RawTuple> raw;
    for (const auto& p : cohort) {
        const std::size_t n = p.encounters.size();
        for (std::size_t i = 0; i + 1 < n; ++i)
            raw.push_back({&p, i, transition_rewards(p, i, params, coef),
                           vocab.map(p.encounters[i].prescriptions), i + 2 == n});
    }
    return raw;
}

std::vector<TransitionTuple> assemble(const std::vector<RawTuple>& raw, Target target,
                                      const FeatureStats& stats, const RewardParams& params) {
    std::vector<TransitionTuple> out;
    out.reserve(raw.size());
    for (const auto& r : raw) {
        TransitionTuple t;
        t.state = featurize(*r.record, r.index, &stats);
        t.next_state = featurize(*r.record, r.index + 1, &stats);
        t.action_id = r.action_id;
        t.reward = target_reward(target, r.components, params);
        t.terminal = r.terminal;
        t.patient_id = r.record->patient_id;
        t.encounter_index = static_cast<int>(r.index);
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace

TransitionDataset build_transitions(std::span<const PatientRecord> cohort, Target target,
                                    const ActionVocabulary& vocab, RewardParams params,
                                    const FrsCoefficients& coef) {
    const auto raw = enumerate_pairs(cohort, vocab, params, coef);
    if (raw.empty()) throw EmptyDatasetError("no patient has two or more encounters");

    std::vector<StateVector> states;
    for (const auto& p : cohort)
        for (std::size_t i = 0; i < p.encounters.size(); ++i) states.push_back(featurize(p, i));

    TransitionDataset ds;
    ds.stats = fit_feature_stats(states);
    if (target == Target::multimorbidity) {
        std::vector<RewardComponents> comps;
        comps.reserve(raw.size());
        for (const auto& r : raw) comps.push_back(r.components);
        params.multimorbidity_stats = fit_multimorbidity_stats(comps);
    }
    ds.reward_params = params;
    ds.tuples = assemble(raw, target, ds.stats, ds.reward_params);
    return ds;
}

std::vector<TransitionTuple> build_transitions_frozen(std::span<const PatientRecord> cohort,
                                                      Target target, const ActionVocabulary& vocab,
                                                      const FeatureStats& stats,
                                                      const RewardParams& params,
                                                      const FrsCoefficients& coef) {
    return assemble(enumerate_pairs(cohort, vocab, params, coef), target, stats, params);
}

}  // namespace rxrl
