#include "rxrl/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "rxrl/errors.hpp"

namespace rxrl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Static chunking so results never depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        const std::size_t lo = t * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace

std::string_view to_string(Outcome o) {
    switch (o) {
        case Outcome::a1c: return "a1c";
        case Outcome::sbp: return "sbp";
        case Outcome::frs: return "frs";
    }
    return "?";
}

double outcome_threshold(Outcome o) {
    switch (o) {
        case Outcome::a1c: return 8.0;
        case Outcome::sbp: return 140.0;
        case Outcome::frs: return 20.0;
    }
    return 0.0;
}

std::vector<EvalEncounter> build_eval_encounters(std::span<const PatientRecord> cohort,
                                                 const ActionVocabulary& vocab,
                                                 const FeatureStats& stats,
                                                 const FrsCoefficients& coef) {
    std::vector<EvalEncounter> out;
    for (const auto& p : cohort) {
        for (std::size_t i = 0; i + 1 < p.encounters.size(); ++i) {
            EvalEncounter e;
            e.patient_id = p.patient_id;
            e.encounter_index = static_cast<int>(i);
            e.state = featurize(p, i, &stats);
            e.logged_regimen = p.encounters[i].prescriptions;
            e.logged_action = vocab.map(e.logged_regimen);
            const auto& next = p.encounters[i + 1].panel;
            e.outcome[0] = next[Biomarker::a1c].value_or(kNaN);
            e.outcome[1] = next[Biomarker::sbp].value_or(kNaN);
            const auto frs = frs_input_at(p, i + 1);
            e.outcome[2] = frs ? frs_risk(*frs, coef) : kNaN;
            e.sex = p.demographics.sex;
            e.race = p.demographics.race;
            e.smoker = p.demographics.smoker;
            e.age = age_at(p, i);
            out.push_back(std::move(e));
        }
    }
    return out;
}

Eigen::MatrixXd state_matrix(std::span<const EvalEncounter> encounters) {
    if (encounters.empty()) return {};
    Eigen::MatrixXd m(static_cast<Eigen::Index>(encounters.size()), encounters.front().state.size());
    for (std::size_t i = 0; i < encounters.size(); ++i)
        m.row(static_cast<Eigen::Index>(i)) = encounters[i].state.transpose();
    return m;
}

OutcomeIndex build_outcome_index(const PcaModel& pca, std::span<const EvalEncounter> pool) {
    OutcomeIndex out;
    out.pca = pca;
    const Eigen::MatrixXd coords = pca.project(state_matrix(pool));
    std::vector<int> actions;
    for (const auto& e : pool) actions.push_back(e.logged_action);
    for (int o = 0; o < kOutcomeCount; ++o) {
        std::vector<double> y;
        for (const auto& e : pool) y.push_back(e.outcome[static_cast<std::size_t>(o)]);
        out.index[static_cast<std::size_t>(o)] = KnnIndex(coords, actions, std::move(y));
    }
    return out;
}

EvalReport evaluate_policy(const QNetworkParams& model, const ActionVocabulary& vocab,
                           std::span<const EvalEncounter> encounters, const EvalOptions& options,
                           std::span<const EvalEncounter> extra_pool) {
    if (encounters.empty()) throw InputError("test cohort has no evaluable encounters");
    if (model.n_actions() != vocab.size() ||
        (model.vocabulary.size() > 0 && !(model.vocabulary == vocab)))
        throw VocabularyMismatchError("model has " + std::to_string(model.n_actions()) +
                                      " actions but the prepared data has " +
                                      std::to_string(vocab.size()));

    std::vector<EvalEncounter> pool(encounters.begin(), encounters.end());
    pool.insert(pool.end(), extra_pool.begin(), extra_pool.end());
    const PcaModel pca = pca_fit(state_matrix(pool), options.variance_target);
    const OutcomeIndex oi = build_outcome_index(pca, pool);

    const Eigen::MatrixXd states = state_matrix(encounters);
    const Eigen::MatrixXd q = forward_batch(model, states);
    const Eigen::MatrixXd coords = pca.project(states);

    EvalReport report;
    report.target = vocab.target();
    report.k = options.k;
    report.pca_components = pca.retained;
    report.pca_explained = pca.retained_variance();
    report.rows.resize(encounters.size());

    parallel_for(encounters.size(), options.threads, [&](std::size_t i) {
        const auto& e = encounters[i];
        auto& row = report.rows[i];
        row.patient_id = e.patient_id;
        row.encounter_index = e.encounter_index;
        row.logged_action = e.logged_action;
        row.policy_action = argmax_action(q.row(static_cast<Eigen::Index>(i)).transpose());
        row.consistent = row.policy_action == row.logged_action;
        row.clinician_outcome = e.outcome;
        row.logged_size = vocab.regimen(row.logged_action).size();
        row.policy_size = vocab.regimen(row.policy_action).size();
        row.sex = e.sex;
        row.race = e.race;
        row.smoker = e.smoker;
        row.age = e.age;
        if (row.consistent) {
            row.policy_outcome = e.outcome;
            return;
        }
        const Eigen::VectorXd point = coords.row(static_cast<Eigen::Index>(i)).transpose();
        for (int o = 0; o < kOutcomeCount; ++o) {
            const auto oo = static_cast<std::size_t>(o);
            try {
                const auto r = oi.index[oo].query(point, row.policy_action, options.k);
                row.policy_outcome[oo] = r.value;
                row.neighbors_used[oo] = r.neighbors_used;
                row.fewer_than_k = row.fewer_than_k || r.fewer_than_k;
                row.tie_expanded = row.tie_expanded || r.tie_expanded;
            } catch (const UnsupportedActionError&) {
                row.policy_outcome[oo] = kNaN;
                row.unsupported = true;
            }
        }
    });

    summarize_rows(report);
    return report;
}

namespace {

struct Accumulator {
    std::size_t encounters = 0, concordant = 0, discrepant = 0;
    std::array<std::vector<double>, kOutcomeCount> policy, clinician;

    void add(const EncounterRow& r) {
        ++encounters;
        if (r.consistent) {
            ++concordant;
            return;
        }
        ++discrepant;
        for (std::size_t o = 0; o < kOutcomeCount; ++o) {
            if (std::isfinite(r.policy_outcome[o]) && std::isfinite(r.clinician_outcome[o])) {
                policy[o].push_back(r.policy_outcome[o]);
                clinician[o].push_back(r.clinician_outcome[o]);
            }
        }
    }
};

SubgroupRow to_subgroup(std::string dim, std::string group, const Accumulator& acc) {
    SubgroupRow s;
    s.dimension = std::move(dim);
    s.group = std::move(group);
    s.encounters = acc.encounters;
    s.concordant = acc.concordant;
    s.discrepant = acc.discrepant;
    for (std::size_t o = 0; o < kOutcomeCount; ++o) {
        s.policy[o] = mean_se(acc.policy[o]);
        s.clinician[o] = mean_se(acc.clinician[o]);
    }
    return s;
}

}  // namespace

void summarize_rows(EvalReport& report) {
    const auto& rows = report.rows;
    report.total = rows.size();
    report.concordant = report.discrepant = report.unsupported = 0;
    report.fewer_than_k = report.tie_expanded = 0;

    Accumulator all;
    std::map<std::string, Accumulator> by_sex, by_age, by_race, by_smoking;
    std::map<std::pair<int, int>, std::pair<std::size_t, std::array<std::vector<double>, kOutcomeCount>>> cells;
    std::map<int, HistogramRow> hist;

    for (const auto& r : rows) {
        all.add(r);
        by_sex[std::string(to_string(r.sex))].add(r);
        by_age[r.age <= 60.0 ? "<=60" : ">60"].add(r);
        by_race[std::string(to_string(r.race))].add(r);
        by_smoking[r.smoker ? "smoker" : "non_smoker"].add(r);
        if (r.consistent) {
            ++report.concordant;
        } else {
            ++report.discrepant;
            auto& cell = cells[{r.logged_action, r.policy_action}];
            ++cell.first;
            for (std::size_t o = 0; o < kOutcomeCount; ++o)
                if (std::isfinite(r.policy_outcome[o]) && std::isfinite(r.clinician_outcome[o]))
                    cell.second[o].push_back(r.policy_outcome[o] - r.clinician_outcome[o]);
        }
        if (r.unsupported) ++report.unsupported;
        if (r.fewer_than_k) ++report.fewer_than_k;
        if (r.tie_expanded) ++report.tie_expanded;
        hist[r.logged_size].n_subclasses = r.logged_size;
        ++hist[r.logged_size].clinician;
        hist[r.policy_size].n_subclasses = r.policy_size;
        ++hist[r.policy_size].policy;
    }
    report.concordance =
        rows.empty() ? 0.0 : static_cast<double>(report.concordant) / static_cast<double>(rows.size());

    for (std::size_t o = 0; o < kOutcomeCount; ++o) {
        auto& c = report.outcomes[o];
        c = {};
        c.outcome = kAllOutcomes[o];
        c.threshold = outcome_threshold(c.outcome);
        c.policy = mean_se(all.policy[o]);
        c.clinician = mean_se(all.clinician[o]);
        for (double v : all.policy[o]) c.policy_exceed += v > c.threshold;
        for (double v : all.clinician[o]) c.clinician_exceed += v > c.threshold;
        const std::size_t n = all.policy[o].size();
        c.policy_rate = n ? static_cast<double>(c.policy_exceed) / static_cast<double>(n) : 0.0;
        c.clinician_rate = n ? static_cast<double>(c.clinician_exceed) / static_cast<double>(n) : 0.0;
        c.mean_test = welch_t_test(all.policy[o], all.clinician[o]);
        c.rate_test = two_proportion_z_test(c.policy_exceed, n, c.clinician_exceed, n);
    }

    report.subgroups.clear();
    report.subgroups.push_back(to_subgroup("all", "all", all));
    for (const auto& [g, acc] : by_sex) report.subgroups.push_back(to_subgroup("sex", g, acc));
    for (const auto& [g, acc] : by_age) report.subgroups.push_back(to_subgroup("age", g, acc));
    for (const auto& [g, acc] : by_race) report.subgroups.push_back(to_subgroup("race", g, acc));
    for (const auto& [g, acc] : by_smoking) report.subgroups.push_back(to_subgroup("smoking", g, acc));

    report.discrepancy.clear();
    for (const auto& [key, cell] : cells) {
        DiscrepancyCell d;
        d.clinician_action = key.first;
        d.policy_action = key.second;
        d.count = cell.first;
        for (std::size_t o = 0; o < kOutcomeCount; ++o)
            d.mean_delta[o] = cell.second[o].empty() ? kNaN : mean_se(cell.second[o]).mean;
        report.discrepancy.push_back(d);
    }
    report.histogram.clear();
    for (const auto& [size, h] : hist) report.histogram.push_back(h);
}

ValidityReport imputation_validity_check(std::span<const EvalEncounter> encounters,
                                         const PcaModel& pca, std::size_t k) {
    if (encounters.empty()) throw InputError("validity check needs a nonempty test set");
    const OutcomeIndex oi = build_outcome_index(pca, encounters);
    const Eigen::MatrixXd coords = pca.project(state_matrix(encounters));

    ValidityReport rep;
    rep.k = k;
    for (std::size_t o = 0; o < kOutcomeCount; ++o) {
        std::vector<double> imputed, observed;
        std::size_t skipped = 0;
        for (std::size_t i = 0; i < encounters.size(); ++i) {
            const double y = encounters[i].outcome[o];
            if (!std::isfinite(y)) continue;
            try {
                const auto r = oi.index[o].query(coords.row(static_cast<Eigen::Index>(i)).transpose(),
                                                 encounters[i].logged_action, k, i);
                imputed.push_back(r.value);
                observed.push_back(y);
            } catch (const UnsupportedActionError&) {
                ++skipped;  // the encounter was the only one with its action
            }
        }
        auto& row = rep.rows[o];
        row.outcome = kAllOutcomes[o];
        row.n = imputed.size();
        row.skipped = skipped;
        row.imputed_mean = mean_se(imputed).mean;
        row.observed_mean = mean_se(observed).mean;
        row.pearson_r = pearson(imputed, observed);
    }
    return rep;
}

std::vector<ValidityReport> validity_sensitivity(std::span<const EvalEncounter> encounters,
                                                 const PcaModel& pca,
                                                 std::span<const std::size_t> ks) {
    std::vector<ValidityReport> out;
    for (std::size_t k : ks) out.push_back(imputation_validity_check(encounters, pca, k));
    return out;
}

std::vector<FeatureBlock> default_feature_blocks() {
    std::vector<FeatureBlock> blocks;
    blocks.push_back({"demographics", {layout::kAge, layout::kSexFemale, layout::kRaceBegin,
                                       layout::kRaceBegin + 1, layout::kRaceBegin + 2,
                                       layout::kRaceBegin + 3, layout::kRaceBegin + 4,
                                       layout::kSmoker}});
    for (Biomarker b : kAllBiomarkers)
        blocks.push_back({std::string(to_string(b)), {layout::current(b), layout::trailing(b)}});
    FeatureBlock hist{"prescription_history", {}};
    for (int c = 0; c < kSubclassCount; ++c) hist.features.push_back(layout::kHistoryBegin + c);
    blocks.push_back(std::move(hist));
    blocks.push_back({"encounter_timing", {layout::kDaysSincePrevious, layout::kDaysSinceFirst}});
    return blocks;
}

std::vector<ImportanceScore> permutation_importance(const QNetworkParams& model,
                                                    const Eigen::MatrixXd& states, int n_repeats,
                                                    std::uint64_t seed,
                                                    const std::vector<FeatureBlock>& blocks) {
    if (states.rows() == 0) throw InputError("permutation importance needs at least one state");
    if (n_repeats < 1) throw ConfigError("n_repeats must be >= 1");
    const Eigen::Index n = states.rows();
    const Eigen::MatrixXd q0 = forward_batch(model, states);
    std::vector<int> base(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) base[static_cast<std::size_t>(i)] = argmax_action(q0.row(i).transpose());

    std::mt19937_64 rng(seed);
    std::vector<ImportanceScore> scores;
    for (const auto& block : blocks) {
        for (int f : block.features)
            if (f < 0 || f >= states.cols()) throw ShapeError("feature block '" + block.name + "' out of range");
        std::size_t changed = 0;
        for (int rep = 0; rep < n_repeats; ++rep) {
            std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            Eigen::MatrixXd shuffled = states;
            for (Eigen::Index i = 0; i < n; ++i)
                for (int f : block.features) shuffled(i, f) = states(perm[static_cast<std::size_t>(i)], f);
            const Eigen::MatrixXd q = forward_batch(model, shuffled);
            for (Eigen::Index i = 0; i < n; ++i)
                changed += argmax_action(q.row(i).transpose()) != base[static_cast<std::size_t>(i)];
        }
        scores.push_back({block.name, static_cast<double>(changed) /
                                          (static_cast<double>(n) * static_cast<double>(n_repeats))});
    }
    std::stable_sort(scores.begin(), scores.end(),
                     [](const auto& a, const auto& b) { return a.score > b.score; });
    return scores;
}

PlantedAgreement planted_agreement(const EvalReport& report, const ActionVocabulary& vocab,
                                   const std::map<std::string, Regimen>& truth) {
    PlantedAgreement out;
    std::size_t policy_hits = 0, clinician_hits = 0;
    for (const auto& r : report.rows) {
        const auto it = truth.find(r.patient_id);
        if (it == truth.end()) continue;
        ++out.n;
        policy_hits += vocab.regimen(r.policy_action) == it->second;
        clinician_hits += vocab.regimen(r.logged_action) == it->second;
    }
    if (out.n > 0) {
        out.policy = static_cast<double>(policy_hits) / static_cast<double>(out.n);
        out.clinician = static_cast<double>(clinician_hits) / static_cast<double>(out.n);
    }
    return out;
}

}  // namespace rxrl
