#include "rxrl/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rxrl/errors.hpp"

namespace rxrl {

using ordered_json = nlohmann::ordered_json;

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

ordered_json regimen_json(Regimen r) {
    ordered_json a = ordered_json::array();
    for (Subclass c : r.codes()) a.push_back(std::string(to_string(c)));
    return a;
}

Regimen regimen_from(const ordered_json& a) {
    Regimen r;
    for (const auto& v : a) {
        const auto s = v.get<std::string>();
        const auto code = parse_subclass(s);
        if (!code) throw Error("unknown subclass code '" + s + "'");
        r.insert(*code);
    }
    return r;
}

ordered_json patient_json(const PatientRecord& p) {
    ordered_json j;
    j["patient_id"] = p.patient_id;
    j["demographics"] = {
        {"age", p.demographics.age_at_first_encounter},
        {"sex", std::string(to_string(p.demographics.sex))},
        {"race", std::string(to_string(p.demographics.race))},
        {"smoker", p.demographics.smoker},
    };
    ordered_json encs = ordered_json::array();
    for (const auto& e : p.encounters) {
        ordered_json panel = ordered_json::object();
        for (Biomarker b : kAllBiomarkers) {
            const auto& v = e.panel[b];
            panel[std::string(to_string(b))] = v ? ordered_json(*v) : ordered_json(nullptr);
        }
        ordered_json ej;
        ej["day"] = e.day;
        ej["panel"] = std::move(panel);
        ej["prescriptions"] = regimen_json(e.prescriptions);
        ej["icd10_t2dm"] = e.icd10_t2dm;
        encs.push_back(std::move(ej));
    }
    j["encounters"] = std::move(encs);
    return j;
}

PatientRecord patient_from(const ordered_json& j) {
    PatientRecord p;
    p.patient_id = j.at("patient_id").get<std::string>();
    const auto& d = j.at("demographics");
    p.demographics.age_at_first_encounter = d.at("age").get<double>();
    p.demographics.sex = parse_sex(d.at("sex").get<std::string>());
    p.demographics.race = parse_race(d.at("race").get<std::string>());
    p.demographics.smoker = d.at("smoker").get<bool>();
    for (const auto& ej : j.at("encounters")) {
        Encounter e;
        e.day = ej.at("day").get<int>();
        const auto& panel = ej.at("panel");
        for (Biomarker b : kAllBiomarkers) {
            const auto key = std::string(to_string(b));
            if (panel.contains(key) && !panel.at(key).is_null()) e.panel[b] = panel.at(key).get<double>();
        }
        e.prescriptions = regimen_from(ej.at("prescriptions"));
        e.icd10_t2dm = ej.at("icd10_t2dm").get<bool>();
        p.encounters.push_back(std::move(e));
    }
    return p;
}

template <typename Fn>
void for_each_line(std::istream& in, Fn&& fn) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(e.what(), lineno);
        }
        try {
            fn(j, lineno);
        } catch (const ValidationError&) {
            throw;
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(e.what(), lineno);
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            throw ParseError(e.what(), lineno);
        }
    }
}

std::string fmt_double(double v) {
    if (!std::isfinite(v)) return "";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

ordered_json nullable(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

ordered_json mean_se_json(const MeanSe& m) {
    return {{"n", m.n}, {"mean", nullable(m.n ? m.mean : NAN)}, {"se", nullable(m.n > 1 ? m.se : NAN)}};
}

ordered_json test_json(const std::optional<TestResult>& t) {
    if (!t) return nullptr;
    return {{"statistic", nullable(t->statistic)}, {"p_value", nullable(t->p_value)}, {"df", t->df}};
}

}  // namespace

void write_cohort(std::span<const PatientRecord> cohort, std::ostream& out) {
    for (const auto& p : cohort) out << patient_json(p).dump() << '\n';
}

void write_cohort(std::span<const PatientRecord> cohort, const std::filesystem::path& path) {
    auto out = open_out(path);
    write_cohort(cohort, out);
}

Cohort read_cohort(std::istream& in) {
    Cohort out;
    for_each_line(in, [&](const ordered_json& j, std::size_t) {
        PatientRecord p = patient_from(j);
        validate(p);
        out.push_back(std::move(p));
    });
    return out;
}

Cohort read_cohort(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_cohort(in);
}

void write_ground_truth(std::span<const GroundTruthEntry> truth, const std::filesystem::path& path) {
    auto out = open_out(path);
    for (const auto& t : truth) {
        ordered_json j;
        j["patient_id"] = t.patient_id;
        j["optimal"] = {
            {"glycemia", regimen_json(t.glycemia)},
            {"bp", regimen_json(t.bp)},
            {"cvd", regimen_json(t.cvd)},
            {"multimorbidity", regimen_json(t.multimorbidity)},
        };
        out << j.dump() << '\n';
    }
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
    auto in = open_in(path);
    GroundTruth out;
    for_each_line(in, [&](const ordered_json& j, std::size_t) {
        GroundTruthEntry e;
        e.patient_id = j.at("patient_id").get<std::string>();
        const auto& o = j.at("optimal");
        e.glycemia = regimen_from(o.at("glycemia"));
        e.bp = regimen_from(o.at("bp"));
        e.cvd = regimen_from(o.at("cvd"));
        e.multimorbidity = regimen_from(o.at("multimorbidity"));
        out.push_back(std::move(e));
    });
    return out;
}

std::map<std::string, Regimen> truth_for_target(std::span<const GroundTruthEntry> truth, Target t) {
    std::map<std::string, Regimen> out;
    for (const auto& e : truth) out[e.patient_id] = e.for_target(t);
    return out;
}

void write_transitions(std::span<const TransitionTuple> tuples, const std::filesystem::path& path) {
    auto out = open_out(path);
    for (const auto& t : tuples) {
        ordered_json j;
        j["state"] = std::vector<double>(t.state.data(), t.state.data() + t.state.size());
        j["action_id"] = t.action_id;
        j["reward"] = t.reward;
        j["next_state"] = std::vector<double>(t.next_state.data(), t.next_state.data() + t.next_state.size());
        j["terminal"] = t.terminal;
        j["patient_id"] = t.patient_id;
        j["encounter_index"] = t.encounter_index;
        out << j.dump() << '\n';
    }
}

std::vector<TransitionTuple> read_transitions(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::vector<TransitionTuple> out;
    for_each_line(in, [&](const ordered_json& j, std::size_t) {
        TransitionTuple t;
        const auto s = j.at("state").get<std::vector<double>>();
        const auto ns = j.at("next_state").get<std::vector<double>>();
        t.state = Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
        t.next_state = Eigen::Map<const Eigen::VectorXd>(ns.data(), static_cast<Eigen::Index>(ns.size()));
        t.action_id = j.at("action_id").get<int>();
        t.reward = j.at("reward").get<double>();
        t.terminal = j.at("terminal").get<bool>();
        t.patient_id = j.at("patient_id").get<std::string>();
        t.encounter_index = j.at("encounter_index").get<int>();
        if (!std::isfinite(t.reward)) throw Error("non-finite reward");
        out.push_back(std::move(t));
    });
    return out;
}

void write_metadata(const PreparedMetadata& m, const std::filesystem::path& path) {
    ordered_json j;
    j["format"] = "rxrl-prepared/1";
    j["target"] = std::string(to_string(m.target));
    j["feature_names"] = layout::feature_names();
    j["feature_stats"] = {{"mean", m.feature_stats.mean}, {"sd", m.feature_stats.sd}};
    ordered_json vocab = ordered_json::array();
    for (int i = 0; i < m.vocabulary.size(); ++i)
        vocab.push_back({{"id", i},
                         {"regimen", regimen_json(m.vocabulary.regimen(i))},
                         {"frequency", m.vocabulary.frequency(i)}});
    j["vocabulary"] = std::move(vocab);
    const auto& rp = m.reward_params;
    ordered_json rj = {
        {"a1c_threshold", rp.a1c_threshold}, {"a1c_sigma", rp.a1c_sigma},
        {"sbp_threshold", rp.sbp_threshold}, {"sbp_sigma", rp.sbp_sigma},
        {"discount", rp.discount},
    };
    if (rp.multimorbidity_stats) {
        ordered_json s = ordered_json::array();
        for (const auto& x : *rp.multimorbidity_stats) s.push_back({{"mean", x.mean}, {"sd", x.sd}});
        rj["multimorbidity_stats"] = std::move(s);
    } else {
        rj["multimorbidity_stats"] = nullptr;
    }
    j["reward_params"] = std::move(rj);
    j["split"] = {{"seed", m.split_seed},
                  {"train_patients", m.train_patients},
                  {"test_patients", m.test_patients}};
    j["counts"] = {{"train_transitions", m.train_transitions}, {"test_transitions", m.test_transitions}};
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

PreparedMetadata read_metadata(const std::filesystem::path& path) {
    auto in = open_in(path);
    ordered_json j;
    try {
        j = ordered_json::parse(in);
        PreparedMetadata m;
        m.target = parse_target(j.at("target").get<std::string>());
        m.feature_stats.mean = j.at("feature_stats").at("mean").get<std::vector<double>>();
        m.feature_stats.sd = j.at("feature_stats").at("sd").get<std::vector<double>>();
        std::vector<Regimen> regimens;
        std::vector<std::uint64_t> freq;
        for (const auto& v : j.at("vocabulary")) {
            regimens.push_back(regimen_from(v.at("regimen")));
            freq.push_back(v.at("frequency").get<std::uint64_t>());
        }
        m.vocabulary = ActionVocabulary(m.target, std::move(regimens), std::move(freq));
        const auto& rj = j.at("reward_params");
        auto& rp = m.reward_params;
        rp.a1c_threshold = rj.at("a1c_threshold").get<double>();
        rp.a1c_sigma = rj.at("a1c_sigma").get<double>();
        rp.sbp_threshold = rj.at("sbp_threshold").get<double>();
        rp.sbp_sigma = rj.at("sbp_sigma").get<double>();
        rp.discount = rj.at("discount").get<double>();
        if (!rj.at("multimorbidity_stats").is_null()) {
            std::array<StandardizationStats, 3> s{};
            for (std::size_t k = 0; k < 3; ++k) {
                s[k].mean = rj.at("multimorbidity_stats").at(k).at("mean").get<double>();
                s[k].sd = rj.at("multimorbidity_stats").at(k).at("sd").get<double>();
            }
            rp.multimorbidity_stats = s;
        }
        m.split_seed = j.at("split").at("seed").get<std::uint64_t>();
        m.train_patients = j.at("split").at("train_patients").get<std::vector<std::string>>();
        m.test_patients = j.at("split").at("test_patients").get<std::vector<std::string>>();
        m.train_transitions = j.at("counts").at("train_transitions").get<std::size_t>();
        m.test_transitions = j.at("counts").at("test_transitions").get<std::size_t>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed metadata " + path.string() + ": " + e.what());
    }
}

namespace {

ordered_json report_json(const TrainReport& r) {
    ordered_json curve = ordered_json::array();
    for (const auto& p : r.curve)
        curve.push_back({{"iteration", p.iteration}, {"td_error", nullable(p.td_error)},
                         {"consistency", p.consistency}});
    return {{"iterations_run", r.iterations_run},
            {"stop_reason", std::string(to_string(r.stop_reason))},
            {"best_td_error", nullable(r.best_td_error)},
            {"best_iteration", r.best_iteration},
            {"curve", std::move(curve)}};
}

}  // namespace

void write_train_report(const FullSchemeResult& result, const TrainConfig& cfg,
                        const std::filesystem::path& path) {
    ordered_json j;
    j["format"] = "rxrl-train-report/1";
    j["config"] = {{"gamma", cfg.gamma},
                   {"minibatch_size", cfg.minibatch_size},
                   {"target_sync_period", cfg.target_sync_period},
                   {"learning_rate", cfg.adam.learning_rate},
                   {"early_stop_patience", cfg.early_stop_patience},
                   {"max_iterations", cfg.max_iterations},
                   {"validation_eval_period", cfg.validation_eval_period},
                   {"min_delta", cfg.min_delta},
                   {"hidden_sizes", cfg.hidden_sizes},
                   {"dropout_rate", cfg.dropout_rate},
                   {"seed", cfg.seed}};
    j["L"] = result.holdout.iterations_run;
    j["holdout"] = report_json(result.holdout);
    j["final"] = report_json(result.final_run);
    j["validation_patients"] = result.validation_patients.size();
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + '"';
}

void write_eval_artifacts(const EvalArtifacts& art, const ActionVocabulary& vocab,
                          const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto& r = art.report;
    auto label = [&](int id) { return vocab.regimen(id).label(); };

    ordered_json j;
    j["format"] = "rxrl-eval-report/1";
    j["target"] = std::string(to_string(r.target));
    j["k"] = r.k;
    j["pca"] = {{"components", r.pca_components}, {"explained_variance", r.pca_explained}};
    j["encounters"] = {{"total", r.total},          {"concordant", r.concordant},
                       {"discrepant", r.discrepant}, {"unsupported", r.unsupported},
                       {"fewer_than_k", r.fewer_than_k}, {"tie_expanded", r.tie_expanded}};
    j["concordance"] = r.concordance;
    ordered_json outcomes = ordered_json::array();
    for (const auto& c : r.outcomes)
        outcomes.push_back({{"outcome", std::string(to_string(c.outcome))},
                            {"policy", mean_se_json(c.policy)},
                            {"clinician", mean_se_json(c.clinician)},
                            {"threshold", c.threshold},
                            {"policy_exceed", c.policy_exceed},
                            {"clinician_exceed", c.clinician_exceed},
                            {"policy_rate", c.policy_rate},
                            {"clinician_rate", c.clinician_rate},
                            {"welch_t", test_json(c.mean_test)},
                            {"two_proportion_z", test_json(c.rate_test)}});
    j["discrepant_outcomes"] = std::move(outcomes);

    ordered_json validity = ordered_json::array();
    auto validity_json = [](const ValidityReport& v) {
        ordered_json rows = ordered_json::array();
        for (const auto& row : v.rows)
            rows.push_back({{"outcome", std::string(to_string(row.outcome))},
                            {"n", row.n},
                            {"skipped", row.skipped},
                            {"imputed_mean", nullable(row.n ? row.imputed_mean : NAN)},
                            {"observed_mean", nullable(row.n ? row.observed_mean : NAN)},
                            {"pearson_r", row.pearson_r ? ordered_json(*row.pearson_r) : ordered_json(nullptr)}});
        return ordered_json{{"k", v.k}, {"rows", std::move(rows)}};
    };
    j["imputation_validity"] = validity_json(art.validity);
    for (const auto& v : art.sensitivity) validity.push_back(validity_json(v));
    j["k_sensitivity"] = std::move(validity);

    ordered_json imp = ordered_json::array();
    for (const auto& s : art.importance) imp.push_back({{"block", s.block}, {"score", s.score}});
    j["permutation_importance"] = std::move(imp);
    if (art.planted)
        j["planted_agreement"] = {{"n", art.planted->n},
                                  {"policy", art.planted->policy},
                                  {"clinician", art.planted->clinician}};
    else
        j["planted_agreement"] = nullptr;

    {
        auto out = open_out(dir / "eval_report.json");
        out << j.dump(2) << '\n';
    }

    {
        // Long form: one row per (clinician action, policy action) pair observed.
        auto out = open_out(dir / "discrepancy_matrix.csv");
        out << "clinician_action,clinician_regimen,policy_action,policy_regimen,count,"
               "mean_delta_a1c,mean_delta_sbp,mean_delta_frs\n";
        for (const auto& c : r.discrepancy)
            out << c.clinician_action << ',' << csv_field(label(c.clinician_action)) << ','
                << c.policy_action << ',' << csv_field(label(c.policy_action)) << ',' << c.count
                << ',' << fmt_double(c.mean_delta[0]) << ',' << fmt_double(c.mean_delta[1]) << ','
                << fmt_double(c.mean_delta[2]) << '\n';
    }
    {
        // Wide form: clinician rows x policy columns, discrepant counts.
        auto out = open_out(dir / "discrepancy_counts.csv");
        out << "clinician\\policy";
        for (int a = 0; a < vocab.size(); ++a) out << ',' << csv_field(label(a));
        out << '\n';
        for (int c = 0; c < vocab.size(); ++c) {
            out << csv_field(label(c));
            for (int a = 0; a < vocab.size(); ++a) {
                std::size_t n = 0;
                for (const auto& cell : r.discrepancy)
                    if (cell.clinician_action == c && cell.policy_action == a) n = cell.count;
                out << ',' << n;
            }
            out << '\n';
        }
    }
    {
        auto out = open_out(dir / "subgroups.csv");
        out << "dimension,group,encounters,concordant,discrepant";
        for (Outcome o : kAllOutcomes) {
            const std::string n(to_string(o));
            out << ",policy_" << n << "_mean,policy_" << n << "_se,clinician_" << n << "_mean,clinician_" << n << "_se";
        }
        out << '\n';
        for (const auto& s : r.subgroups) {
            out << csv_field(s.dimension) << ',' << csv_field(s.group) << ',' << s.encounters << ','
                << s.concordant << ',' << s.discrepant;
            for (std::size_t o = 0; o < kOutcomeCount; ++o)
                out << ',' << fmt_double(s.policy[o].n ? s.policy[o].mean : NAN) << ','
                    << fmt_double(s.policy[o].n > 1 ? s.policy[o].se : NAN) << ','
                    << fmt_double(s.clinician[o].n ? s.clinician[o].mean : NAN) << ','
                    << fmt_double(s.clinician[o].n > 1 ? s.clinician[o].se : NAN);
            out << '\n';
        }
    }
    {
        auto out = open_out(dir / "encounters.csv");
        out << "patient_id,encounter_index,sex,race,smoker,age,logged_action,policy_action,consistent,"
               "unsupported,clinician_a1c,clinician_sbp,clinician_frs,policy_a1c,policy_sbp,policy_frs,"
               "neighbors_a1c,neighbors_sbp,neighbors_frs\n";
        for (const auto& row : r.rows) {
            out << csv_field(row.patient_id) << ',' << row.encounter_index << ',' << to_string(row.sex)
                << ',' << to_string(row.race) << ',' << (row.smoker ? 1 : 0) << ','
                << fmt_double(row.age) << ',' << row.logged_action << ',' << row.policy_action << ','
                << (row.consistent ? 1 : 0) << ',' << (row.unsupported ? 1 : 0);
            for (double v : row.clinician_outcome) out << ',' << fmt_double(v);
            for (double v : row.policy_outcome) out << ',' << fmt_double(v);
            for (auto n : row.neighbors_used) out << ',' << n;
            out << '\n';
        }
    }
    {
        auto out = open_out(dir / "prescription_counts.csv");
        out << "n_subclasses,clinician,policy\n";
        for (const auto& h : r.histogram) out << h.n_subclasses << ',' << h.clinician << ',' << h.policy << '\n';
    }
    {
        auto out = open_out(dir / "importance.csv");
        out << "rank,block,score\n";
        for (std::size_t i = 0; i < art.importance.size(); ++i)
            out << i + 1 << ',' << csv_field(art.importance[i].block) << ','
                << fmt_double(art.importance[i].score) << '\n';
    }
}

}  // namespace rxrl
