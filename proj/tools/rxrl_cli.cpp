#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "rxrl/config.hpp"
#include "rxrl/edwa.hpp"
#include "rxrl/errors.hpp"
#include "rxrl/evaluator.hpp"
#include "rxrl/io.hpp"
#include "rxrl/preprocess.hpp"
#include "rxrl/qnet.hpp"
#include "rxrl/synth.hpp"
#include "rxrl/trainer.hpp"

namespace fs = std::filesystem;
using namespace rxrl;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Short flags that alias registry keys.
const std::map<std::string, std::string> kAliases = {
    {"patients", "synth.patients"}, {"cohort", "paths.cohort"},     {"truth", "paths.truth"},
    {"prepared", "paths.prepared"}, {"model", "paths.model"},       {"reports", "paths.reports"},
    {"k", "eval.k"},                {"max-iterations", "train.max_iterations"},
};

struct Options {
    std::string config_path;
    std::vector<std::string> sets;
    std::map<std::string, std::string> flags;  // registry key -> value
    bool quiet = false;
};

void add_common_options(CLI::App* cmd, Options& opt) {
    cmd->add_option("-c,--config", opt.config_path, "Pipeline config file (section.key = value)");
    cmd->add_option("--set", opt.sets, "Override a config key: key=value (repeatable)");
    cmd->add_flag("-q,--quiet", opt.quiet, "Suppress progress output");
    for (const auto& key : config_keys()) {
        cmd->add_option_function<std::string>(
               "--" + key.key, [&opt, name = key.key](const std::string& v) { opt.flags[name] = v; },
               key.help)
            ->take_last();
    }
    for (const auto& [alias, key] : kAliases) {
        cmd->add_option_function<std::string>(
               "--" + alias, [&opt, name = key](const std::string& v) { opt.flags[name] = v; },
               "Alias for --" + key)
            ->take_last();
    }
}

PipelineConfig resolve_config(const Options& opt) {
    PipelineConfig cfg = opt.config_path.empty() ? PipelineConfig{} : load_config(opt.config_path);
    for (const auto& [key, value] : opt.flags) set_config_value(cfg, key, value);
    for (const auto& s : opt.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
        set_config_value(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    cfg.check();
    return cfg;
}

std::string fixed(double v, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

std::size_t count_encounters(std::span<const PatientRecord> cohort) {
    std::size_t n = 0;
    for (const auto& p : cohort) n += p.encounters.size();
    return n;
}

void require_file(const fs::path& p, const std::string& what) {
    if (!fs::is_regular_file(p)) throw IoError(what + " not found: " + p.string());
}

fs::path prepared_file(const PipelineConfig& cfg, const char* name) { return cfg.paths.prepared / name; }

int cmd_synth(const PipelineConfig& cfg, bool quiet) {
    SynthConfig sc = cfg.synth;
    sc.seed = cfg.synth_seed();
    const auto cohort = generate_synthetic_cohort(sc);
    if (cohort.patients.empty()) std::cerr << "warning: synth.patients = 0, writing an empty cohort\n";
    write_cohort(cohort.patients, cfg.paths.cohort);
    write_ground_truth(cohort.truth, cfg.paths.truth);
    if (!quiet)
        std::cout << "synth: patients=" << cohort.patients.size()
                  << " encounters=" << count_encounters(cohort.patients) << " cohort=" << cfg.paths.cohort.string()
                  << " truth=" << cfg.paths.truth.string() << "\n";
    return 0;
}

Cohort select_patients(std::span<const PatientRecord> cohort, const std::vector<std::string>& ids) {
    const std::set<std::string> wanted(ids.begin(), ids.end());
    Cohort out;
    for (const auto& p : cohort)
        if (wanted.count(p.patient_id)) out.push_back(p);
    return out;
}

int cmd_prepare(const PipelineConfig& cfg, bool quiet) {
    require_file(cfg.paths.cohort, "cohort file");
    const Cohort raw = read_cohort(cfg.paths.cohort);
    const Cohort phenotyped = phenotype_t2dm(raw);
    if (phenotyped.empty())
        throw EmptyDatasetError("no patient in " + cfg.paths.cohort.string() + " meets the T2DM phenotype");

    auto [train_raw, test_raw] = split_patients(phenotyped, cfg.train_fraction, cfg.split_seed());
    if (test_raw.empty()) std::cerr << "warning: test cohort is empty\n";
    const Cohort train = impute_cohort(train_raw);
    const Cohort test = impute_cohort(test_raw);

    const ActionVocabulary vocab = build_action_vocab(train, cfg.target, cfg.min_count);
    RewardParams rp;
    rp.discount = cfg.train.gamma;
    const TransitionDataset ds = build_transitions(train, cfg.target, vocab, rp);
    const auto test_tuples = build_transitions_frozen(test, cfg.target, vocab, ds.stats, ds.reward_params);

    fs::create_directories(cfg.paths.prepared);
    write_transitions(ds.tuples, prepared_file(cfg, "train_transitions.jsonl"));
    write_transitions(test_tuples, prepared_file(cfg, "test_transitions.jsonl"));

    PreparedMetadata meta;
    meta.target = cfg.target;
    meta.feature_stats = ds.stats;
    meta.vocabulary = vocab;
    meta.reward_params = ds.reward_params;
    meta.split_seed = cfg.split_seed();
    for (const auto& p : train) meta.train_patients.push_back(p.patient_id);
    for (const auto& p : test) meta.test_patients.push_back(p.patient_id);
    meta.train_transitions = ds.tuples.size();
    meta.test_transitions = test_tuples.size();
    write_metadata(meta, prepared_file(cfg, "metadata.json"));

    double mean = 0.0, var = 0.0;
    for (const auto& t : ds.tuples) mean += t.reward;
    mean /= static_cast<double>(ds.tuples.size());
    for (const auto& t : ds.tuples) var += (t.reward - mean) * (t.reward - mean);
    const double sd = ds.tuples.size() > 1 ? std::sqrt(var / static_cast<double>(ds.tuples.size() - 1)) : 0.0;

    if (!quiet)
        std::cout << "prepare: target=" << to_string(cfg.target) << " patients=" << train.size()
                  << " encounters=" << count_encounters(train) << " transitions=" << ds.tuples.size()
                  << " actions=" << vocab.size() << " reward_mean=" << fixed(mean, 4)
                  << " reward_sd=" << fixed(sd, 4) << " test_patients=" << test.size()
                  << " test_transitions=" << test_tuples.size() << "\n";
    return 0;
}

void write_train_log(const FullSchemeResult& r, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "step A (holdout of " << r.validation_patients.size() << " patients)\n";
    out << "  iterations " << r.holdout.iterations_run << ", stop " << to_string(r.holdout.stop_reason)
        << ", best td error " << r.holdout.best_td_error << " at " << r.holdout.best_iteration << "\n";
    for (const auto& p : r.holdout.curve)
        out << "  iter " << p.iteration << " td_error " << p.td_error << " consistency " << p.consistency << "\n";
    out << "L = " << r.holdout.iterations_run << "\n";
    out << "step B (all patients)\n";
    out << "  iterations " << r.final_run.iterations_run << ", stop " << to_string(r.final_run.stop_reason) << "\n";
}

int cmd_train(const PipelineConfig& cfg, bool quiet) {
    const auto meta_path = prepared_file(cfg, "metadata.json");
    const auto tuples_path = prepared_file(cfg, "train_transitions.jsonl");
    require_file(meta_path, "metadata file");
    require_file(tuples_path, "transition file");
    const PreparedMetadata meta = read_metadata(meta_path);
    const auto tuples = read_transitions(tuples_path);

    TrainConfig tc = cfg.train;
    tc.seed = cfg.train_seed();
    FullSchemeResult result = train_full_scheme(tuples, tc, meta.vocabulary.size());
    result.params.feature_stats = meta.feature_stats;
    result.params.vocabulary = meta.vocabulary;
    result.params.reward_params = meta.reward_params;

    save_qnetwork(result.params, cfg.paths.model);
    fs::create_directories(cfg.paths.reports);
    write_train_report(result, tc, cfg.paths.reports / "train_report.json");
    write_train_log(result, cfg.paths.reports / "train_log.txt");
    if (!quiet)
        std::cout << "train: L=" << result.holdout.iterations_run
                  << " stop=" << to_string(result.holdout.stop_reason)
                  << " best_td_error=" << fixed(result.holdout.best_td_error, 6)
                  << " final_iterations=" << result.final_run.iterations_run
                  << " model=" << cfg.paths.model.string() << "\n";
    return 0;
}

int cmd_evaluate(const PipelineConfig& cfg, bool quiet) {
    require_file(cfg.paths.model, "model file");
    const auto meta_path = prepared_file(cfg, "metadata.json");
    require_file(meta_path, "metadata file");
    require_file(cfg.paths.cohort, "cohort file");

    const QNetworkParams model = load_qnetwork(cfg.paths.model);
    const PreparedMetadata meta = read_metadata(meta_path);
    const Cohort raw = read_cohort(cfg.paths.cohort);
    const Cohort test = impute_cohort(select_patients(raw, meta.test_patients));
    const auto encounters = build_eval_encounters(test, meta.vocabulary, meta.feature_stats);

    std::vector<EvalEncounter> extra;
    if (cfg.eval.neighbor_pool == NeighborPool::train_test) {
        const Cohort train = impute_cohort(select_patients(raw, meta.train_patients));
        extra = build_eval_encounters(train, meta.vocabulary, meta.feature_stats);
    }

    EvalOptions eo;
    eo.k = cfg.eval.k;
    eo.variance_target = cfg.eval.variance_target;
    eo.threads = cfg.threads;

    EvalArtifacts art;
    art.report = evaluate_policy(model, meta.vocabulary, encounters, eo, extra);

    std::vector<EvalEncounter> pool(encounters.begin(), encounters.end());
    pool.insert(pool.end(), extra.begin(), extra.end());
    const PcaModel pca = pca_fit(state_matrix(pool), cfg.eval.variance_target);
    art.validity = imputation_validity_check(encounters, pca, cfg.eval.k);
    art.sensitivity = validity_sensitivity(encounters, pca, cfg.eval.sensitivity_ks);
    if (cfg.eval.importance_repeats > 0)
        art.importance = permutation_importance(model, state_matrix(encounters),
                                                cfg.eval.importance_repeats, cfg.importance_seed());
    if (fs::is_regular_file(cfg.paths.truth)) {
        const auto truth = read_ground_truth(cfg.paths.truth);
        art.planted = planted_agreement(art.report, meta.vocabulary, truth_for_target(truth, meta.target));
    }
    write_eval_artifacts(art, meta.vocabulary, cfg.paths.reports);

    if (!quiet) {
        const auto& r = art.report;
        std::cout << "evaluate: target=" << to_string(r.target) << " concordance=" << fixed(r.concordance, 4)
                  << " (" << r.concordant << "/" << r.total << ")";
        if (art.planted) std::cout << " planted_agreement=" << fixed(art.planted->policy, 4);
        std::cout << " reports=" << cfg.paths.reports.string() << "\n";
    }
    return 0;
}

int dispatch(const std::string& name, const PipelineConfig& cfg, bool quiet) {
    if (name == "synth") return cmd_synth(cfg, quiet);
    if (name == "prepare") return cmd_prepare(cfg, quiet);
    if (name == "train") return cmd_train(cfg, quiet);
    if (name == "evaluate") return cmd_evaluate(cfg, quiet);
    if (name == "run") {
        for (auto* step : {cmd_synth, cmd_prepare, cmd_train, cmd_evaluate})
            if (int rc = step(cfg, quiet); rc != 0) return rc;
        return 0;
    }
    if (name == "config") {
        std::cout << dump_config(cfg);
        return 0;
    }
    return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rxrl: batch deep Q-learning for T2DM prescription recommendation"};
    app.require_subcommand(1, 1);

    Options opt;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"synth", "Generate a synthetic cohort and its ground truth"},
        {"prepare", "Phenotype, impute, split and build transition tuples"},
        {"train", "Train the Q-network with the holdout-then-retrain scheme"},
        {"evaluate", "Score the trained policy on the test cohort"},
        {"run", "synth, prepare, train and evaluate in sequence"},
        {"config", "Print the effective configuration"},
    };
    for (const auto& [name, help] : commands) add_common_options(app.add_subcommand(name, help), opt);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        const PipelineConfig cfg = resolve_config(opt);
        return dispatch(name, cfg, opt.quiet);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ValidationError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ModelFormatError& e) {
        std::cerr << "model error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DivergenceError& e) {
        std::cerr << "training diverged: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
