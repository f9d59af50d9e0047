#include "rxrl/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "rxrl/errors.hpp"
#include "rxrl/seeding.hpp"

namespace rxrl {

std::string_view to_string(NeighborPool p) { return p == NeighborPool::test ? "test" : "train_test"; }

std::uint64_t PipelineConfig::synth_seed() const { return derive_seed(seed, "synth"); }
std::uint64_t PipelineConfig::split_seed() const { return derive_seed(seed, "split"); }
std::uint64_t PipelineConfig::train_seed() const { return derive_seed(seed, "train"); }
std::uint64_t PipelineConfig::importance_seed() const { return derive_seed(seed, "importance"); }

void PipelineConfig::check() const {
    synth.check();
    train.check();
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("split.train_fraction must be in (0, 1)");
    if (min_count < 1) throw ConfigError("prepare.min_count must be >= 1");
    if (eval.k < 1) throw ConfigError("eval.k must be >= 1");
    if (!(eval.variance_target > 0.0 && eval.variance_target <= 1.0))
        throw ConfigError("eval.variance_target must be in (0, 1]");
    if (eval.importance_repeats < 0) throw ConfigError("eval.importance_repeats must be >= 0");
    for (auto k : eval.sensitivity_ks)
        if (k < 1) throw ConfigError("eval.sensitivity_ks entries must be >= 1");
    if (threads < 1) throw ConfigError("threads must be >= 1");
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    const auto* end = v.data() + v.size();
    const auto res = std::from_chars(v.data(), end, out);
    if (res.ec != std::errc() || res.ptr != end || v.empty())
        throw ConfigError("invalid value '" + v + "' for " + key);
    return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& v) {
    std::vector<T> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, trim(item)));
    if (out.empty()) throw ConfigError("empty list for " + key);
    return out;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(xs[i]);
    }
    return out;
}

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

template <typename T, typename Field>
ConfigKey number_key(std::string key, std::string help, Field field) {
    return ConfigKey{
        key, std::move(help),
        [key, field](PipelineConfig& c, const std::string& v) { field(c) = parse_number<T>(key, v); },
        [field](const PipelineConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
                return fmt(field(const_cast<PipelineConfig&>(c)));
            else
                return std::to_string(field(const_cast<PipelineConfig&>(c)));
        }};
}

template <typename Field>
ConfigKey path_key(std::string key, std::string help, Field field) {
    return ConfigKey{key, std::move(help),
                     [field](PipelineConfig& c, const std::string& v) { field(c) = v; },
                     [field](const PipelineConfig& c) {
                         return field(const_cast<PipelineConfig&>(c)).generic_string();
                     }};
}

std::vector<ConfigKey> make_registry() {
    std::vector<ConfigKey> keys;
    keys.push_back(number_key<std::uint64_t>("seed", "global seed", [](PipelineConfig& c) -> auto& { return c.seed; }));
    keys.push_back(number_key<unsigned>("threads", "worker cap", [](PipelineConfig& c) -> auto& { return c.threads; }));
    keys.push_back(ConfigKey{
        "target", "glycemia, bp, cvd or multimorbidity",
        [](PipelineConfig& c, const std::string& v) {
            try {
                c.target = parse_target(v);
            } catch (const Error&) {
                throw ConfigError("invalid target '" + v + "'");
            }
        },
        [](const PipelineConfig& c) { return std::string(to_string(c.target)); }});

    keys.push_back(path_key("paths.cohort", "cohort JSONL", [](PipelineConfig& c) -> auto& { return c.paths.cohort; }));
    keys.push_back(path_key("paths.truth", "ground-truth JSONL", [](PipelineConfig& c) -> auto& { return c.paths.truth; }));
    keys.push_back(path_key("paths.prepared", "prepared-data directory", [](PipelineConfig& c) -> auto& { return c.paths.prepared; }));
    keys.push_back(path_key("paths.model", "model file", [](PipelineConfig& c) -> auto& { return c.paths.model; }));
    keys.push_back(path_key("paths.reports", "report directory", [](PipelineConfig& c) -> auto& { return c.paths.reports; }));

    keys.push_back(number_key<std::size_t>("synth.patients", "number of patients", [](PipelineConfig& c) -> auto& { return c.synth.n_patients; }));
    keys.push_back(number_key<double>("synth.mean_encounters", "mean encounters per patient", [](PipelineConfig& c) -> auto& { return c.synth.mean_encounters_per_patient; }));
    keys.push_back(number_key<double>("synth.behavior_policy_noise", "clinician randomization rate", [](PipelineConfig& c) -> auto& { return c.synth.behavior_policy_noise; }));
    keys.push_back(number_key<double>("synth.effect_scale", "planted effect multiplier", [](PipelineConfig& c) -> auto& { return c.synth.effect_scale; }));
    keys.push_back(number_key<double>("synth.noise_scale", "process noise multiplier", [](PipelineConfig& c) -> auto& { return c.synth.observation_noise_scale; }));
    keys.push_back(number_key<double>("synth.gap_median_days", "median encounter gap", [](PipelineConfig& c) -> auto& { return c.synth.gap_median_days; }));
    keys.push_back(number_key<double>("synth.gap_log_sigma", "lognormal gap sigma", [](PipelineConfig& c) -> auto& { return c.synth.gap_log_sigma; }));
    keys.push_back(number_key<double>("synth.non_t2dm_fraction", "share of non-T2DM patients", [](PipelineConfig& c) -> auto& { return c.synth.non_t2dm_fraction; }));
    for (Biomarker b : kAllBiomarkers) {
        const std::string key = "synth.missing." + std::string(to_string(b));
        keys.push_back(ConfigKey{
            key, "missingness rate",
            [key, b](PipelineConfig& c, const std::string& v) { c.synth.missingness_rates[b] = parse_number<double>(key, v); },
            [b](const PipelineConfig& c) {
                const auto it = c.synth.missingness_rates.find(b);
                return fmt(it == c.synth.missingness_rates.end() ? 0.0 : it->second);
            }});
    }

    keys.push_back(number_key<double>("split.train_fraction", "training share of patients", [](PipelineConfig& c) -> auto& { return c.train_fraction; }));
    keys.push_back(number_key<std::uint64_t>("prepare.min_count", "vocabulary frequency floor", [](PipelineConfig& c) -> auto& { return c.min_count; }));

    keys.push_back(number_key<double>("train.gamma", "discount", [](PipelineConfig& c) -> auto& { return c.train.gamma; }));
    keys.push_back(number_key<std::size_t>("train.minibatch_size", "minibatch size", [](PipelineConfig& c) -> auto& { return c.train.minibatch_size; }));
    keys.push_back(number_key<std::int64_t>("train.target_sync_period", "target sync period C", [](PipelineConfig& c) -> auto& { return c.train.target_sync_period; }));
    keys.push_back(number_key<double>("train.learning_rate", "Adam step size", [](PipelineConfig& c) -> auto& { return c.train.adam.learning_rate; }));
    keys.push_back(number_key<double>("train.beta1", "Adam beta1", [](PipelineConfig& c) -> auto& { return c.train.adam.beta1; }));
    keys.push_back(number_key<double>("train.beta2", "Adam beta2", [](PipelineConfig& c) -> auto& { return c.train.adam.beta2; }));
    keys.push_back(number_key<double>("train.epsilon", "Adam epsilon", [](PipelineConfig& c) -> auto& { return c.train.adam.epsilon; }));
    keys.push_back(number_key<std::int64_t>("train.early_stop_patience", "patience in iterations", [](PipelineConfig& c) -> auto& { return c.train.early_stop_patience; }));
    keys.push_back(number_key<std::int64_t>("train.max_iterations", "iteration cap", [](PipelineConfig& c) -> auto& { return c.train.max_iterations; }));
    keys.push_back(number_key<std::int64_t>("train.validation_eval_period", "validation period", [](PipelineConfig& c) -> auto& { return c.train.validation_eval_period; }));
    keys.push_back(number_key<double>("train.min_delta", "minimum improvement", [](PipelineConfig& c) -> auto& { return c.train.min_delta; }));
    keys.push_back(number_key<double>("train.dropout_rate", "dropout on hidden layers", [](PipelineConfig& c) -> auto& { return c.train.dropout_rate; }));
    keys.push_back(number_key<double>("train.validation_fraction", "holdout share for early stopping", [](PipelineConfig& c) -> auto& { return c.train.validation_fraction; }));
    keys.push_back(ConfigKey{
        "train.hidden_sizes", "comma-separated hidden widths",
        [](PipelineConfig& c, const std::string& v) { c.train.hidden_sizes = parse_list<int>("train.hidden_sizes", v); },
        [](const PipelineConfig& c) { return join(c.train.hidden_sizes); }});

    keys.push_back(number_key<std::size_t>("eval.k", "neighbors", [](PipelineConfig& c) -> auto& { return c.eval.k; }));
    keys.push_back(number_key<double>("eval.variance_target", "PCA retained variance", [](PipelineConfig& c) -> auto& { return c.eval.variance_target; }));
    keys.push_back(number_key<int>("eval.importance_repeats", "permutation repeats", [](PipelineConfig& c) -> auto& { return c.eval.importance_repeats; }));
    keys.push_back(ConfigKey{
        "eval.neighbor_pool", "test or train_test",
        [](PipelineConfig& c, const std::string& v) {
            if (v == "test") c.eval.neighbor_pool = NeighborPool::test;
            else if (v == "train_test") c.eval.neighbor_pool = NeighborPool::train_test;
            else throw ConfigError("invalid eval.neighbor_pool '" + v + "'");
        },
        [](const PipelineConfig& c) { return std::string(to_string(c.eval.neighbor_pool)); }});
    keys.push_back(ConfigKey{
        "eval.sensitivity_ks", "comma-separated k values for the validity sweep",
        [](PipelineConfig& c, const std::string& v) { c.eval.sensitivity_ks = parse_list<std::size_t>("eval.sensitivity_ks", v); },
        [](const PipelineConfig& c) { return join(c.eval.sensitivity_ks); }});
    return keys;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = make_registry();
    return keys;
}

void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& k : config_keys()) {
        if (k.key == key) {
            k.set(cfg, value);
            return;
        }
    }
    throw ConfigError("unknown config key '" + key + "'");
}

void apply_config_text(PipelineConfig& cfg, const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto stripped = trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const auto key = trim(std::string_view(stripped).substr(0, eq));
        const auto value = trim(std::string_view(stripped).substr(eq + 1));
        try {
            set_config_value(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    PipelineConfig cfg;
    apply_config_text(cfg, ss.str());
    return cfg;
}

std::string dump_config(const PipelineConfig& cfg) {
    std::string out;
    for (const auto& k : config_keys()) out += k.key + " = " + k.get(cfg) + "\n";
    return out;
}

}  // namespace rxrl
