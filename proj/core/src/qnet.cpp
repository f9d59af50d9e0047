#include "rxrl/qnet.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "rxrl/errors.hpp"

namespace rxrl {

namespace {

double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// One dropout mask per hidden layer, batch x width, holding 0 or 1 / (1 - rate).
std::vector<Eigen::MatrixXd> draw_masks(const QNetworkParams& params, Eigen::Index batch,
                                        std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const double keep_scale = 1.0 / (1.0 - params.dropout_rate);
    std::vector<Eigen::MatrixXd> masks;
    for (std::size_t l = 0; l + 1 < params.layers.size(); ++l) {
        const Eigen::Index width = params.layers[l].weight.cols();
        Eigen::MatrixXd m(batch, width);
        for (Eigen::Index i = 0; i < batch; ++i)
            for (Eigen::Index j = 0; j < width; ++j)
                m(i, j) = unit_uniform(rng) < params.dropout_rate ? 0.0 : keep_scale;
        masks.push_back(std::move(m));
    }
    return masks;
}

struct ForwardCache {
    std::vector<Eigen::MatrixXd> pre;    // pre-activation per layer
    std::vector<Eigen::MatrixXd> post;   // input to each layer (post[0] = states)
    std::vector<Eigen::MatrixXd> masks;  // hidden layers, train mode only
    Eigen::MatrixXd output;
};

void check_input(const QNetworkParams& params, Eigen::Index cols) {
    if (params.layers.empty()) throw ShapeError("network has no layers");
    if (cols != params.layers.front().weight.rows())
        throw ShapeError("state dimension " + std::to_string(cols) + " does not match network input " +
                         std::to_string(params.layers.front().weight.rows()));
}

ForwardCache run_forward(const QNetworkParams& params, const Eigen::MatrixXd& states,
                         ForwardMode mode) {
    check_input(params, states.cols());
    ForwardCache c;
    const bool dropout = mode.train && params.dropout_rate > 0.0;
    if (dropout) c.masks = draw_masks(params, states.rows(), mode.mask_seed);
    Eigen::MatrixXd act = states;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const auto& layer = params.layers[l];
        c.post.push_back(act);
        Eigen::MatrixXd z = act * layer.weight;
        z.rowwise() += layer.bias.transpose();
        c.pre.push_back(z);
        if (l + 1 == params.layers.size()) {
            c.output = std::move(z);
        } else {
            act = z.cwiseMax(0.0);
            if (dropout) act.array() *= c.masks[l].array();
        }
    }
    return c;
}

}  // namespace

std::vector<int> QNetworkParams::layer_sizes() const {
    std::vector<int> sizes;
    if (layers.empty()) return sizes;
    sizes.push_back(static_cast<int>(layers.front().weight.rows()));
    for (const auto& l : layers) sizes.push_back(static_cast<int>(l.weight.cols()));
    return sizes;
}

bool QNetworkParams::all_finite() const {
    for (const auto& l : layers)
        if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
}

Gradient zeros_like(const QNetworkParams& params) {
    Gradient g;
    for (const auto& l : params.layers)
        g.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                     Eigen::VectorXd::Zero(l.bias.size())});
    return g;
}

QNetworkParams init_qnetwork(int input_dim, int n_actions, std::uint64_t seed,
                             const std::vector<int>& hidden, double dropout_rate) {
    if (input_dim < 1 || n_actions < 1) throw ShapeError("network dimensions must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout rate outside [0, 1)");
    std::vector<int> sizes{input_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(n_actions);

    std::mt19937_64 rng(seed);
    QNetworkParams p;
    p.dropout_rate = dropout_rate;
    p.training.seed = seed;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const int fan_in = sizes[l];
        const int fan_out = sizes[l + 1];
        if (fan_out < 1) throw ShapeError("hidden layer sizes must be >= 1");
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        DenseLayer layer{Eigen::MatrixXd(fan_in, fan_out), Eigen::VectorXd::Zero(fan_out)};
        for (int i = 0; i < fan_in; ++i)
            for (int j = 0; j < fan_out; ++j) layer.weight(i, j) = (2.0 * unit_uniform(rng) - 1.0) * limit;
        p.layers.push_back(std::move(layer));
    }
    return p;
}

Eigen::MatrixXd forward_batch(const QNetworkParams& params, const Eigen::MatrixXd& states,
                              ForwardMode mode) {
    return run_forward(params, states, mode).output;
}

Eigen::VectorXd forward(const QNetworkParams& params, const StateVector& state, ForwardMode mode) {
    return forward_batch(params, state.transpose(), mode).row(0).transpose();
}

Batch make_batch(std::span<const TransitionTuple> tuples) {
    std::vector<std::size_t> rows(tuples.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return make_batch(tuples, rows);
}

Batch make_batch(std::span<const TransitionTuple> tuples, std::span<const std::size_t> rows) {
    Batch b;
    const auto n = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index dim = rows.empty() ? 0 : tuples[rows[0]].state.size();
    b.states.resize(n, dim);
    b.next_states.resize(n, dim);
    b.rewards.resize(n);
    b.actions.resize(rows.size());
    b.terminal.resize(rows.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& t = tuples[rows[static_cast<std::size_t>(i)]];
        if (t.state.size() != dim || t.next_state.size() != dim)
            throw ShapeError("transitions have inconsistent state dimensions");
        b.states.row(i) = t.state.transpose();
        b.next_states.row(i) = t.next_state.transpose();
        b.rewards[i] = t.reward;
        b.actions[static_cast<std::size_t>(i)] = t.action_id;
        b.terminal[static_cast<std::size_t>(i)] = t.terminal;
    }
    return b;
}

Eigen::VectorXd td_targets(const QNetworkParams& target_params, const Batch& batch, double gamma) {
    const Eigen::MatrixXd q_next = forward_batch(target_params, batch.next_states);
    Eigen::VectorXd y(batch.size());
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
        y[i] = batch.rewards[i];
        if (!batch.terminal[static_cast<std::size_t>(i)]) y[i] += gamma * q_next.row(i).maxCoeff();
    }
    return y;
}

TdLoss td_loss(const QNetworkParams& params, const QNetworkParams& target_params,
               const Batch& batch, double gamma) {
    TdLoss out;
    out.targets = td_targets(target_params, batch, gamma);
    const Eigen::MatrixXd q = forward_batch(params, batch.states);
    out.predictions.resize(batch.size());
    double sum = 0.0;
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
        const int a = batch.actions[static_cast<std::size_t>(i)];
        if (a < 0 || a >= q.cols()) throw ShapeError("action id " + std::to_string(a) + " out of range");
        out.predictions[i] = q(i, a);
        const double e = q(i, a) - out.targets[i];
        sum += e * e;
    }
    out.loss = batch.size() > 0 ? sum / static_cast<double>(batch.size()) : 0.0;
    return out;
}

LossAndGradient backward(const QNetworkParams& params, const Batch& batch,
                         const Eigen::VectorXd& targets, ForwardMode mode) {
    const ForwardCache c = run_forward(params, batch.states, mode);
    const Eigen::Index n = batch.size();
    const double inv_n = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;

    LossAndGradient out;
    Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(n, c.output.cols());
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int a = batch.actions[static_cast<std::size_t>(i)];
        if (a < 0 || a >= c.output.cols())
            throw ShapeError("action id " + std::to_string(a) + " out of range");
        const double e = c.output(i, a) - targets[i];
        sum += e * e;
        delta(i, a) = 2.0 * e * inv_n;
    }
    out.loss = sum * inv_n;

    out.gradient.resize(params.layers.size());
    for (std::size_t l = params.layers.size(); l-- > 0;) {
        auto& g = out.gradient[l];
        g.weight = c.post[l].transpose() * delta;
        g.bias = delta.colwise().sum().transpose();
        if (l == 0) break;
        Eigen::MatrixXd upstream = delta * params.layers[l].weight.transpose();
        // through dropout (if any) and the ReLU of layer l - 1
        if (!c.masks.empty()) upstream.array() *= c.masks[l - 1].array();
        upstream.array() *= (c.pre[l - 1].array() > 0.0).cast<double>();
        delta = std::move(upstream);
    }
    return out;
}

AdamState AdamState::for_params(const QNetworkParams& params, AdamConfig config) {
    AdamState s;
    s.config = config;
    s.first_moment = zeros_like(params);
    s.second_moment = zeros_like(params);
    return s;
}

void adam_step(QNetworkParams& params, const Gradient& grad, AdamState& adam) {
    if (grad.size() != params.layers.size() || adam.first_moment.size() != params.layers.size())
        throw ShapeError("gradient does not match parameter layout");
    const auto& hp = adam.config;
    ++adam.step;
    const double t = static_cast<double>(adam.step);
    const double c1 = 1.0 - std::pow(hp.beta1, t);
    const double c2 = 1.0 - std::pow(hp.beta2, t);

    auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
        if (param.size() != g.size()) throw ShapeError("gradient does not match parameter layout");
        m.array() = hp.beta1 * m.array() + (1.0 - hp.beta1) * g.array();
        v.array() = hp.beta2 * v.array() + (1.0 - hp.beta2) * g.array().square();
        param.array() -= hp.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + hp.epsilon);
    };
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        update(params.layers[l].weight, grad[l].weight, adam.first_moment[l].weight,
               adam.second_moment[l].weight);
        update(params.layers[l].bias, grad[l].bias, adam.first_moment[l].bias,
               adam.second_moment[l].bias);
    }
}

int argmax_action(const Eigen::VectorXd& q) {
    int best = 0;
    for (Eigen::Index a = 1; a < q.size(); ++a)
        if (q[a] > q[best]) best = static_cast<int>(a);
    return best;
}

int recommend(const QNetworkParams& params, const StateVector& state) {
    return argmax_action(forward(params, state));
}

// ---------------------------------------------------------------------------
// Binary model format, little-endian:
//   magic "RXQNET\r\n", u32 version,
//   u32 n_sizes, u32 sizes[n], u8 activation, f64 dropout,
//   u32 stats_dim, f64 mean[dim], f64 sd[dim],
//   u8 target, u32 n_vocab, {u32 mask, u64 freq}[n_vocab],
//   f64 a1c_threshold, a1c_sigma, sbp_threshold, sbp_sigma, discount,
//   u8 has_mm, {f64 mean, f64 sd}[3] if has_mm,
//   i64 iterations, f64 final_td_error, u64 seed,
//   per layer: f64 weight[fan_in * fan_out] row-major, f64 bias[fan_out].
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'R', 'X', 'Q', 'N', 'E', 'T', '\r', '\n'};

class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(const char* p, std::size_t n) { out_.append(p, n); }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(const std::string& in) : in_(in) {}
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(in_[pos_++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(in_[pos_++])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(in_[pos_++])) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    bool raw_equals(const char* p, std::size_t n) {
        need(n);
        const bool eq = std::memcmp(in_.data() + pos_, p, n) == 0;
        pos_ += n;
        return eq;
    }
    // Throws when fewer than n bytes remain.
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) throw ModelTruncatedError("model file is truncated");
    }
    bool at_end() const { return pos_ == in_.size(); }

private:
    const std::string& in_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_qnetwork(const QNetworkParams& p) {
    Writer w;
    w.raw(kMagic, sizeof kMagic);
    w.u32(kModelFormatVersion);

    const auto sizes = p.layer_sizes();
    w.u32(static_cast<std::uint32_t>(sizes.size()));
    for (int s : sizes) w.u32(static_cast<std::uint32_t>(s));
    w.u8(static_cast<std::uint8_t>(p.activation));
    w.f64(p.dropout_rate);

    w.u32(static_cast<std::uint32_t>(p.feature_stats.dim()));
    for (double v : p.feature_stats.mean) w.f64(v);
    for (double v : p.feature_stats.sd) w.f64(v);

    w.u8(static_cast<std::uint8_t>(p.vocabulary.target()));
    w.u32(static_cast<std::uint32_t>(p.vocabulary.size()));
    for (int i = 0; i < p.vocabulary.size(); ++i) {
        w.u32(p.vocabulary.regimen(i).mask());
        w.u64(p.vocabulary.frequency(i));
    }

    const auto& rp = p.reward_params;
    w.f64(rp.a1c_threshold);
    w.f64(rp.a1c_sigma);
    w.f64(rp.sbp_threshold);
    w.f64(rp.sbp_sigma);
    w.f64(rp.discount);
    w.u8(rp.multimorbidity_stats ? 1 : 0);
    if (rp.multimorbidity_stats)
        for (const auto& s : *rp.multimorbidity_stats) {
            w.f64(s.mean);
            w.f64(s.sd);
        }

    w.u64(static_cast<std::uint64_t>(p.training.iterations));
    w.f64(p.training.final_td_error);
    w.u64(p.training.seed);

    for (const auto& layer : p.layers) {
        for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
            for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) w.f64(layer.weight(i, j));
        for (Eigen::Index j = 0; j < layer.bias.size(); ++j) w.f64(layer.bias[j]);
    }
    return w.take();
}

QNetworkParams deserialize_qnetwork(const std::string& bytes) {
    Reader r(bytes);
    if (bytes.size() < sizeof kMagic || !r.raw_equals(kMagic, sizeof kMagic))
        throw ModelFormatError("not a model file (bad magic bytes)");
    const std::uint32_t version = r.u32();
    if (version != kModelFormatVersion)
        throw ModelVersionError("unsupported model format version " + std::to_string(version) +
                                " (expected " + std::to_string(kModelFormatVersion) + ")");

    QNetworkParams p;
    const std::uint32_t n_sizes = r.u32();
    if (n_sizes < 2 || n_sizes > 64) throw ModelShapeError("implausible layer count");
    std::vector<int> sizes;
    for (std::uint32_t i = 0; i < n_sizes; ++i) {
        const std::uint32_t s = r.u32();
        if (s < 1 || s > (1u << 20)) throw ModelShapeError("implausible layer size");
        sizes.push_back(static_cast<int>(s));
    }
    const std::uint8_t act = r.u8();
    if (act != static_cast<std::uint8_t>(Activation::relu)) throw ModelFormatError("unknown activation");
    p.activation = Activation::relu;
    p.dropout_rate = r.f64();

    const std::uint32_t dim = r.u32();
    r.need(static_cast<std::size_t>(dim) * 16);
    p.feature_stats.mean.resize(dim);
    p.feature_stats.sd.resize(dim);
    for (auto& v : p.feature_stats.mean) v = r.f64();
    for (auto& v : p.feature_stats.sd) v = r.f64();
    if (dim != 0 && static_cast<int>(dim) != sizes.front())
        throw ModelShapeError("feature stats dimension does not match network input");

    const std::uint8_t target = r.u8();
    if (target > static_cast<std::uint8_t>(Target::multimorbidity)) throw ModelFormatError("unknown target");
    const std::uint32_t n_vocab = r.u32();
    r.need(static_cast<std::size_t>(n_vocab) * 12);
    if (n_vocab > 0) {
        std::vector<Regimen> regimens;
        std::vector<std::uint64_t> freq;
        for (std::uint32_t i = 0; i < n_vocab; ++i) {
            regimens.emplace_back(r.u32());
            freq.push_back(r.u64());
        }
        try {
            p.vocabulary = ActionVocabulary(static_cast<Target>(target), std::move(regimens), std::move(freq));
        } catch (const Error& e) {
            throw ModelFormatError(std::string("invalid vocabulary: ") + e.what());
        }
        if (static_cast<int>(n_vocab) != sizes.back())
            throw ModelShapeError("vocabulary size does not match network output");
    }

    auto& rp = p.reward_params;
    rp.a1c_threshold = r.f64();
    rp.a1c_sigma = r.f64();
    rp.sbp_threshold = r.f64();
    rp.sbp_sigma = r.f64();
    rp.discount = r.f64();
    if (r.u8()) {
        std::array<StandardizationStats, 3> s{};
        for (auto& x : s) {
            x.mean = r.f64();
            x.sd = r.f64();
        }
        rp.multimorbidity_stats = s;
    }

    p.training.iterations = static_cast<std::int64_t>(r.u64());
    p.training.final_td_error = r.f64();
    p.training.seed = r.u64();

    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const int fan_in = sizes[l];
        const int fan_out = sizes[l + 1];
        r.need((static_cast<std::size_t>(fan_in) + 1) * static_cast<std::size_t>(fan_out) * 8);
        DenseLayer layer{Eigen::MatrixXd(fan_in, fan_out), Eigen::VectorXd(fan_out)};
        for (int i = 0; i < fan_in; ++i)
            for (int j = 0; j < fan_out; ++j) layer.weight(i, j) = r.f64();
        for (int j = 0; j < fan_out; ++j) layer.bias[j] = r.f64();
        p.layers.push_back(std::move(layer));
    }
    if (!r.at_end()) throw ModelShapeError("trailing bytes after the last layer");
    return p;
}

void save_qnetwork(const QNetworkParams& params, const std::filesystem::path& path) {
    const std::string bytes = serialize_qnetwork(params);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write model file " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing model file " + path.string());
}

QNetworkParams load_qnetwork(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_qnetwork(ss.str());
}

}  // namespace rxrl
