#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "rxrl/errors.hpp"
#include "rxrl/qnet.hpp"
#include "support/builders.hpp"

using namespace rxrl;
using namespace rxrl::testing;

namespace {

QNetworkParams tiny_net() {
    // 2 -> 2 -> 2, hand weights
    QNetworkParams p;
    p.dropout_rate = 0.0;
    DenseLayer h{Eigen::MatrixXd(2, 2), Eigen::VectorXd(2)};
    h.weight << 1.0, -1.0,
                2.0, 0.5;
    h.bias << 0.5, -3.0;
    DenseLayer o{Eigen::MatrixXd(2, 2), Eigen::VectorXd(2)};
    o.weight << 1.0, 2.0,
                3.0, -1.0;
    o.bias << 0.1, 0.2;
    p.layers = {h, o};
    return p;
}

std::vector<TransitionTuple> random_tuples(int n, int dim, int n_actions, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::uniform_int_distribution<int> a(0, n_actions - 1);
    std::vector<TransitionTuple> out;
    for (int i = 0; i < n; ++i) {
        TransitionTuple t;
        t.state = Eigen::VectorXd(dim);
        t.next_state = Eigen::VectorXd(dim);
        for (int j = 0; j < dim; ++j) {
            t.state[j] = g(rng);
            t.next_state[j] = g(rng);
        }
        t.action_id = a(rng);
        t.reward = g(rng);
        t.terminal = i % 5 == 4;
        out.push_back(t);
    }
    return out;
}

QNetworkParams with_metadata(QNetworkParams p) {
    const int dim = p.input_dim();
    p.feature_stats.mean.assign(static_cast<std::size_t>(dim), 0.25);
    p.feature_stats.sd.assign(static_cast<std::size_t>(dim), 1.5);
    std::vector<Regimen> regs{Regimen()};
    std::vector<std::uint64_t> freq{7};
    const std::vector<Subclass> singles = {Subclass::PPARg, Subclass::INSR, Subclass::GLP1,
                                           Subclass::DPP4_BIG, Subclass::DPP4, Subclass::BIG,
                                           Subclass::INSR_BIG, Subclass::SGLT2, Subclass::INSO};
    for (int i = 1; i < p.n_actions(); ++i) {
        regs.push_back(i <= 9 ? Regimen{singles[static_cast<std::size_t>(i - 1)]}
                              : Regimen{Subclass::BIG, singles[static_cast<std::size_t>(i - 10)]});
        freq.push_back(100u - static_cast<std::uint64_t>(i));
    }
    p.vocabulary = ActionVocabulary(Target::glycemia, regs, freq);
    p.reward_params.multimorbidity_stats = std::array<StandardizationStats, 3>{
        StandardizationStats{0.1, 1.1}, StandardizationStats{0.2, 1.2}, StandardizationStats{0.3, 1.3}};
    p.training = {1234, 0.5, 99};
    return p;
}

}  // namespace

TEST(Init, ShapesBoundsAndDeterminism) {
    const auto p = init_qnetwork(53, 12, 7);
    EXPECT_EQ(p.layer_sizes(), (std::vector<int>{53, 256, 512, 256, 12}));
    EXPECT_EQ(p.input_dim(), 53);
    EXPECT_EQ(p.n_actions(), 12);
    const std::vector<int> s = p.layer_sizes();
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        EXPECT_EQ(p.layers[l].weight.rows(), s[l]);
        EXPECT_EQ(p.layers[l].weight.cols(), s[l + 1]);
        EXPECT_TRUE(p.layers[l].bias.isZero(0.0));
        const double limit = std::sqrt(6.0 / (s[l] + s[l + 1]));
        EXPECT_LE(p.layers[l].weight.cwiseAbs().maxCoeff(), limit);
        EXPECT_GT(p.layers[l].weight.cwiseAbs().maxCoeff(), 0.9 * limit);
    }
    EXPECT_TRUE(init_qnetwork(53, 12, 7).layers == p.layers);
    EXPECT_FALSE(init_qnetwork(53, 12, 8).layers == p.layers);
    EXPECT_THROW(init_qnetwork(0, 12, 1), ShapeError);
    EXPECT_THROW(init_qnetwork(5, 2, 1, {4}, 1.0), ConfigError);
}

TEST(Forward, ZeroParamsGiveZeroOutput) {
    auto p = init_qnetwork(10, 4, 1, {8, 8});
    for (auto& l : p.layers) {
        l.weight.setZero();
        l.bias.setZero();
    }
    const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(10, -3, 3);
    EXPECT_TRUE(forward(p, x).isZero(0.0));
    EXPECT_TRUE(forward(p, x, ForwardMode::training(3)).isZero(0.0));
}

TEST(Forward, HandComputedTwoLayer) {
    const auto p = tiny_net();
    Eigen::VectorXd x(2);
    x << 1.0, 2.0;
    // hidden pre = [1*1 + 2*2 + 0.5, 1*-1 + 2*0.5 - 3] = [5.5, -3] -> relu [5.5, 0]
    // out = [5.5*1 + 0.1, 5.5*2 + 0.2] = [5.6, 11.2]
    const auto q = forward(p, x);
    EXPECT_DOUBLE_EQ(q[0], 5.6);
    EXPECT_DOUBLE_EQ(q[1], 11.2);
    EXPECT_EQ(recommend(p, x), 1);
    EXPECT_EQ(forward(p, x), forward(p, x));
    Eigen::MatrixXd batch(2, 2);
    batch << 1.0, 2.0,
             0.0, 0.0;
    const auto qb = forward_batch(p, batch);
    EXPECT_EQ(qb.row(0).transpose(), q);
    EXPECT_DOUBLE_EQ(qb(1, 0), 0.5 * 1.0 + 0.1);
    EXPECT_DOUBLE_EQ(qb(1, 1), 0.5 * 2.0 + 0.2);
    EXPECT_THROW(forward(p, Eigen::VectorXd::Zero(3)), ShapeError);
}

TEST(TdLoss, TerminalAndBootstrappedExamples) {
    auto p = init_qnetwork(3, 2, 1, {4});
    for (auto& l : p.layers) l.weight.setZero();
    p.layers.back().bias << 1.0, 2.0;
    // Q is the output bias everywhere: Q(s, .) = [1, 2]
    TransitionTuple a{Eigen::VectorXd::Zero(3), 0, 1.0, Eigen::VectorXd::Ones(3), false, "x", 0};
    TransitionTuple b = a;
    b.terminal = true;
    const std::vector<TransitionTuple> v{a};
    const auto batch = make_batch(v);
    const auto l1 = td_loss(p, p, batch, 0.9);
    EXPECT_DOUBLE_EQ(l1.targets[0], 1.0 + 0.9 * 2.0);
    EXPECT_NEAR(l1.loss, (1.0 - 2.8) * (1.0 - 2.8), 1e-12);

    const std::vector<TransitionTuple> vb{b};
    const auto l2 = td_loss(p, p, make_batch(vb), 0.9);
    EXPECT_DOUBLE_EQ(l2.targets[0], 1.0);
    EXPECT_DOUBLE_EQ(l2.loss, 0.0);

    p.layers.back().bias << 2.8, 2.0;
    // with Q(s, 0) = 2.8 and max Q(s') = 2.8 the target moves: 1 + 0.9 * 2.8
    const auto l3 = td_loss(p, p, batch, 0.9);
    EXPECT_NEAR(l3.loss, std::pow(2.8 - 3.52, 2), 1e-12);

    // duplicated rows leave the mean unchanged
    const auto tuples = random_tuples(16, 3, 2, 5);
    std::vector<TransitionTuple> doubled = tuples;
    doubled.insert(doubled.end(), tuples.begin(), tuples.end());
    const auto q = init_qnetwork(3, 2, 4, {6});
    EXPECT_NEAR(td_loss(q, q, make_batch(tuples), 0.9).loss, td_loss(q, q, make_batch(doubled), 0.9).loss,
                1e-12);
}

TEST(Backward, MatchesFiniteDifferences) {
    auto p = init_qnetwork(5, 3, 11, {7, 6}, 0.0);
    for (auto& l : p.layers) l.bias.setConstant(0.05);
    const auto tuples = random_tuples(12, 5, 3, 2);
    const auto batch = make_batch(tuples);
    Eigen::VectorXd targets = td_targets(p, batch, 0.9);
    const auto lg = backward(p, batch, targets);

    auto loss_at = [&](const QNetworkParams& q) {
        const auto pred = forward_batch(q, batch.states);
        double s = 0.0;
        for (Eigen::Index i = 0; i < batch.size(); ++i) {
            const double d = pred(i, batch.actions[static_cast<std::size_t>(i)]) - targets[i];
            s += d * d;
        }
        return s / static_cast<double>(batch.size());
    };
    EXPECT_NEAR(lg.loss, loss_at(p), 1e-12);
    const double h = 1e-6;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        for (Eigen::Index i = 0; i < p.layers[l].weight.rows(); ++i)
            for (Eigen::Index j = 0; j < p.layers[l].weight.cols(); ++j) {
                auto up = p, down = p;
                up.layers[l].weight(i, j) += h;
                down.layers[l].weight(i, j) -= h;
                const double fd = (loss_at(up) - loss_at(down)) / (2 * h);
                EXPECT_NEAR(lg.gradient[l].weight(i, j), fd, 1e-6 + 1e-4 * std::abs(fd));
            }
        for (Eigen::Index j = 0; j < p.layers[l].bias.size(); ++j) {
            auto up = p, down = p;
            up.layers[l].bias[j] += h;
            down.layers[l].bias[j] -= h;
            const double fd = (loss_at(up) - loss_at(down)) / (2 * h);
            EXPECT_NEAR(lg.gradient[l].bias[j], fd, 1e-6 + 1e-4 * std::abs(fd));
        }
    }
}

TEST(Backward, ZeroErrorAndUntakenActions) {
    const auto p = init_qnetwork(4, 3, 3, {5});
    const auto tuples = random_tuples(8, 4, 3, 9);
    const auto batch = make_batch(tuples);
    const Eigen::VectorXd exact = [&] {
        const auto q = forward_batch(p, batch.states);
        Eigen::VectorXd t(batch.size());
        for (Eigen::Index i = 0; i < batch.size(); ++i) t[i] = q(i, batch.actions[static_cast<std::size_t>(i)]);
        return t;
    }();
    const auto zero = backward(p, batch, exact);
    EXPECT_DOUBLE_EQ(zero.loss, 0.0);
    for (const auto& g : zero.gradient) {
        EXPECT_TRUE(g.weight.isZero(0.0));
        EXPECT_TRUE(g.bias.isZero(0.0));
    }
    // every row takes action 0, so output columns 1 and 2 get no gradient
    auto only0 = tuples;
    for (auto& t : only0) t.action_id = 0;
    const auto g = backward(p, make_batch(only0), Eigen::VectorXd::Constant(8, 5.0));
    EXPECT_TRUE(g.gradient.back().weight.col(1).isZero(0.0));
    EXPECT_TRUE(g.gradient.back().weight.col(2).isZero(0.0));
    EXPECT_DOUBLE_EQ(g.gradient.back().bias[1], 0.0);
    EXPECT_NE(g.gradient.back().bias[0], 0.0);
}

TEST(Adam, ZeroGradientFirstStepAndTrace) {
    auto p = init_qnetwork(2, 2, 1, {3});
    const auto before = p;
    auto adam = AdamState::for_params(p, {0.01, 0.9, 0.999, 1e-8});
    adam_step(p, zeros_like(p), adam);
    EXPECT_EQ(adam.step, 1);
    EXPECT_TRUE(p.layers == before.layers);

    auto q = init_qnetwork(2, 2, 1, {3});
    auto st = AdamState::for_params(q, {0.01, 0.9, 0.999, 1e-8});
    Gradient ones = zeros_like(q);
    for (auto& l : ones) {
        l.weight.setOnes();
        l.bias.setOnes();
    }
    adam_step(q, ones, st);
    EXPECT_NEAR(q.layers[0].weight(0, 0) - before.layers[0].weight(0, 0), -0.01 / (1.0 + 1e-8), 1e-15);

    // two steps with g = 1 then g = -1, traced by hand
    Gradient neg = ones;
    for (auto& l : neg) {
        l.weight *= -1.0;
        l.bias *= -1.0;
    }
    adam_step(q, neg, st);
    const double m = 0.9 * 0.1 * 1.0 + 0.1 * -1.0;          // -0.01
    const double v = 0.999 * 0.001 + 0.001;                  // 0.001999
    const double mhat = m / (1 - 0.81);
    const double vhat = v / (1 - 0.999 * 0.999);
    const double second = -0.01 * mhat / (std::sqrt(vhat) + 1e-8);
    EXPECT_NEAR(q.layers[1].bias[0], -0.01 / (1.0 + 1e-8) + second, 1e-12);
}

TEST(Dropout, ExpectationPreserved) {
    auto p = init_qnetwork(6, 2, 2, {50}, 0.5);
    p.layers[0].bias.setConstant(0.3);
    const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(6, -1, 1);
    const auto eval = forward(p, x);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(2);
    const int n = 10000;
    for (int i = 0; i < n; ++i) sum += forward(p, x, ForwardMode::training(static_cast<std::uint64_t>(i)));
    sum /= n;
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(sum[j], eval[j], 0.02 * std::max(1.0, std::abs(eval[j])));
    EXPECT_EQ(forward(p, x, ForwardMode::training(5)), forward(p, x, ForwardMode::training(5)));
    EXPECT_NE(forward(p, x, ForwardMode::training(5)), eval);
}

TEST(Argmax, TiesAndScaling) {
    Eigen::VectorXd q(4);
    q << 1.0, 3.0, 3.0, -2.0;
    EXPECT_EQ(argmax_action(q), 1);
    EXPECT_EQ(argmax_action(q * 7.5), 1);
    EXPECT_EQ(argmax_action(q.array() + 100.0), 1);
    EXPECT_EQ(argmax_action(Eigen::VectorXd::Zero(5)), 0);

    auto p = init_qnetwork(53, 12, 3);
    for (auto& l : p.layers) l.weight.setZero();
    EXPECT_EQ(recommend(p, Eigen::VectorXd::Ones(53)), 0);
    p.layers.back().bias[3] = 0.5;
    EXPECT_EQ(recommend(p, Eigen::VectorXd::Ones(53)), 3);
    EXPECT_THROW(recommend(p, Eigen::VectorXd::Ones(54)), ShapeError);
}

TEST(Serialization, RoundTripIsBitExact) {
    TempDir dir;
    const auto p = with_metadata(init_qnetwork(53, 12, 21));
    save_qnetwork(p, dir / "m.rxq");
    const auto q = load_qnetwork(dir / "m.rxq");
    EXPECT_TRUE(q.layers == p.layers);
    EXPECT_EQ(q.feature_stats, p.feature_stats);
    EXPECT_EQ(q.vocabulary, p.vocabulary);
    EXPECT_EQ(q.training, p.training);
    EXPECT_EQ(q.dropout_rate, p.dropout_rate);
    ASSERT_TRUE(q.reward_params.multimorbidity_stats.has_value());
    EXPECT_EQ((*q.reward_params.multimorbidity_stats)[2].sd, 1.3);
    EXPECT_EQ(serialize_qnetwork(q), serialize_qnetwork(p));
    const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(53, -2, 2);
    EXPECT_EQ(forward(q, x), forward(p, x));
}

TEST(Serialization, CorruptFilesAreRejected) {
    const auto p = with_metadata(init_qnetwork(53, 12, 21, {16}));
    const std::string good = serialize_qnetwork(p);

    std::string bad_magic = good;
    bad_magic[0] = 'X';
    EXPECT_THROW(deserialize_qnetwork(bad_magic), ModelFormatError);
    EXPECT_THROW(deserialize_qnetwork("RX"), ModelFormatError);

    std::string bad_version = good;
    bad_version[8] = 9;
    EXPECT_THROW(deserialize_qnetwork(bad_version), ModelVersionError);

    for (std::size_t cut : {good.size() - 1, good.size() / 2, std::size_t{20}})
        EXPECT_THROW(deserialize_qnetwork(good.substr(0, cut)), ModelTruncatedError) << cut;

    std::string bad_shape = good;
    bad_shape[16] = 52;  // input size no longer matches the stored feature stats
    EXPECT_THROW(deserialize_qnetwork(bad_shape), ModelShapeError);

    EXPECT_THROW(deserialize_qnetwork(good + "x"), ModelShapeError);

    TempDir dir;
    EXPECT_THROW(load_qnetwork(dir / "missing.rxq"), IoError);
    std::ofstream(dir / "junk.rxq") << "not a model";
    EXPECT_THROW(load_qnetwork(dir / "junk.rxq"), ModelFormatError);
}
