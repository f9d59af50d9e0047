#include <benchmark/benchmark.h>

#include <random>

#include "rxrl/edwa.hpp"
#include "rxrl/knn.hpp"
#include "rxrl/pca.hpp"
#include "rxrl/qnet.hpp"

using namespace rxrl;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    return m;
}

std::vector<TransitionTuple> random_tuples(int n, int dim, int n_actions) {
    const Eigen::MatrixXd s = random_matrix(n, dim, 1), s2 = random_matrix(n, dim, 2);
    std::vector<TransitionTuple> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto& t = out[static_cast<std::size_t>(i)];
        t.state = s.row(i).transpose();
        t.next_state = s2.row(i).transpose();
        t.action_id = i % n_actions;
        t.reward = 0.1 * (i % 7);
    }
    return out;
}

}  // namespace

static void BM_Forward(benchmark::State& state) {
    const auto net = init_qnetwork(layout::kStateDim, 6, 1);
    const Eigen::MatrixXd x = random_matrix(state.range(0), layout::kStateDim, 3);
    for (auto _ : state) benchmark::DoNotOptimize(forward_batch(net, x));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(256);

static void BM_Backward(benchmark::State& state) {
    const auto net = init_qnetwork(layout::kStateDim, 6, 1);
    const auto tuples = random_tuples(static_cast<int>(state.range(0)), layout::kStateDim, 6);
    const Batch batch = make_batch(tuples);
    const Eigen::VectorXd targets = td_targets(net, batch, 0.9);
    std::uint64_t k = 0;
    for (auto _ : state) benchmark::DoNotOptimize(backward(net, batch, targets, ForwardMode::training(++k)));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Backward)->Arg(256);

static void BM_AdamStep(benchmark::State& state) {
    auto net = init_qnetwork(layout::kStateDim, 6, 1);
    auto adam = AdamState::for_params(net);
    Gradient g = zeros_like(net);
    for (auto& l : g) l.weight.setConstant(1e-3);
    for (auto _ : state) adam_step(net, g, adam);
}
BENCHMARK(BM_AdamStep);

static void BM_KnnQuery(benchmark::State& state) {
    const Eigen::Index n = state.range(0);
    const Eigen::MatrixXd pts = random_matrix(n, 12, 4);
    std::vector<int> actions(static_cast<std::size_t>(n));
    std::vector<double> y(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        actions[static_cast<std::size_t>(i)] = static_cast<int>(i % 6);
        y[static_cast<std::size_t>(i)] = static_cast<double>(i % 13);
    }
    const KnnIndex index(pts, actions, y);
    const Eigen::MatrixXd q = random_matrix(64, 12, 5);
    Eigen::Index i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(index.query(q.row(i % 64).transpose(), static_cast<int>(i % 6), 10));
        ++i;
    }
}
BENCHMARK(BM_KnnQuery)->Arg(1000)->Arg(10000);

static void BM_PcaFit(benchmark::State& state) {
    const Eigen::MatrixXd x = random_matrix(state.range(0), layout::kStateDim, 6);
    for (auto _ : state) benchmark::DoNotOptimize(pca_fit(x, 0.9));
}
BENCHMARK(BM_PcaFit)->Arg(4000);

static void BM_Edwa(benchmark::State& state) {
    std::vector<TimedValue> s;
    for (int d = 0; d < 365; d += 7) s.push_back({d, 7.0 + 0.01 * d});
    int q = 100;
    for (auto _ : state) {
        benchmark::DoNotOptimize(edwa_impute(s, q));
        q = q == 364 ? 100 : q + 1;
    }
}
BENCHMARK(BM_Edwa);

BENCHMARK_MAIN();
