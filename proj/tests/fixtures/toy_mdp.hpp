#pragma once

// Five-state, three-action chain with known dynamics.
//   a0 stays (small reward), slips back one state 10% of the time
//   a1 advances with probability 0.8, no reward
//   a2 resets to state 0; pays 3 from the last state, costs 0.5 elsewhere
// The myopic choice is a0 in states 0-3, the optimal one is a1.

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "rxrl/preprocess.hpp"

namespace rxrl::testing {

struct ToyMdp {
    static constexpr int kStates = 5;
    static constexpr int kActions = 3;
    double gamma = 0.9;
    std::array<std::array<std::array<double, kStates>, kActions>, kStates> p{};
    std::array<std::array<double, kActions>, kStates> r{};

    ToyMdp() {
        for (int s = 0; s < kStates; ++s) {
            p[s][0][s] += 0.9;
            p[s][0][s > 0 ? s - 1 : 0] += 0.1;
            r[s][0] = 0.2;
            p[s][1][s + 1 < kStates ? s + 1 : s] += 0.8;
            p[s][1][s] += 0.2;
            r[s][1] = 0.0;
            p[s][2][0] = 1.0;
            r[s][2] = s == kStates - 1 ? 3.0 : -0.5;
        }
    }

    std::array<std::array<double, kActions>, kStates> value_iteration(int sweeps = 5000) const {
        std::array<std::array<double, kActions>, kStates> q{};
        for (int it = 0; it < sweeps; ++it) {
            std::array<double, kStates> v{};
            for (int s = 0; s < kStates; ++s) v[s] = *std::max_element(q[s].begin(), q[s].end());
            for (int s = 0; s < kStates; ++s)
                for (int a = 0; a < kActions; ++a) {
                    double next = 0.0;
                    for (int t = 0; t < kStates; ++t) next += p[s][a][t] * v[t];
                    q[s][a] = r[s][a] + gamma * next;
                }
        }
        return q;
    }

    std::array<int, kStates> optimal_policy() const {
        const auto q = value_iteration();
        std::array<int, kStates> pi{};
        for (int s = 0; s < kStates; ++s)
            pi[s] = static_cast<int>(std::max_element(q[s].begin(), q[s].end()) - q[s].begin());
        return pi;
    }

    static StateVector one_hot(int s) {
        StateVector x = StateVector::Zero(kStates);
        x[s] = 1.0;
        return x;
    }

    // Uniform states and uniform logged actions, never terminal.
    std::vector<TransitionTuple> logged_dataset(std::size_t n, std::uint64_t seed) const {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<int> pick_s(0, kStates - 1), pick_a(0, kActions - 1);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<TransitionTuple> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const int s = pick_s(rng);
            const int a = pick_a(rng);
            double x = u(rng);
            int t = 0;
            while (t + 1 < kStates && x >= p[s][a][t]) x -= p[s][a][t++];
            TransitionTuple tup;
            tup.state = one_hot(s);
            tup.action_id = a;
            tup.reward = r[s][a];
            tup.next_state = one_hot(t);
            tup.patient_id = "toy" + std::to_string(i % 100);
            tup.encounter_index = static_cast<int>(i / 100);
            out.push_back(std::move(tup));
        }
        return out;
    }
};

}  // namespace rxrl::testing
