// Five-state chain with an explicit transition matrix, used to check that
// tabular learning reaches the value-iteration fixed point.
#pragma once

#include <array>
#include <random>

#include "ess/qlearn.hpp"

namespace toy {

inline constexpr int kStates = 5;  // state 4 is terminal
inline constexpr int kActions = 2;  // 0 advance, 1 hold
inline constexpr double kGamma = 0.9;

using Matrix = std::array<std::array<double, kStates>, kStates>;

// P[a][s][s']; every row sums to 1.
inline std::array<Matrix, kActions> transitions() {
    std::array<Matrix, kActions> p{};
    for (int s = 0; s < kStates - 1; ++s) {
        p[0][s][s + 1] += 0.7;
        p[0][s][s] += 0.3;
        p[1][s][s] += 0.5;
        p[1][s][std::max(s - 1, 0)] += 0.25;
        p[1][s][std::min(s + 1, kStates - 1)] += 0.25;
    }
    p[0][4][4] = p[1][4][4] = 1.0;
    return p;
}

inline constexpr double kCost[4][2] = {{-1.0, -1.5}, {-2.0, -1.8}, {-1.2, -2.5}, {-0.5, -0.9}};

inline double h(int s) { return s == kStates - 1 ? 0.0 : std::max(kCost[s][0], kCost[s][1]); }

inline double reward(int s, int a, int s2) { return kCost[s][a] - kGamma * h(s2); }

// Q* by value iteration over the explicit matrix.
inline std::array<std::array<double, kActions>, kStates> value_iteration() {
    const auto p = transitions();
    std::array<std::array<double, kActions>, kStates> q{};
    for (int it = 0; it < 10000; ++it) {
        auto next = q;
        double delta = 0.0;
        for (int s = 0; s < kStates - 1; ++s)
            for (int a = 0; a < kActions; ++a) {
                double v = 0.0;
                for (int s2 = 0; s2 < kStates; ++s2) {
                    if (p[a][s][s2] == 0.0) continue;
                    const double tail = s2 == kStates - 1 ? 0.0 : std::max(q[s2][0], q[s2][1]);
                    v += p[a][s][s2] * (reward(s, a, s2) + kGamma * tail);
                }
                next[s][a] = v;
                delta = std::max(delta, std::abs(v - q[s][a]));
            }
        q = next;
        if (delta < 1e-15) break;
    }
    return q;
}

inline ess::ActionClass cls(int a) { return a == 0 ? ess::ActionClass::Delete1 : ess::ActionClass::Skip; }
inline ess::StateKey key(int s) { return ess::StateKey{s, 0, 0, 0}; }

class Env final : public ess::Environment {
public:
    explicit Env(std::uint64_t seed) : rng_(seed), p_(transitions()) {}

    ess::StateKey reset() override {
        s_ = 0;
        return key(s_);
    }
    std::vector<ess::ActionClass> actions() const override { return {cls(0), cls(1)}; }
    Outcome step(ess::ActionClass c) override {
        const int a = c == ess::ActionClass::Skip ? 1 : 0;
        std::uniform_real_distribution<double> u(0.0, 1.0);
        double x = u(rng_), acc = 0.0;
        int s2 = kStates - 1;
        for (int t = 0; t < kStates; ++t) {
            acc += p_[a][s_][t];
            if (x < acc) {
                s2 = t;
                break;
            }
        }
        Outcome o;
        o.reward = reward(s_, a, s2);
        o.next = key(s2);
        o.terminal = s2 == kStates - 1;
        s_ = s2;
        return o;
    }

private:
    std::mt19937_64 rng_;
    std::array<Matrix, kActions> p_;
    int s_ = 0;
};

}  // namespace toy
