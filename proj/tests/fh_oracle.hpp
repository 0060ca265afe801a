#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "wptsched/mdp.hpp"

namespace testing_support {

// Finite-horizon backward induction on a built model, V_H = 0. Returns the
// first-stage minimizer per state, ties (relative 1e-9) to the lowest action.
inline std::vector<std::size_t> backward_induction(const wpt::TransitionModel& model,
                                                   double omega, int horizon,
                                                   std::vector<double>* value = nullptr) {
    const auto n = static_cast<std::size_t>(model.n_states());
    const std::size_t actions = model.n_actions();
    std::vector<double> later(n, 0.0), now(n, 0.0);
    std::vector<std::size_t> choice(n, 0);
    std::vector<double> q(actions);
    for (int t = horizon - 1; t >= 0; --t) {
        for (std::size_t s = 0; s < n; ++s) {
            for (std::size_t a = 0; a < actions; ++a) {
                const std::size_t r = model.row(s, a);
                const auto next = model.next(r);
                const auto prob = model.prob(r);
                double e = 0.0;
                for (std::size_t i = 0; i < next.size(); ++i) e += prob[i] * later[next[i]];
                q[a] = model.cost(r) + omega * e;
            }
            const double best = *std::min_element(q.begin(), q.end());
            std::size_t pick = 0;
            while (q[pick] > best + 1e-9 * std::max(1.0, std::abs(best))) ++pick;
            now[s] = best;
            choice[s] = pick;
        }
        later.swap(now);
    }
    if (value) *value = later;
    return choice;
}

}  // namespace testing_support
