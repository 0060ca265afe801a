#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "fh_oracle.hpp"
#include "oracles.hpp"
#include "support.hpp"
#include "wptsched/errors.hpp"
#include "wptsched/mdp.hpp"

using namespace wpt;
using doctest::Approx;
using testing_support::small_params;

namespace {

double mass_at(const NodeDistribution& d, NodeState s) {
    double m = 0.0;
    for (const auto& o : d)
        if (o.next == s) m += o.prob;
    return m;
}

double total(const NodeDistribution& d) {
    double m = 0.0;
    for (const auto& o : d) m += o.prob;
    return m;
}

EnergyProfile profile(int delta, int min_tx = 1, int idle = 2) {
    EnergyProfile e;
    e.harvest_delta = delta;
    e.idle_harvest = idle;
    e.collision_loss = min_tx;
    e.min_tx_battery = min_tx;
    return e;
}

}  // namespace

TEST_CASE("selected_transition examples") {
    auto p = small_params(1, 5, 6);
    const auto e = profile(1);

    p.ber_target = 0.0;
    p.arrival_prob = 0.0;
    auto d = selected_transition({3, 4}, e, p);
    CHECK(mass_at(d, {4, 3}) == 1.0);

    p.ber_target = 1.0;
    p.arrival_prob = 1.0;
    d = selected_transition({3, 4}, e, p);
    CHECK(mass_at(d, {4, 5}) == 1.0);

    p = small_params(1, 5, 6);
    p.arrival_prob = 0.3;
    d = selected_transition({2, 3}, e, p);
    CHECK(mass_at(d, {3, 4}) == Approx(oracle::kSelectedUp).epsilon(1e-13));
    CHECK(mass_at(d, {3, 2}) == Approx(oracle::kSelectedDown).epsilon(1e-13));
    CHECK(mass_at(d, {3, 3}) == Approx(oracle::kSelectedStay).epsilon(1e-13));
    CHECK(total(d) == Approx(1.0).epsilon(1e-15));
    CHECK(d.size() == 3);
}

TEST_CASE("selected_transition boundaries") {
    auto p = small_params(1, 5, 6);
    p.arrival_prob = 0.3;

    SUBCASE("empty queue only harvests") {
        const auto d = selected_transition({1, 0}, profile(1, 1, 3), p);
        CHECK(mass_at(d, {4, 1}) == Approx(0.3));
        CHECK(mass_at(d, {4, 0}) == Approx(0.7));
    }
    SUBCASE("too little charge only harvests") {
        const auto d = selected_transition({1, 2}, profile(1, 2, 3), p);
        CHECK(mass_at(d, {4, 3}) == Approx(0.3));
        CHECK(mass_at(d, {4, 2}) == Approx(0.7));
    }
    SUBCASE("battery clamps at both ends") {
        auto d = selected_transition({5, 2}, profile(2), p);
        for (const auto& o : d) CHECK(o.next.battery == 5);
        d = selected_transition({1, 2}, profile(-3), p);
        for (const auto& o : d) CHECK(o.next.battery == 0);
    }
    SUBCASE("full queue folds the up case into stay and counts the drop") {
        const auto d = selected_transition({2, 6}, profile(1), p);
        CHECK(mass_at(d, {3, 6}) == Approx(oracle::kSelectedUp + oracle::kSelectedStay));
        double drops = 0.0;
        for (const auto& o : d) drops += o.drop_mass;
        CHECK(drops == Approx(oracle::kSelectedUp).epsilon(1e-13));
    }
}

TEST_CASE("selected masses sum to one for any epsilon and lambda") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto p = small_params(1, 5, 6);
    for (int i = 0; i < 1000; ++i) {
        p.ber_target = u(rng);
        p.arrival_prob = u(rng);
        const NodeState s{static_cast<int>(u(rng) * 6), static_cast<int>(u(rng) * 7)};
        REQUIRE(total(selected_transition(s, profile(1), p)) == Approx(1.0).epsilon(1e-14));
        REQUIRE(total(unselected_transition(s, p)) == Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("unselected_transition examples") {
    auto p = small_params(1, 5, 6);
    p.arrival_prob = 0.0;
    auto d = unselected_transition({2, 3}, p);
    CHECK(mass_at(d, {2, 3}) == 1.0);

    p.arrival_prob = 1.0;
    d = unselected_transition({2, 3}, p);
    CHECK(mass_at(d, {2, 4}) == 1.0);

    p.arrival_prob = 0.3;
    d = unselected_transition({2, 6}, p);
    CHECK(mass_at(d, {2, 6}) == Approx(1.0));
    const JointState s{{2, 0}, {2, 6}};
    const JointState next{{2, 0}, {2, 6}};
    const std::vector<EnergyProfile> e{profile(1), profile(1)};
    auto pp = small_params(2, 5, 6);
    pp.arrival_prob = 0.3;
    CHECK(transition_reward(s, next, 0, e, pp) == Approx(0.3));
}

TEST_CASE("binomial arrivals when a slot spans several opportunities") {
    auto p = small_params(1, 5, 6);
    p.arrival_period = p.slot_len / 3.0;
    p.arrival_prob = 0.2;
    const auto pmf = arrival_pmf(p);
    REQUIRE(pmf.size() == 4);
    CHECK(pmf[0] == Approx(0.512));
    CHECK(pmf[1] == Approx(0.384));
    CHECK(pmf[2] == Approx(0.096));
    CHECK(pmf[3] == Approx(0.008));
    const auto d = unselected_transition({0, 5}, p);
    double drops = 0.0;
    for (const auto& o : d) drops += o.drop_mass;
    CHECK(drops == Approx(0.096 * 1 + 0.008 * 2));
}

TEST_CASE("joint_transition") {
    SUBCASE("one node equals the selected law") {
        auto p = small_params(1, 5, 6);
        p.arrival_prob = 0.3;
        const std::vector<EnergyProfile> e{profile(1)};
        const JointState s{{2, 3}};
        const auto joint = joint_transition(s, 0, e, p);
        const auto node = selected_transition(s[0], e[0], p);
        REQUIRE(joint.size() == node.size());
        for (std::size_t i = 0; i < node.size(); ++i) {
            CHECK(joint[i].next == node_index(node[i].next, p));
            CHECK(joint[i].prob == node[i].prob);
        }
    }
    SUBCASE("no noise and no arrivals is deterministic") {
        auto p = small_params(2, 5, 6);
        p.arrival_prob = 0.0;
        p.ber_target = 0.0;
        const std::vector<EnergyProfile> e{profile(2), profile(2)};
        const JointState s{{1, 3}, {4, 5}};
        const auto joint = joint_transition(s, 0, e, p);
        REQUIRE(joint.size() == 1);
        CHECK(joint[0].prob == 1.0);
        CHECK(state_unindex(joint[0].next, p) == JointState{{3, 2}, {4, 5}});
    }
    SUBCASE("masses are the explicit product on every state") {
        auto p = small_params(2, 2, 2);
        p.arrival_prob = 0.3;
        const std::vector<EnergyProfile> e{profile(1), profile(-1, 2, 1)};
        for (std::uint64_t i = 0; i < joint_state_count(p); ++i) {
            const auto s = state_unindex(i, p);
            for (std::size_t k = 0; k < 2; ++k) {
                std::map<std::uint64_t, double> expected;
                const auto d0 = k == 0 ? selected_transition(s[0], e[0], p)
                                       : unselected_transition(s[0], p);
                const auto d1 = k == 1 ? selected_transition(s[1], e[1], p)
                                       : unselected_transition(s[1], p);
                for (const auto& a : d0)
                    for (const auto& b : d1)
                        expected[state_index(JointState{a.next, b.next}, p)] += a.prob * b.prob;
                const auto joint = joint_transition(s, k, e, p);
                std::map<std::uint64_t, double> got;
                for (const auto& o : joint) got[o.next] += o.prob;
                REQUIRE(got.size() == expected.size());
                for (const auto& [next, prob] : expected)
                    CHECK(got[next] == Approx(prob).epsilon(1e-15));
            }
        }
    }
}

TEST_CASE("transition_reward examples") {
    auto p = small_params(2, 5, 6);
    p.arrival_prob = 0.3;
    const std::vector<EnergyProfile> e{profile(1), profile(1)};
    const JointState inner{{2, 3}, {2, 1}};
    const JointState inner_next{{3, 3}, {2, 2}};
    CHECK(transition_reward(inner, inner_next, 0, e, p) == 0.0);

    const JointState full{{2, 6}, {2, 0}};
    const JointState full_next{{3, 6}, {2, 0}};
    CHECK(transition_reward(full, full_next, 0, e, p) ==
          Approx((1.0 - oracle::kSuccess) * 0.3).epsilon(1e-13));
    CHECK(transition_reward(full, full_next, 0, e, p) == Approx(0.0361).epsilon(1e-3));
    CHECK(transition_reward(full, full_next, 1, e, p) == Approx(0.3));
    CHECK(expected_cost(full, 0, e, p) == Approx(oracle::kSelectedUp).epsilon(1e-13));
}

TEST_CASE("build_model sizes and normalization") {
    struct Case {
        std::size_t n;
        int k, q;
        std::uint64_t states;
    };
    for (const auto& c : {Case{1, 1, 1, 4}, Case{2, 2, 2, 81}, Case{3, 2, 2, 729}}) {
        auto p = small_params(c.n, c.k, c.q);
        p.arrival_prob = 0.3;
        const auto model = build_model(p);
        REQUIRE(model.n_states() == c.states);
        REQUIRE(model.n_actions() == c.n);
        for (std::uint64_t s = 0; s < model.n_states(); ++s)
            for (std::size_t a = 0; a < model.n_actions(); ++a) {
                const auto r = model.row(s, a);
                double sum = 0.0;
                double expected_reward = 0.0;
                const auto prob = model.prob(r);
                const auto reward = model.reward(r);
                for (std::size_t i = 0; i < prob.size(); ++i) {
                    REQUIRE(prob[i] >= 0.0);
                    REQUIRE(reward[i] >= 0.0);
                    sum += prob[i];
                    expected_reward += prob[i] * reward[i];
                }
                REQUIRE(std::abs(sum - 1.0) <= 1e-12);
                REQUIRE(expected_reward == Approx(model.cost(r)).epsilon(1e-12));
            }
    }
}

TEST_CASE("build_model enforces the state budget") {
    const auto p = small_params(3, 2, 2);
    try {
        build_model(p, 700);
        FAIL("expected a BudgetError");
    } catch (const BudgetError& e) {
        CHECK(std::string(e.what()).find("729") != std::string::npos);
    }
    CHECK_THROWS_AS(build_model(paper_defaults(10)), BudgetError);
}

TEST_CASE("model CSV dump") {
    const auto p = small_params(1, 1, 1);
    const auto model = build_model(p);
    std::ostringstream out;
    model.write_csv(out);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "state,action,next,prob,reward");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == model.n_entries());
}

TEST_CASE("value iteration on trivial models") {
    SUBCASE("no arrivals means no loss") {
        auto p = small_params(2, 2, 2);
        p.arrival_prob = 0.0;
        const auto sol = value_iteration(build_model(p), p);
        for (double v : sol.value) CHECK(v == 0.0);
        for (const auto& a : sol.policy) CHECK(a.node == 0);
    }
    SUBCASE("absorbing state is a geometric series") {
        auto p = small_params(1, 5, 1);
        p.arrival_prob = 1.0;
        p.vi_tol = 1e-10;
        const auto model = build_model(p);
        const auto& e = model.energy()[0];
        REQUIRE(e.harvest_delta >= 0);
        REQUIRE(e.min_tx_battery <= 5);
        const auto sol = value_iteration(model, p);
        const JointState absorbing{{5, 1}};
        const double r = 1.0 - oracle::kSuccess;
        CHECK(sol.value[state_index(absorbing, p)] ==
              Approx(r / (1.0 - p.discount)).epsilon(1e-9));
    }
}

TEST_CASE("value iteration residuals contract and stop on the rule") {
    auto p = small_params(2, 2, 2);
    p.arrival_prob = 0.4;
    const auto sol = value_iteration(build_model(p), p);
    REQUIRE(sol.sweeps == sol.residuals.size());
    for (std::size_t i = 1; i < sol.residuals.size(); ++i)
        CHECK(sol.residuals[i] <= sol.residuals[i - 1] * (1.0 + 1e-12) + 1e-15);
    const double stop = p.vi_tol * (1.0 - p.discount) / (2.0 * p.discount);
    CHECK(sol.residuals.back() < stop);
    if (sol.residuals.size() > 1) CHECK(sol.residuals[sol.residuals.size() - 2] >= stop);
    for (double v : sol.value) {
        CHECK(std::isfinite(v));
        CHECK(v >= 0.0);
    }
}

TEST_CASE("value iteration reports a sweep cap") {
    auto p = small_params(2, 2, 2);
    p.arrival_prob = 0.4;
    const auto model = build_model(p);
    try {
        value_iteration(model, p, {.max_sweeps = 3});
        FAIL("expected a ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.residual() > 0.0);
    }
}

TEST_CASE("value iteration policy matches finite-horizon backward induction") {
    auto p = small_params(2, 2, 2, 2);
    p.discount = 0.9;
    p.vi_tol = 1e-10;
    p.arrival_prob = 0.3;
    p.channel_gain = {0.4, 0.9};
    const auto model = build_model(p);
    const auto sol = value_iteration(model, p);
    std::vector<double> fh_value;
    const auto fh = testing_support::backward_induction(model, 0.9, 200, &fh_value);
    for (std::size_t s = 0; s < fh.size(); ++s) {
        CHECK(sol.policy[s].node == fh[s]);
        CHECK(sol.value[s] == Approx(fh_value[s]).epsilon(1e-8));
    }
}

TEST_CASE("value is non-decreasing in each queue with batteries fixed") {
    auto p = small_params(2, 2, 2);
    p.arrival_prob = 0.3;
    p.channel_gain = {0.5, 1.0};
    p.vi_tol = 1e-10;
    const auto sol = value_iteration(build_model(p), p);
    int violations = 0;
    int pairs = 0;
    for (std::uint64_t i = 0; i < joint_state_count(p); ++i) {
        const auto s = state_unindex(i, p);
        for (std::size_t n = 0; n < s.size(); ++n) {
            if (s[n].queue == p.queue_cap) continue;
            auto more = s;
            ++more[n].queue;
            ++pairs;
            if (sol.value[state_index(more, p)] < sol.value[i] - 1e-9) ++violations;
        }
    }
    MESSAGE("queue monotonicity: " << violations << " violations over " << pairs << " pairs");
    WARN(violations == 0);
}

TEST_CASE("exact scheduler replays the stored policy") {
    auto p = small_params(2, 2, 2);
    p.arrival_prob = 0.3;
    const auto sol = value_iteration(build_model(p), p);
    const EhmdpScheduler sched(sol.policy, p);
    CHECK(sched.exact());
    for (std::uint64_t i = 0; i < joint_state_count(p); ++i)
        CHECK(sched.choose(state_unindex(i, p)) == sol.policy[i]);
    CHECK_THROWS_AS(EhmdpScheduler(Policy(3), p), ValidationError);
}

TEST_CASE("approximate index policy") {
    auto p = paper_defaults(6, 1.0);
    p.arrival_prob = 0.3;
    const ApproxIndexPolicy approx(p);
    for (std::size_t full = 0; full < p.n_nodes; ++full) {
        JointState s(p.n_nodes, NodeState{5, 0});
        s[full].queue = p.queue_cap;
        CHECK(approx.choose(s) == full);
    }

    auto small = small_params(2, 2, 2);
    small.arrival_prob = 0.3;
    small.channel_gain = {0.5, 1.0};
    const auto sol = value_iteration(build_model(small), small);
    const ApproxIndexPolicy heuristic(small);
    std::size_t agree = 0;
    const auto count = joint_state_count(small);
    for (std::uint64_t i = 0; i < count; ++i)
        if (heuristic.choose(state_unindex(i, small)) == sol.policy[i].node) ++agree;
    MESSAGE("approximate vs exact agreement: " << agree << "/" << count);
}
