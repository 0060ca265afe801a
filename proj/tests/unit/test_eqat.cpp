#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "support.hpp"
#include "wptsched/eqat.hpp"
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

EnergyProfile profile(int delta, int loss) {
    EnergyProfile e;
    e.harvest_delta = delta;
    e.idle_harvest = delta + 1;
    e.collision_loss = loss;
    e.min_tx_battery = loss;
    e.modulation.order = 2;
    return e;
}

}  // namespace

TEST_CASE("design parsing and labels") {
    CHECK(TxProbDesign::parse("exp:0.5") == TxProbDesign::exponential(0.5));
    CHECK(TxProbDesign::parse("exponential:0.5:0.3").kappa_e == 0.3);
    CHECK(TxProbDesign::parse("sigmoid") == TxProbDesign::sigmoid());
    CHECK(TxProbDesign::parse("gamma") == TxProbDesign::gamma(2.0, 1.0));
    CHECK(TxProbDesign::parse("gamma:3:0.5") == TxProbDesign::gamma(3.0, 0.5));
    CHECK(TxProbDesign::exponential(0.5).label() == "exp:0.5");
    CHECK(TxProbDesign::parse(TxProbDesign::gamma(3.0, 0.25).label()) ==
          TxProbDesign::gamma(3.0, 0.25));
    CHECK_THROWS_AS(TxProbDesign::parse("exp:-1"), ValidationError);
    CHECK_THROWS_AS(TxProbDesign::parse("gamma:0:1"), ValidationError);
    CHECK_THROWS_AS(TxProbDesign::parse("linear"), ValidationError);
    CHECK_THROWS_AS(TxProbDesign::parse("exp:abc"), ValidationError);
}

TEST_CASE("tx_prob examples") {
    const auto p = paper_defaults(1);
    for (const auto& d : {TxProbDesign::exponential(0.5), TxProbDesign::sigmoid(),
                          TxProbDesign::gamma(2.0, 1.0)})
        for (int e = 0; e <= p.battery_levels; ++e) CHECK(tx_prob(d, e, 0, p) == 0.0);
    CHECK(tx_prob(TxProbDesign::sigmoid(), 0, p.queue_cap, p) == Approx(1.0).epsilon(1e-15));
    const TxProbDesign exp{DesignKind::exponential, 0.5, 0.3};
    CHECK(tx_prob(exp, 2, 3, p) == Approx(oracle::kExpDesign).epsilon(1e-14));
    CHECK(tx_prob(TxProbDesign::gamma(2.0, 1.0), 0, 1, p) == 1.0);
    // q / (scale e) = 6 / (1 * 5)
    CHECK(tx_prob(TxProbDesign::gamma(2.0, 1.0), 5, 6, p) ==
          Approx(oracle::kGammaP_2_1p2).epsilon(1e-14));
    CHECK_THROWS_AS(tx_prob(exp, 6, 1, p), ValidationError);
}

TEST_CASE("designs rise with backlog and fall with charge over the whole grid") {
    const auto p = paper_defaults(1);
    std::vector<TxProbDesign> designs{TxProbDesign::exponential(0.5), TxProbDesign::sigmoid(),
                                      TxProbDesign::gamma(2.0, 1.0)};
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.05, 4.0);
    for (int i = 0; i < 50; ++i) {
        designs.push_back({DesignKind::exponential, u(rng), u(rng)});
        designs.push_back(TxProbDesign::gamma(u(rng), u(rng)));
    }
    for (const auto& d : designs)
        for (int e = 0; e <= p.battery_levels; ++e)
            for (int q = 0; q <= p.queue_cap; ++q) {
                const double v = tx_prob(d, e, q, p);
                REQUIRE(v >= 0.0);
                REQUIRE(v <= 1.0);
                if (q < p.queue_cap) REQUIRE(tx_prob(d, e, q + 1, p) >= v);
                if (e < p.battery_levels) REQUIRE(tx_prob(d, e + 1, q, p) <= v);
            }
}

TEST_CASE("collision_prob") {
    const std::vector<double> quiet{0.9, 0.0, 0.0};
    CHECK(collision_prob(0, quiet) == 0.0);
    const std::vector<double> certain{0.1, 0.3, 1.0};
    CHECK(collision_prob(0, certain) == 1.0);
    const std::vector<double> halves{0.2, 0.5, 0.5};
    CHECK(collision_prob(0, halves) == 0.75);
    const std::vector<double> bad{0.2, 1.5};
    CHECK_THROWS_AS(collision_prob(0, bad), ValidationError);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> p(5);
        for (auto& x : p) x = u(rng);
        double product = 1.0;
        for (std::size_t n = 1; n < p.size(); ++n) product *= 1.0 - p[n];
        const double base = collision_prob(0, p);
        REQUIRE(base == Approx(1.0 - product).epsilon(1e-15));
        auto raised = p;
        const std::size_t n = 1 + static_cast<std::size_t>(u(rng) * 4);
        raised[n] = raised[n] + (1.0 - raised[n]) * u(rng);
        REQUIRE(collision_prob(0, raised) >= base);
    }
}

TEST_CASE("collided_transition reduces to the selected law without competitors") {
    auto p = small_params(3, 5, 6);
    p.arrival_prob = 0.3;
    const auto e = profile(1, 2);
    const std::vector<double> others{0.7, 0.0, 0.0};
    for (int b = 2; b <= 5; ++b)
        for (int q = 0; q <= 6; ++q) {
            const NodeState s{b, q};
            const auto col = collided_transition(s, 0, others, e, p);
            const auto sel = q == 0 ? unselected_transition(s, p) : selected_transition(s, e, p);
            CHECK(total(col) == Approx(1.0).epsilon(1e-15));
            for (const auto& o : sel) CHECK(mass_at(col, o.next) == Approx(o.prob).epsilon(1e-14));
        }
}

TEST_CASE("collided_transition hand expansion under certain collision") {
    auto p = small_params(2, 5, 6);
    p.arrival_prob = 0.0;
    p.ber_target = 1e-6;
    const auto e = profile(1, 2);
    const std::vector<double> others{0.0, 1.0};
    const double s = std::pow(1.0 - 1e-6, 256);
    const auto d = collided_transition({4, 3}, 0, others, e, p);
    CHECK(mass_at(d, {2, 2}) == Approx(s).epsilon(1e-14));
    CHECK(mass_at(d, {2, 3}) == Approx(1.0 - s).epsilon(1e-9));
    CHECK(mass_at(d, {5, 2}) == 0.0);
    CHECK(total(d) == Approx(1.0).epsilon(1e-15));
}

TEST_CASE("printed collided cases miss exactly the collision-with-arrival mass") {
    auto p = small_params(3, 5, 6);
    p.arrival_prob = 0.3;
    const auto e = profile(1, 2);
    const std::vector<double> comp{0.0, 0.5, 0.5};
    const auto printed = collided_transition({3, 3}, 0, comp, e, p, false);
    CHECK(total(printed) == Approx(oracle::kPrintedCollidedSum).epsilon(1e-14));
    CHECK(total(printed) == Approx(1.0 - 0.75 * (1.0 - oracle::kSuccess) * 0.3).epsilon(1e-14));
    const auto full = collided_transition({3, 3}, 0, comp, e, p);
    CHECK(total(full) == Approx(1.0).epsilon(1e-15));
    CHECK(mass_at(full, {1, 4}) == Approx(0.75 * (1.0 - oracle::kSuccess) * 0.3).epsilon(1e-14));
}

TEST_CASE("collided rows sum to one over random draws") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        auto p = small_params(4, 5, 6);
        p.arrival_prob = u(rng);
        p.ber_target = u(rng) * 0.01;
        const auto e = profile(static_cast<int>(u(rng) * 7) - 3, 1 + static_cast<int>(u(rng) * 3));
        std::vector<double> comp(4);
        for (auto& x : comp) x = u(rng);
        const NodeState s{static_cast<int>(u(rng) * 6), static_cast<int>(u(rng) * 7)};
        const auto d = collided_transition(s, static_cast<std::size_t>(u(rng) * 4), comp, e, p);
        REQUIRE(std::abs(total(d) - 1.0) <= 1e-12);
        for (const auto& o : d) REQUIRE(is_valid(o.next, p));
    }
}

TEST_CASE("effective probability escalation") {
    EqatNodeCtl ctl;
    ctl.base_p = 0.4;
    ctl.fail_count = 3;
    CHECK(ctl.effective_p(0.5) == 1.0);
    ctl.fail_count = 1;
    CHECK(ctl.effective_p(0.5) == Approx(0.6));
    ctl.base_p = 0.0;
    ctl.fail_count = 40;
    CHECK(ctl.effective_p(0.5) == 0.0);

    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 10000; ++i) {
        ctl.base_p = u(rng);
        ctl.fail_count = static_cast<int>(u(rng) * 200);
        const double p = ctl.effective_p(u(rng) * 3.0 + 1e-6);
        REQUIRE(p >= 0.0);
        REQUIRE(p <= 1.0);
    }
}

TEST_CASE("eqat_decide") {
    auto p = small_params(3, 5, 6);
    const auto e = profile(1, 2);
    EqatConfig cfg;
    EqatNodeCtl ctl;
    ctl.base_p = 0.5;

    SUBCASE("a vacuous gate always transmits when sampled") {
        cfg.threshold = 0.0;
        const std::vector<double> beacon{0.0, 1.0, 1.0};
        const auto d = eqat_decide(ctl, 0, beacon, true, cfg, e, p);
        CHECK(d.action == EqatAction::transmit);
        CHECK(d.modulation == 2);
        CHECK(d.gate_mass == 0.0);
        CHECK(eqat_decide(ctl, 0, beacon, false, cfg, e, p).action == EqatAction::silent);
    }
    SUBCASE("below the threshold the node holds and escalates") {
        cfg.threshold = 0.5;
        const std::vector<double> beacon{0.0, 0.6, 0.6};
        const auto d = eqat_decide(ctl, 0, beacon, true, cfg, e, p);
        CHECK(d.action == EqatAction::hold);
        CHECK(d.gate_mass == Approx(oracle::kSuccess * 0.16));
        CHECK(ctl.fail_count == 1);
        CHECK(ctl.holding);
        eqat_decide(ctl, 0, beacon, false, cfg, e, p);
        CHECK_FALSE(ctl.holding);
    }
    SUBCASE("collision draws a backoff that is counted down") {
        std::mt19937_64 rng(1);
        for (int i = 0; i < 200; ++i) {
            EqatNodeCtl c;
            eqat_on_collision(c, cfg, rng);
            REQUIRE(c.fail_count == 1);
            REQUIRE(c.backoff >= 1);
            REQUIRE(c.backoff <= cfg.backoff_window);
        }
        ctl.backoff = 2;
        const std::vector<double> beacon{0.0, 0.0, 0.0};
        CHECK(eqat_decide(ctl, 0, beacon, true, cfg, e, p).action == EqatAction::backing_off);
        CHECK(eqat_decide(ctl, 0, beacon, true, cfg, e, p).action == EqatAction::backing_off);
        CHECK(eqat_decide(ctl, 0, beacon, true, cfg, e, p).action == EqatAction::transmit);
    }
    SUBCASE("delivery resets the escalation") {
        ctl.fail_count = 4;
        eqat_on_delivery(ctl);
        CHECK(ctl.fail_count == 0);
        eqat_refresh(ctl, {2, 3}, cfg, p);
        CHECK(ctl.base_p == tx_prob(cfg.design, 2, 3, p));
        CHECK(ctl.effective_p(cfg.alpha) == ctl.base_p);
    }
}

TEST_CASE("E-QAT config validation") {
    EqatConfig cfg;
    CHECK_NOTHROW(require_valid(cfg));
    cfg.alpha = 0.0;
    CHECK_THROWS_AS(require_valid(cfg), ValidationError);
    cfg = {};
    cfg.threshold = 1.5;
    CHECK_THROWS_AS(require_valid(cfg), ValidationError);
    cfg = {};
    cfg.backoff_window = 0;
    CHECK_THROWS_AS(require_valid(cfg), ValidationError);
}
