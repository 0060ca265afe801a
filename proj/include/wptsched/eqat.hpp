#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <string_view>

#include "wptsched/energy.hpp"
#include "wptsched/mdp.hpp"
#include "wptsched/params.hpp"
#include "wptsched/random.hpp"

namespace wpt {

enum class DesignKind { exponential, sigmoid, gamma };

/// Transmission-probability design p = f(e, q): increasing in the backlog,
/// decreasing in the stored charge.
struct TxProbDesign {
    DesignKind kind = DesignKind::exponential;
    double kappa_q = 0.5;  // exponential: per-packet rate
    double kappa_e = 0.5;  // exponential: per-level rate
    double shape = 2.0;    // gamma
    double scale = 1.0;    // gamma

    static TxProbDesign exponential(double rate) { return {DesignKind::exponential, rate, rate}; }
    static TxProbDesign sigmoid() { return {DesignKind::sigmoid}; }
    static TxProbDesign gamma(double shape, double scale) {
        return {DesignKind::gamma, 0.5, 0.5, shape, scale};
    }

    /// "exp:0.5", "exp:0.5:0.3", "sigmoid", "gamma:2:1".
    static TxProbDesign parse(std::string_view text);
    std::string label() const;

    friend bool operator==(const TxProbDesign&, const TxProbDesign&) = default;
};

/// Throws ValidationError on non-positive parameters.
void require_valid(const TxProbDesign& design);

/// Design value for battery level `e` and backlog `q`:
///   exponential  (1 - exp(-kappa_q q)) exp(-kappa_e e)
///   sigmoid      sin(pi/2 q/Q) cos(pi/2 e/K)
///   gamma        P(shape, q / (scale e)), the regularized lower incomplete
///                gamma function; 1 at e = 0 with q > 0.
double tx_prob(const TxProbDesign& design, int e, int q, const NetworkParams& params);

/// 1 - prod_{n != k} (1 - p_n).
double collision_prob(std::size_t k, std::span<const double> p);

/// Distribution of node k's next state when it transmits while the others
/// transmit with probabilities `p`. No-collision outcomes (weight
/// prod(1 - p_n)) follow the centralized selected-node law and gain
/// harvest_delta; collided outcomes burn collision_loss levels with no
/// harvest. The collided cases keep the printed pattern, including a queue
/// decrease on a collided, non-arriving slot. With `normalize` the missing
/// collision-with-arrival case (queue + 1, mass Pr^c (1 - (1-eps)^L) lambda)
/// is added so the row sums to one. One arrival opportunity per slot; a node
/// with an empty queue does not transmit and only sees arrivals.
NodeDistribution collided_transition(NodeState s, std::size_t k, std::span<const double> p,
                                     const EnergyProfile& energy, const NetworkParams& params,
                                     bool normalize = true);

/// Mass of the outcomes in which node k's head-of-line packet is delivered:
/// (1 - eps)^L prod_{n != k} (1 - p_n). This is the quantity the E-QAT gate
/// compares against its threshold.
double delivery_mass(std::size_t k, std::span<const double> p, const NetworkParams& params);

struct EqatConfig {
    TxProbDesign design = TxProbDesign::exponential(0.5);
    double alpha = 0.5;       // backoff growth
    double threshold = 0.05;  // Pr0_thresh
    int backoff_window = 8;   // backoff drawn uniformly from {1, ..., window}

    friend bool operator==(const EqatConfig&, const EqatConfig&) = default;
};

void require_valid(const EqatConfig& config);

/// Per-node E-QAT controller state.
struct EqatNodeCtl {
    double base_p = 0.0;   // f(e, q) at the current state
    int fail_count = 0;    // frames since the last non-collided transmission
    int backoff = 0;       // slots left before the node may contend again
    bool holding = false;  // the gate kept the node silent in the last slot

    double effective_p(double alpha) const;
};

enum class EqatAction { transmit, hold, silent, backing_off };

struct EqatDecision {
    EqatAction action = EqatAction::silent;
    int modulation = 1;
    double gate_mass = 0.0;
};

/// One slot of the node's decision logic. A node in backoff counts down and
/// stays off the air. `beacon` holds the other nodes' design probabilities
/// f(e, q) (0 while backing off). `sampled` is the outcome of the node's
/// Bernoulli(effective_p) draw. A sampled node whose delivery mass
/// falls below the threshold holds and escalates its failure count; otherwise
/// it transmits at the precomputed order.
EqatDecision eqat_decide(EqatNodeCtl& ctl, std::size_t k, std::span<const double> beacon,
                         bool sampled, const EqatConfig& config, const EnergyProfile& energy,
                         const NetworkParams& params);

/// Collision feedback: escalate and draw a backoff.
void eqat_on_collision(EqatNodeCtl& ctl, const EqatConfig& config, std::mt19937_64& rng);

/// Non-collided transmission: reset the failure count.
void eqat_on_delivery(EqatNodeCtl& ctl);

/// Refresh base_p from the node's current state.
void eqat_refresh(EqatNodeCtl& ctl, NodeState s, const EqatConfig& config,
                  const NetworkParams& params);

}  // namespace wpt
