#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace wpt {

/// Physical and protocol constants of a homogeneous rechargeable sensor
/// network served by one beamforming base station. Units are SI throughout.
///
/// Battery charge is tracked in levels {0, ..., battery_levels}; a level is
/// battery_quantum joules. The zero level is a state of its own, so a node has
/// battery_levels + 1 distinct battery values.
struct NetworkParams {
    std::size_t n_nodes = 10;
    int packet_bits = 256;            // L
    double ber_target = 5e-4;         // epsilon (0.05%)
    double kappa1 = 0.2;
    double kappa2 = 3.0;
    double bs_power = 3.0;            // P_e, watts
    double transfer_efficiency = 0.4; // delta, multiplies received WPT power
    double bandwidth = 80e3;          // W, hertz
    double slot_len = 0.01;           // one scheduling interval, seconds
    double arrival_period = 0.01;     // one arrival opportunity every T_lambda seconds
    double arrival_prob = 0.1;        // lambda, per arrival opportunity
    int battery_levels = 5;           // K
    double battery_quantum = 3e-3;    // joules per level
    double battery_capacity = 15e-3;  // must equal K * quantum
    int queue_cap = 6;                // Q, packets
    int max_modulation = 5;           // M
    std::vector<double> channel_gain; // ||h_i||^2 per node
    double discount = 0.95;           // omega
    double vi_tol = 1e-6;             // value-iteration accuracy target

    friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

/// Returns every violated invariant; an empty list means the parameters are
/// usable.
std::vector<std::string> validate(const NetworkParams& params);

/// Throws ValidationError carrying the full violation list when invalid.
void require_valid(const NetworkParams& params);

/// Number of Bernoulli arrival opportunities that fall inside one slot
/// (slot_len / arrival_period, which must be a positive integer).
int arrivals_per_slot(const NetworkParams& params);

/// Configuration used in the numerical evaluation: K=5, Q=6, M=5, L=256,
/// kappa1=0.2, kappa2=3, eps=0.05%, P_e=3 W, delta=0.4. Values the evaluation
/// leaves open (bandwidth, slot length, gains, lambda) take library defaults.
NetworkParams paper_defaults(std::size_t n_nodes = 10, double gain = 1.0);

struct NodeState {
    int battery = 0;  // level index, 0..K
    int queue = 0;    // packets, 0..Q

    friend bool operator==(const NodeState&, const NodeState&) = default;
};

using JointState = std::vector<NodeState>;

/// A scheduling decision: the node that transmits and harvests this slot and
/// the modulation order it uses.
struct Action {
    std::size_t node = 0;  // zero-based
    int modulation = 1;

    friend bool operator==(const Action&, const Action&) = default;
};

/// Number of per-node states, (K + 1)(Q + 1).
std::size_t node_state_count(const NetworkParams& params);

/// Size of the joint space ((K + 1)(Q + 1))^N, saturating at UINT64_MAX.
std::uint64_t joint_state_count(const NetworkParams& params);

std::size_t node_index(NodeState s, const NetworkParams& params);
NodeState node_unindex(std::size_t index, const NetworkParams& params);

/// Mixed-radix encoding with node 0 as the least significant digit.
std::uint64_t state_index(std::span<const NodeState> s, const NetworkParams& params);
JointState state_unindex(std::uint64_t index, const NetworkParams& params);

bool is_valid(NodeState s, const NetworkParams& params);

}  // namespace wpt
