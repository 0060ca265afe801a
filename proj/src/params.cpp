#include "wptsched/params.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "wptsched/errors.hpp"

namespace wpt {

namespace {

std::string join_lines(const std::vector<std::string>& items) {
    std::ostringstream out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out << "; ";
        out << items[i];
    }
    return out.str();
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> violations)
    : Error(join_lines(violations)), violations_(std::move(violations)) {}

std::vector<std::string> validate(const NetworkParams& p) {
    std::vector<std::string> v;
    auto check = [&v](bool ok, const char* msg) {
        if (!ok) v.emplace_back(msg);
    };

    check(p.n_nodes >= 1, "n_nodes must be at least 1");
    check(p.packet_bits >= 1, "packet_bits must be at least 1");
    check(p.ber_target > 0.0 && p.ber_target < 1.0, "ber_target must lie in (0, 1)");
    check(p.kappa1 > p.ber_target, "ln(kappa1/ber_target) must be positive (kappa1 > ber_target)");
    check(p.kappa2 > 0.0, "kappa2 must be positive");
    check(p.bs_power >= 0.0, "bs_power must be non-negative");
    check(p.transfer_efficiency >= 0.0 && p.transfer_efficiency <= 1.0,
          "transfer_efficiency must lie in [0, 1]");
    check(p.bandwidth > 0.0, "bandwidth must be positive");
    check(p.slot_len > 0.0, "slot_len must be positive");
    check(p.arrival_prob >= 0.0 && p.arrival_prob <= 1.0, "arrival_prob must lie in [0, 1]");
    check(p.battery_levels >= 1, "battery_levels must be at least 1");
    check(p.battery_quantum > 0.0, "battery_quantum must be positive");
    check(std::abs(p.battery_capacity - p.battery_levels * p.battery_quantum) <=
              1e-12 * std::max(1.0, std::abs(p.battery_capacity)),
          "battery_capacity must equal battery_levels * battery_quantum");
    check(p.queue_cap >= 1, "queue_cap must be at least 1");
    check(p.max_modulation >= 1, "max_modulation must be at least 1");
    check(p.channel_gain.size() == p.n_nodes, "channel_gain must list one gain per node");
    bool gains_positive = true;
    for (double g : p.channel_gain) gains_positive = gains_positive && g > 0.0 && std::isfinite(g);
    check(gains_positive, "every channel gain must be positive and finite");
    check(p.discount >= 0.0 && p.discount < 1.0, "discount must lie in [0, 1)");
    check(p.vi_tol > 0.0, "vi_tol must be positive");
    check(p.slot_len * p.bandwidth * p.max_modulation >= p.packet_bits,
          "a packet must fit in one slot at the highest modulation order");

    if (p.arrival_period > 0.0 && p.slot_len > 0.0) {
        const double ratio = p.slot_len / p.arrival_period;
        check(std::round(ratio) >= 1.0 && std::abs(ratio - std::round(ratio)) <= 1e-9 * ratio,
              "slot_len / arrival_period must be a positive integer");
    } else {
        check(false, "arrival_period must be positive");
    }
    return v;
}

void require_valid(const NetworkParams& params) {
    auto violations = validate(params);
    if (!violations.empty()) throw ValidationError(std::move(violations));
}

int arrivals_per_slot(const NetworkParams& params) {
    return static_cast<int>(std::lround(params.slot_len / params.arrival_period));
}

NetworkParams paper_defaults(std::size_t n_nodes, double gain) {
    NetworkParams p;
    p.n_nodes = n_nodes;
    p.channel_gain.assign(n_nodes, gain);
    return p;
}

std::size_t node_state_count(const NetworkParams& params) {
    return static_cast<std::size_t>(params.battery_levels + 1) *
           static_cast<std::size_t>(params.queue_cap + 1);
}

std::uint64_t joint_state_count(const NetworkParams& params) {
    const std::uint64_t radix = node_state_count(params);
    std::uint64_t count = 1;
    for (std::size_t n = 0; n < params.n_nodes; ++n) {
        if (count > std::numeric_limits<std::uint64_t>::max() / radix)
            return std::numeric_limits<std::uint64_t>::max();
        count *= radix;
    }
    return count;
}

bool is_valid(NodeState s, const NetworkParams& params) {
    return s.battery >= 0 && s.battery <= params.battery_levels && s.queue >= 0 &&
           s.queue <= params.queue_cap;
}

std::size_t node_index(NodeState s, const NetworkParams& params) {
    if (!is_valid(s, params))
        throw ValidationError("node state (" + std::to_string(s.battery) + ", " +
                              std::to_string(s.queue) + ") out of range");
    return static_cast<std::size_t>(s.battery) * static_cast<std::size_t>(params.queue_cap + 1) +
           static_cast<std::size_t>(s.queue);
}

NodeState node_unindex(std::size_t index, const NetworkParams& params) {
    const auto stride = static_cast<std::size_t>(params.queue_cap + 1);
    if (index >= node_state_count(params))
        throw ValidationError("node state index " + std::to_string(index) + " out of range");
    return {static_cast<int>(index / stride), static_cast<int>(index % stride)};
}

std::uint64_t state_index(std::span<const NodeState> s, const NetworkParams& params) {
    if (s.size() != params.n_nodes)
        throw ValidationError("joint state has " + std::to_string(s.size()) + " nodes, expected " +
                              std::to_string(params.n_nodes));
    if (joint_state_count(params) == std::numeric_limits<std::uint64_t>::max())
        throw ValidationError("joint state space too large to index");
    const std::uint64_t radix = node_state_count(params);
    std::uint64_t index = 0;
    for (std::size_t n = s.size(); n-- > 0;) index = index * radix + node_index(s[n], params);
    return index;
}

JointState state_unindex(std::uint64_t index, const NetworkParams& params) {
    const std::uint64_t total = joint_state_count(params);
    if (total == std::numeric_limits<std::uint64_t>::max() || index >= total)
        throw ValidationError("joint state index " + std::to_string(index) + " out of range");
    const std::uint64_t radix = node_state_count(params);
    JointState s(params.n_nodes);
    for (std::size_t n = 0; n < params.n_nodes; ++n) {
        s[n] = node_unindex(static_cast<std::size_t>(index % radix), params);
        index /= radix;
    }
    return s;
}

}  // namespace wpt
