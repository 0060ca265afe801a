#include "wptsched/energy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "wptsched/errors.hpp"

namespace wpt {

namespace {

// Level counts within this distance of an integer snap to it, so that
// round-off in e.g. 3 * quantum / quantum does not lose a level.
constexpr double kLevelSnap = 1e-9;

double gain_of(const NetworkParams& params, std::size_t node) {
    if (node >= params.channel_gain.size())
        throw ValidationError("node index " + std::to_string(node) + " has no channel gain");
    return params.channel_gain[node];
}

// Transmit power per unit of (2^rho - 1).
double unit_transmit_power(const NetworkParams& params, std::size_t node) {
    return std::log(params.kappa1 / params.ber_target) / params.kappa2 / gain_of(params, node);
}

double tx_duration(const NetworkParams& params, int rho) {
    return static_cast<double>(params.packet_bits) / (rho * params.bandwidth);
}

// Left-hand side of the first-order condition; increasing for rho > 0.
double first_order_lhs(double rho) {
    return std::exp2(rho) * (rho * std::numbers::ln2 - 1.0);
}

ModulationDecision decision_at(const NetworkParams& params, std::size_t node, int rho) {
    ModulationDecision d;
    d.order = rho;
    d.tx_duration = tx_duration(params, rho);
    d.tx_energy = d.tx_duration * transmit_power(params, node, rho);
    d.net_energy_gain = modulation_objective(params, node, rho);
    return d;
}

}  // namespace

double transfer_power(const NetworkParams& params, std::size_t node) {
    return params.transfer_efficiency * params.bs_power * gain_of(params, node);
}

double transmit_power(const NetworkParams& params, std::size_t node, int rho) {
    if (rho < 1 || rho > params.max_modulation)
        throw ValidationError("modulation order " + std::to_string(rho) + " outside [1, " +
                              std::to_string(params.max_modulation) + "]");
    return unit_transmit_power(params, node) * (std::exp2(rho) - 1.0);
}

double modulation_objective(const NetworkParams& params, std::size_t node, int rho) {
    const double uplink = tx_duration(params, rho);
    return (params.slot_len - uplink) * transfer_power(params, node) -
           uplink * transmit_power(params, node, rho);
}

std::optional<int> min_feasible_order(const NetworkParams& params) {
    for (int rho = 1; rho <= params.max_modulation; ++rho)
        if (tx_duration(params, rho) <= params.slot_len) return rho;
    return std::nullopt;
}

double stationary_order(const NetworkParams& params, std::size_t node, double lo, double hi,
                        double tol) {
    const double target = transfer_power(params, node) / unit_transmit_power(params, node) - 1.0;
    if (first_order_lhs(lo) >= target) return lo;
    if (first_order_lhs(hi) <= target) return hi;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (first_order_lhs(mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

std::optional<ModulationDecision> optimal_modulation(const NetworkParams& params,
                                                     std::size_t node) {
    const auto lowest = min_feasible_order(params);
    if (!lowest) return std::nullopt;
    const int lo = *lowest;
    const int hi = params.max_modulation;
    if (lo == hi) return decision_at(params, node, lo);

    // The objective is unimodal in rho, so the best integer neighbours the
    // continuous stationary point.
    const double root = stationary_order(params, node, lo, hi);
    const int below = std::clamp(static_cast<int>(std::floor(root)), lo, hi);
    const int above = std::clamp(static_cast<int>(std::ceil(root)), lo, hi);
    int best = below;
    if (above != below &&
        modulation_objective(params, node, above) > modulation_objective(params, node, below))
        best = above;
    return decision_at(params, node, best);
}

int floor_levels(double joules, const NetworkParams& params) {
    return static_cast<int>(std::floor(joules / params.battery_quantum + kLevelSnap));
}

int ceil_levels(double joules, const NetworkParams& params) {
    return static_cast<int>(std::ceil(joules / params.battery_quantum - kLevelSnap));
}

int harvest_delta(const NetworkParams& params, std::size_t node) {
    const auto decision = optimal_modulation(params, node);
    if (!decision)
        throw InfeasibleError("no modulation order fits a " + std::to_string(params.packet_bits) +
                              "-bit packet in one slot");
    return floor_levels(decision->net_energy_gain, params);
}

double packet_success_prob(const NetworkParams& params) {
    return std::pow(1.0 - params.ber_target, params.packet_bits);
}

EnergyProfile energy_profile(const NetworkParams& params, std::size_t node) {
    const auto decision = optimal_modulation(params, node);
    if (!decision)
        throw InfeasibleError("no modulation order fits a " + std::to_string(params.packet_bits) +
                              "-bit packet in one slot");
    EnergyProfile e;
    e.modulation = *decision;
    e.harvest_delta = floor_levels(decision->net_energy_gain, params);
    e.idle_harvest = floor_levels(
        (params.slot_len - decision->tx_duration) * transfer_power(params, node), params);
    e.collision_loss = ceil_levels(decision->tx_energy, params);
    e.min_tx_battery = e.collision_loss;
    return e;
}

std::vector<EnergyProfile> energy_profiles(const NetworkParams& params) {
    std::vector<EnergyProfile> out;
    out.reserve(params.n_nodes);
    for (std::size_t n = 0; n < params.n_nodes; ++n) out.push_back(energy_profile(params, n));
    return out;
}

}  // namespace wpt
