#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "wptsched/params.hpp"

namespace wpt {

/// Modulation order chosen for a node together with the energy bookkeeping
/// of one collision-free scheduled slot at that order.
struct ModulationDecision {
    int order = 1;
    double net_energy_gain = 0.0;  // harvested minus transmit energy, joules
    double tx_duration = 0.0;      // L / (order * W), seconds
    double tx_energy = 0.0;        // joules spent on the uplink packet
};

/// WPT power received by `node`: delta * P_e * ||h||^2.
double transfer_power(const NetworkParams& params, std::size_t node);

/// Transmit power that meets the BER target at modulation order `rho`.
/// Throws ValidationError for rho outside {1, ..., M}.
double transmit_power(const NetworkParams& params, std::size_t node, int rho);

/// Net energy gained in one scheduled slot at order `rho`: WPT over the part
/// of the slot left after the uplink, minus the uplink energy. Can be
/// negative, and is not restricted to orders that fit in the slot.
double modulation_objective(const NetworkParams& params, std::size_t node, int rho);

/// Smallest order whose packet fits in one slot, or nullopt if none does.
std::optional<int> min_feasible_order(const NetworkParams& params);

/// Integer order maximizing modulation_objective over the feasible orders.
/// The continuous stationary point is located by bisection on the
/// first-order condition rho 2^rho ln2 - 2^rho = P^E / c - 1 (c the
/// per-unit transmit power), then the two neighbouring integers are compared;
/// ties go to the lower order. Returns nullopt when no order fits.
std::optional<ModulationDecision> optimal_modulation(const NetworkParams& params,
                                                     std::size_t node);

/// Continuous root of the first-order condition, clamped to [lo, hi].
double stationary_order(const NetworkParams& params, std::size_t node, double lo,
                        double hi, double tol = 1e-6);

/// floor(joules / quantum) as a signed level count.
int floor_levels(double joules, const NetworkParams& params);

/// ceil(joules / quantum) as a signed level count.
int ceil_levels(double joules, const NetworkParams& params);

/// Quantized net battery gain of a collision-free scheduled slot. May be
/// zero or negative. Throws InfeasibleError when no order fits.
int harvest_delta(const NetworkParams& params, std::size_t node);

/// (1 - eps)^L.
double packet_success_prob(const NetworkParams& params);

/// Everything the schedulers need about one node's energy budget, derived
/// once from the parameters.
struct EnergyProfile {
    ModulationDecision modulation;
    int harvest_delta = 0;      // levels gained in a transmit + WPT slot
    int idle_harvest = 0;       // levels gained when selected without transmitting
    int collision_loss = 0;     // levels burned by a collided transmission
    int min_tx_battery = 0;     // lowest level that covers tx_energy
};

/// Throws InfeasibleError when no order fits.
EnergyProfile energy_profile(const NetworkParams& params, std::size_t node);
std::vector<EnergyProfile> energy_profiles(const NetworkParams& params);

}  // namespace wpt
