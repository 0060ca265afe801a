#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "wptsched/energy.hpp"
#include "wptsched/params.hpp"

namespace wpt {

/// One outcome of a single node's slot. `drop_mass` is the probability-
/// weighted number of packets dropped on this outcome, so summing it over a
/// distribution gives the node's expected overflow.
struct NodeOutcome {
    NodeState next;
    double prob = 0.0;
    double drop_mass = 0.0;
};

using NodeDistribution = std::vector<NodeOutcome>;

/// Binomial(arrivals_per_slot, lambda) pmf over the number of arrivals.
std::vector<double> arrival_pmf(const NetworkParams& params);

/// Selected node. With a backlog and enough charge the node sends its
/// head-of-line packet (success (1-eps)^L) and gains harvest_delta levels;
/// otherwise it only harvests (idle_harvest levels). Arrivals follow the
/// transmission; arrivals that meet a full queue are dropped. Battery is
/// clamped to [0, K].
NodeDistribution selected_transition(NodeState s, const EnergyProfile& energy,
                                     const NetworkParams& params);

/// Unselected node: arrivals only, battery unchanged.
NodeDistribution unselected_transition(NodeState s, const NetworkParams& params);

struct JointOutcome {
    std::uint64_t next = 0;
    double prob = 0.0;
    double reward = 0.0;  // expected dropped packets given this next state
};

/// Product of the selected node's distribution and every other node's.
std::vector<JointOutcome> joint_transition(std::span<const NodeState> s, std::size_t selected,
                                           std::span<const EnergyProfile> energy,
                                           const NetworkParams& params);

/// Expected overflow of node `n` in state `s` under action `selected`.
double node_overflow(std::span<const NodeState> s, std::size_t n, std::size_t selected,
                     std::span<const EnergyProfile> energy, const NetworkParams& params);

/// Overflow cost attributed to the transition s -> next under `selected`:
/// each node whose queue stays pinned at Q contributes its expected overflow
/// ((1 - (1-eps)^L) lambda for the selected node, lambda otherwise, with one
/// arrival opportunity per slot).
double transition_reward(std::span<const NodeState> s, std::span<const NodeState> next,
                         std::size_t selected, std::span<const EnergyProfile> energy,
                         const NetworkParams& params);

/// Expected dropped packets in one slot from `s` under `selected`.
double expected_cost(std::span<const NodeState> s, std::size_t selected,
                     std::span<const EnergyProfile> energy, const NetworkParams& params);

/// Sparse transition model over the enumerated joint space. Row r = state *
/// n_actions + action.
class TransitionModel {
public:
    std::uint64_t n_states() const noexcept { return n_states_; }
    std::size_t n_actions() const noexcept { return n_actions_; }
    std::size_t row(std::uint64_t state, std::size_t action) const noexcept {
        return static_cast<std::size_t>(state) * n_actions_ + action;
    }
    std::span<const std::uint32_t> next(std::size_t row) const;
    std::span<const double> prob(std::size_t row) const;
    std::span<const double> reward(std::size_t row) const;
    double cost(std::size_t row) const noexcept { return cost_[row]; }
    std::size_t n_entries() const noexcept { return next_.size(); }
    std::span<const EnergyProfile> energy() const noexcept { return energy_; }

    /// Writes `state,action,next,prob,reward` rows.
    void write_csv(std::ostream& out) const;

private:
    friend TransitionModel build_model(const NetworkParams&, std::uint64_t);

    std::uint64_t n_states_ = 0;
    std::size_t n_actions_ = 0;
    std::vector<std::size_t> offsets_;
    std::vector<std::uint32_t> next_;
    std::vector<double> prob_;
    std::vector<double> reward_;
    std::vector<double> cost_;
    std::vector<EnergyProfile> energy_;
};

inline constexpr std::uint64_t kDefaultStateBudget = 100'000;

/// Enumerates the joint space and fills every (state, action) row. Throws
/// BudgetError when the space exceeds `state_budget`, InfeasibleError when a
/// node has no feasible modulation.
TransitionModel build_model(const NetworkParams& params,
                            std::uint64_t state_budget = kDefaultStateBudget);

using ValueFunction = std::vector<double>;
using Policy = std::vector<Action>;

struct Solution {
    ValueFunction value;
    Policy policy;
    std::size_t sweeps = 0;
    std::vector<double> residuals;  // sup-norm change of each sweep
};

struct SolverOptions {
    std::size_t max_sweeps = 100'000;
    /// Q-values within this relative distance of the minimum count as ties;
    /// ties go to the lowest node index.
    double tie_tolerance = 1e-9;
};

/// Synchronous value iteration from v = 0, stopping once the sweep change
/// falls below vi_tol (1 - omega) / (2 omega). Throws ConvergenceError when
/// the sweep cap is hit.
Solution value_iteration(const TransitionModel& model, const NetworkParams& params,
                         const SolverOptions& options = {});

/// Index of the minimum with ties (relative `tol`) going to the lowest index.
std::size_t argmin_lowest(std::span<const double> values, double tol);

/// Per-node index heuristic for networks too large to solve exactly. Each
/// node's value is evaluated in isolation, assuming it is served in a
/// uniformly random 1/N share of slots; the chooser picks the node whose
/// service most reduces its one-step overflow plus discounted continuation.
class ApproxIndexPolicy {
public:
    explicit ApproxIndexPolicy(const NetworkParams& params);
    ApproxIndexPolicy(const NetworkParams& params, std::span<const EnergyProfile> energy);

    /// Service benefit of node n in state s; more negative is more urgent.
    double index(std::size_t n, NodeState s) const;
    std::size_t choose(std::span<const NodeState> s) const;

private:
    std::size_t stride_ = 0;
    std::vector<std::vector<double>> index_;  // per node, by node_index
    NetworkParams params_;
};

/// Per-slot chooser backed either by an exact policy table or by the index
/// heuristic.
class EhmdpScheduler {
public:
    EhmdpScheduler(std::vector<Action> policy, NetworkParams params);
    explicit EhmdpScheduler(ApproxIndexPolicy approx, std::vector<int> modulation);

    bool exact() const noexcept { return !policy_.empty(); }
    Action choose(std::span<const NodeState> s) const;

private:
    std::vector<Action> policy_;
    NetworkParams params_;
    std::optional<ApproxIndexPolicy> approx_;
    std::vector<int> modulation_;
};

}  // namespace wpt
