#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wptsched/energy.hpp"
#include "wptsched/eqat.hpp"
#include "wptsched/mdp.hpp"
#include "wptsched/params.hpp"
#include "wptsched/random.hpp"

namespace wpt {

/// Static log-distance path loss: gain(d) = ref_gain (ref_distance / d)^exponent
/// with d uniform in [min_distance, max_distance]. Optional per-slot Rayleigh
/// fading multiplies each gain by an Exp(1) draw.
struct ChannelModel {
    double ref_gain = 0.6;
    double ref_distance = 50.0;
    double path_loss_exp = 2.0;
    double min_distance = 30.0;
    double max_distance = 50.0;
    bool fading = false;

    friend bool operator==(const ChannelModel&, const ChannelModel&) = default;
};

/// Everything a run needs besides the strategy and the seed. When
/// `network.channel_gain` is empty the gains are drawn per seed from
/// `channel`.
struct Scenario {
    NetworkParams network;
    ChannelModel channel;
    EqatConfig eqat;
    double p_rc = 0.2;        // random-contention transmit probability
    int initial_battery = -1; // level at slot 0; negative means full (K)
    int initial_queue = 0;

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

void require_valid(const Scenario& scenario);

/// Per-seed gains from the path-loss model.
std::vector<double> draw_gains(const ChannelModel& channel, std::size_t n_nodes,
                               std::uint64_t seed);

/// Network parameters with concrete gains for this seed.
NetworkParams resolve(const Scenario& scenario, std::uint64_t seed);

enum class StrategyKind { ehmdp_exact, ehmdp_approx, fq, rs, eqat, dfq, rc };

std::string_view to_string(StrategyKind kind);
/// Accepts ehmdp-exact, ehmdp-approx, fq, rs, eqat, dfq (or d-fq), rc.
StrategyKind parse_strategy(std::string_view name);
bool is_centralized(StrategyKind kind);

/// A solved exact policy and the parameters it was solved for.
struct ExactPolicy {
    NetworkParams params;
    Policy actions;
};

/// Solves the MDP for `params`; throws BudgetError above `state_budget`.
std::shared_ptr<const ExactPolicy> solve_exact_policy(const NetworkParams& params,
                                                      std::uint64_t state_budget);

struct Strategy {
    StrategyKind kind = StrategyKind::fq;
    /// Required for ehmdp_exact when driving a Simulator directly.
    std::shared_ptr<const ExactPolicy> policy;
    /// Overrides scenario.eqat.design for eqat runs.
    std::optional<TxProbDesign> design;
};

enum class SlotOutcome { success, ber_fail, collision, idle };
std::string_view to_string(SlotOutcome outcome);

struct SlotTrace {
    std::uint64_t slot = 0;
    JointState nodes;                      // state at the start of the slot
    std::vector<std::size_t> transmitters; // nodes that put energy on the air
    SlotOutcome outcome = SlotOutcome::idle;
    std::optional<std::size_t> recipient;  // node that received WPT
    int energy_levels = 0;                 // battery change of the recipient before clamping
};

struct RunMetrics {
    std::uint64_t slots = 0;
    std::uint64_t generated = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped_overflow = 0;
    std::uint64_t dropped_collision_retries_exhausted = 0;
    std::uint64_t in_queue_final = 0;
    std::uint64_t collisions = 0;
    std::uint64_t ber_failures = 0;
    std::uint64_t initial_backlog = 0;  // packets queued when counting started

    double throughput() const { return static_cast<double>(delivered); }
    double throughput_pps() const;
    double loss_rate() const;
    std::uint64_t dropped() const { return dropped_overflow + dropped_collision_retries_exhausted; }

    friend bool operator==(const RunMetrics&, const RunMetrics&) = default;
};

/// Slotted engine for one (scenario, strategy, seed). Arrivals and BER draws
/// use per-node streams so they do not depend on the strategy; scheduling
/// randomness has its own stream.
class Simulator {
public:
    Simulator(const Scenario& scenario, Strategy strategy, std::uint64_t seed);

    /// Advances one slot: scheduling, uplink outcome and WPT, arrivals, then
    /// controller updates.
    SlotTrace step();

    std::span<const NodeState> state() const noexcept { return nodes_; }
    const NetworkParams& params() const noexcept { return params_; }
    std::span<const EqatNodeCtl> controllers() const noexcept { return ctl_; }

    /// Metrics with in_queue_final filled from the current queues.
    RunMetrics metrics() const;

    /// Replaces the current state and restarts the metric counters from it.
    void set_state(JointState nodes);

private:
    std::vector<std::size_t> contenders();
    void refresh_beacon();
    const std::vector<EnergyProfile>& slot_energy();

    Scenario scenario_;
    Strategy strategy_;
    NetworkParams params_;
    std::vector<EnergyProfile> energy_;
    std::vector<EnergyProfile> faded_energy_;
    NetworkParams faded_params_;
    JointState nodes_;
    std::vector<EqatNodeCtl> ctl_;
    std::vector<int> dfq_backoff_;
    std::vector<double> beacon_;
    std::optional<EhmdpScheduler> ehmdp_;
    std::vector<std::mt19937_64> arrival_rng_;
    std::vector<std::mt19937_64> ber_rng_;
    std::mt19937_64 sched_rng_;
    std::mt19937_64 fading_rng_;
    double success_prob_ = 1.0;
    int arrivals_per_slot_ = 1;
    std::uint64_t slot_ = 0;
    RunMetrics metrics_;
};

struct MetricSummary {
    double mean = 0.0;
    double std_error = 0.0;
};

struct AggregateMetrics {
    std::vector<RunMetrics> runs;  // one per seed, in seed order
    MetricSummary delivered;
    MetricSummary throughput_pps;
    MetricSummary loss_rate;
    MetricSummary generated;
    MetricSummary dropped;
};

MetricSummary summarize(std::span<const double> values);
AggregateMetrics aggregate(std::vector<RunMetrics> runs);

using TraceSink = std::function<void(const SlotTrace&)>;

/// Runs `slots` slots for one seed. For ehmdp_exact without a supplied
/// policy the MDP is solved for this seed's parameters within
/// `state_budget`.
RunMetrics run_once(const Scenario& scenario, const Strategy& strategy, std::uint64_t seed,
                    std::uint64_t slots, std::uint64_t state_budget = kDefaultStateBudget,
                    const TraceSink& trace = {});

/// Runs every seed and aggregates mean and standard error.
AggregateMetrics run(const Scenario& scenario, const Strategy& strategy,
                     std::span<const std::uint64_t> seeds, std::uint64_t slots,
                     std::uint64_t state_budget = kDefaultStateBudget);

}  // namespace wpt
