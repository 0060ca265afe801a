#include "wptsched/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "wptsched/errors.hpp"

namespace wpt {

namespace {

enum Stream : std::uint64_t { arrivals = 1, ber = 2, scheduler = 3, fading = 4, gains = 5 };

std::uint64_t backlog(std::span<const NodeState> nodes) {
    std::uint64_t total = 0;
    for (const auto& s : nodes) total += static_cast<std::uint64_t>(s.queue);
    return total;
}

}  // namespace

void require_valid(const Scenario& scenario) {
    std::vector<std::string> problems;
    NetworkParams network = scenario.network;
    if (network.channel_gain.empty()) network.channel_gain.assign(network.n_nodes, 1.0);
    problems = validate(network);
    const auto& c = scenario.channel;
    auto check = [&](bool ok, const char* message) {
        if (!ok) problems.emplace_back(message);
    };
    check(c.ref_gain > 0.0, "channel ref_gain must be positive");
    check(c.ref_distance > 0.0, "channel ref_distance must be positive");
    check(c.min_distance > 0.0 && c.min_distance <= c.max_distance,
          "channel distances must satisfy 0 < min_distance <= max_distance");
    check(c.path_loss_exp >= 0.0, "channel path_loss_exp must be non-negative");
    check(scenario.p_rc > 0.0 && scenario.p_rc <= 1.0, "p_rc must lie in (0, 1]");
    check(scenario.initial_battery <= scenario.network.battery_levels,
          "initial_battery must not exceed battery_levels");
    check(scenario.initial_queue >= 0 && scenario.initial_queue <= scenario.network.queue_cap,
          "initial_queue must lie in [0, queue_cap]");
    try {
        require_valid(scenario.eqat);
    } catch (const ValidationError& e) {
        problems.emplace_back(e.what());
    }
    if (!problems.empty()) throw ValidationError(std::move(problems));
}

std::vector<double> draw_gains(const ChannelModel& channel, std::size_t n_nodes,
                               std::uint64_t seed) {
    auto rng = make_stream(seed, 0, Stream::gains);
    std::vector<double> out(n_nodes);
    for (auto& g : out) {
        const double d =
            channel.min_distance + (channel.max_distance - channel.min_distance) * uniform01(rng);
        g = channel.ref_gain * std::pow(channel.ref_distance / d, channel.path_loss_exp);
    }
    return out;
}

NetworkParams resolve(const Scenario& scenario, std::uint64_t seed) {
    NetworkParams params = scenario.network;
    if (params.channel_gain.empty())
        params.channel_gain = draw_gains(scenario.channel, params.n_nodes, seed);
    require_valid(params);
    return params;
}

std::string_view to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::ehmdp_exact: return "ehmdp-exact";
        case StrategyKind::ehmdp_approx: return "ehmdp-approx";
        case StrategyKind::fq: return "fq";
        case StrategyKind::rs: return "rs";
        case StrategyKind::eqat: return "eqat";
        case StrategyKind::dfq: return "dfq";
        case StrategyKind::rc: return "rc";
    }
    return "?";
}

StrategyKind parse_strategy(std::string_view name) {
    if (name == "ehmdp-exact") return StrategyKind::ehmdp_exact;
    if (name == "ehmdp-approx") return StrategyKind::ehmdp_approx;
    if (name == "fq") return StrategyKind::fq;
    if (name == "rs") return StrategyKind::rs;
    if (name == "eqat" || name == "e-qat") return StrategyKind::eqat;
    if (name == "dfq" || name == "d-fq") return StrategyKind::dfq;
    if (name == "rc") return StrategyKind::rc;
    throw ValidationError("unknown strategy '" + std::string(name) +
                          "' (expected ehmdp-exact, ehmdp-approx, fq, rs, eqat, dfq or rc)");
}

bool is_centralized(StrategyKind kind) {
    return kind == StrategyKind::ehmdp_exact || kind == StrategyKind::ehmdp_approx ||
           kind == StrategyKind::fq || kind == StrategyKind::rs;
}

std::string_view to_string(SlotOutcome outcome) {
    switch (outcome) {
        case SlotOutcome::success: return "success";
        case SlotOutcome::ber_fail: return "ber_fail";
        case SlotOutcome::collision: return "collision";
        case SlotOutcome::idle: return "idle";
    }
    return "?";
}

std::shared_ptr<const ExactPolicy> solve_exact_policy(const NetworkParams& params,
                                                      std::uint64_t state_budget) {
    const auto model = build_model(params, state_budget);
    auto solution = value_iteration(model, params);
    return std::make_shared<const ExactPolicy>(ExactPolicy{params, std::move(solution.policy)});
}

double RunMetrics::throughput_pps() const {
    return slots ? static_cast<double>(delivered) / static_cast<double>(slots) : 0.0;
}

double RunMetrics::loss_rate() const {
    const std::uint64_t offered = generated + initial_backlog;
    return offered ? static_cast<double>(dropped()) / static_cast<double>(offered) : 0.0;
}

Simulator::Simulator(const Scenario& scenario, Strategy strategy, std::uint64_t seed)
    : scenario_(scenario), strategy_(std::move(strategy)) {
    require_valid(scenario_);
    if (strategy_.design) {
        require_valid(*strategy_.design);
        scenario_.eqat.design = *strategy_.design;
    }
    params_ = resolve(scenario_, seed);
    energy_ = energy_profiles(params_);
    faded_params_ = params_;
    success_prob_ = packet_success_prob(params_);
    arrivals_per_slot_ = arrivals_per_slot(params_);

    const std::size_t n = params_.n_nodes;
    const int battery =
        scenario_.initial_battery < 0 ? params_.battery_levels : scenario_.initial_battery;
    nodes_.assign(n, NodeState{battery, scenario_.initial_queue});
    ctl_.assign(n, EqatNodeCtl{});
    dfq_backoff_.assign(n, 0);
    beacon_.assign(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        arrival_rng_.push_back(make_stream(seed, k, Stream::arrivals));
        ber_rng_.push_back(make_stream(seed, k, Stream::ber));
    }
    sched_rng_ = make_stream(seed, 0, Stream::scheduler);
    fading_rng_ = make_stream(seed, 0, Stream::fading);

    if (strategy_.kind == StrategyKind::ehmdp_exact) {
        if (!strategy_.policy)
            throw ValidationError("ehmdp-exact needs a solved policy");
        if (!(strategy_.policy->params == params_))
            throw ValidationError("the exact policy was solved for different parameters");
        ehmdp_.emplace(strategy_.policy->actions, params_);
    } else if (strategy_.kind == StrategyKind::ehmdp_approx) {
        std::vector<int> modulation;
        for (const auto& e : energy_) modulation.push_back(e.modulation.order);
        ehmdp_.emplace(ApproxIndexPolicy(params_, energy_), std::move(modulation));
    }

    metrics_.initial_backlog = backlog(nodes_);
    for (std::size_t k = 0; k < n; ++k) eqat_refresh(ctl_[k], nodes_[k], scenario_.eqat, params_);
    refresh_beacon();
}

void Simulator::set_state(JointState nodes) {
    if (nodes.size() != params_.n_nodes)
        throw ValidationError("state has " + std::to_string(nodes.size()) + " nodes, expected " +
                              std::to_string(params_.n_nodes));
    for (const auto& s : nodes)
        if (!is_valid(s, params_)) throw ValidationError("node state out of range");
    nodes_ = std::move(nodes);
    metrics_ = RunMetrics{};
    metrics_.initial_backlog = backlog(nodes_);
    for (std::size_t k = 0; k < nodes_.size(); ++k)
        eqat_refresh(ctl_[k], nodes_[k], scenario_.eqat, params_);
    refresh_beacon();
}

RunMetrics Simulator::metrics() const {
    RunMetrics m = metrics_;
    m.in_queue_final = backlog(nodes_);
    return m;
}

void Simulator::refresh_beacon() {
    for (std::size_t k = 0; k < ctl_.size(); ++k)
        beacon_[k] = ctl_[k].backoff > 0 || ctl_[k].holding ? 0.0 : ctl_[k].base_p;
}

const std::vector<EnergyProfile>& Simulator::slot_energy() {
    if (!scenario_.channel.fading) return energy_;
    for (std::size_t k = 0; k < params_.n_nodes; ++k) {
        const double u = uniform01(fading_rng_);
        faded_params_.channel_gain[k] =
            params_.channel_gain[k] * std::max(-std::log1p(-u), 1e-12);
    }
    faded_energy_ = energy_profiles(faded_params_);
    return faded_energy_;
}

std::vector<std::size_t> Simulator::contenders() {
    std::vector<std::size_t> out;
    const std::size_t n = params_.n_nodes;
    switch (strategy_.kind) {
        case StrategyKind::ehmdp_exact:
        case StrategyKind::ehmdp_approx:
            out.push_back(ehmdp_->choose(nodes_).node);
            break;
        case StrategyKind::fq: {
            std::size_t best = 0;
            for (std::size_t k = 1; k < n; ++k)
                if (nodes_[k].queue > nodes_[best].queue) best = k;
            out.push_back(best);
            break;
        }
        case StrategyKind::rs: {
            std::vector<std::size_t> backlogged;
            for (std::size_t k = 0; k < n; ++k)
                if (nodes_[k].queue > 0) backlogged.push_back(k);
            if (backlogged.empty())
                out.push_back(uniform_index(sched_rng_, n));
            else
                out.push_back(backlogged[uniform_index(sched_rng_, backlogged.size())]);
            break;
        }
        case StrategyKind::eqat:
            for (std::size_t k = 0; k < n; ++k) {
                const bool sampled =
                    uniform01(sched_rng_) < ctl_[k].effective_p(scenario_.eqat.alpha);
                const auto d = eqat_decide(ctl_[k], k, beacon_, sampled, scenario_.eqat,
                                           energy_[k], params_);
                if (d.action == EqatAction::transmit) out.push_back(k);
            }
            break;
        case StrategyKind::dfq:
            for (std::size_t k = 0; k < n; ++k) {
                if (dfq_backoff_[k] > 0) {
                    --dfq_backoff_[k];
                    continue;
                }
                if (nodes_[k].queue == params_.queue_cap) out.push_back(k);
            }
            break;
        case StrategyKind::rc:
            for (std::size_t k = 0; k < n; ++k) {
                const bool draw = uniform01(sched_rng_) < scenario_.p_rc;
                if (nodes_[k].queue > 0 && draw) out.push_back(k);
            }
            break;
    }
    return out;
}

SlotTrace Simulator::step() {
    SlotTrace trace;
    trace.slot = slot_;
    trace.nodes = nodes_;
    const auto& energy = slot_energy();
    const int cap_e = params_.battery_levels;
    auto clamp_battery = [&](int level) { return std::clamp(level, 0, cap_e); };

    auto picked = contenders();
    trace.transmitters = picked;
    if (picked.size() == 1) {
        const std::size_t k = picked.front();
        auto& s = nodes_[k];
        const auto& e = energy[k];
        trace.recipient = k;
        if (s.queue >= 1 && s.battery >= e.min_tx_battery) {
            if (uniform01(ber_rng_[k]) < success_prob_) {
                --s.queue;
                ++metrics_.delivered;
                trace.outcome = SlotOutcome::success;
            } else {
                ++metrics_.ber_failures;
                trace.outcome = SlotOutcome::ber_fail;
            }
            trace.energy_levels = e.harvest_delta;
        } else {
            // Harvest-only slot: nothing to send or too little charge to send it.
            trace.transmitters.clear();
            trace.outcome = SlotOutcome::idle;
            trace.energy_levels = e.idle_harvest;
        }
        s.battery = clamp_battery(s.battery + trace.energy_levels);
        if (strategy_.kind == StrategyKind::eqat) eqat_on_delivery(ctl_[k]);
    } else if (picked.size() > 1) {
        ++metrics_.collisions;
        trace.outcome = SlotOutcome::collision;
        for (const std::size_t k : picked) {
            auto& s = nodes_[k];
            if (s.battery >= energy[k].min_tx_battery)
                s.battery = clamp_battery(s.battery - energy[k].collision_loss);
            if (strategy_.kind == StrategyKind::eqat)
                eqat_on_collision(ctl_[k], scenario_.eqat, sched_rng_);
            else if (strategy_.kind == StrategyKind::dfq)
                dfq_backoff_[k] = 1 + static_cast<int>(uniform_index(
                                          sched_rng_, static_cast<std::size_t>(
                                                          scenario_.eqat.backoff_window)));
        }
    }

    for (std::size_t k = 0; k < nodes_.size(); ++k) {
        int arrived = 0;
        for (int i = 0; i < arrivals_per_slot_; ++i)
            if (uniform01(arrival_rng_[k]) < params_.arrival_prob) ++arrived;
        metrics_.generated += static_cast<std::uint64_t>(arrived);
        const int total = nodes_[k].queue + arrived;
        if (total > params_.queue_cap) {
            metrics_.dropped_overflow += static_cast<std::uint64_t>(total - params_.queue_cap);
            nodes_[k].queue = params_.queue_cap;
        } else {
            nodes_[k].queue = total;
        }
    }

    if (strategy_.kind == StrategyKind::eqat) {
        for (std::size_t k = 0; k < nodes_.size(); ++k)
            eqat_refresh(ctl_[k], nodes_[k], scenario_.eqat, params_);
        refresh_beacon();
    }
    ++slot_;
    ++metrics_.slots;
    return trace;
}

MetricSummary summarize(std::span<const double> values) {
    MetricSummary out;
    if (values.empty()) return out;
    const double n = static_cast<double>(values.size());
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() < 2) return out;
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std_error = std::sqrt(ss / (n - 1.0) / n);
    return out;
}

AggregateMetrics aggregate(std::vector<RunMetrics> runs) {
    AggregateMetrics out;
    auto column = [&](auto get) {
        std::vector<double> v;
        v.reserve(runs.size());
        for (const auto& r : runs) v.push_back(get(r));
        return summarize(v);
    };
    out.delivered = column([](const RunMetrics& r) { return static_cast<double>(r.delivered); });
    out.throughput_pps = column([](const RunMetrics& r) { return r.throughput_pps(); });
    out.loss_rate = column([](const RunMetrics& r) { return r.loss_rate(); });
    out.generated = column([](const RunMetrics& r) { return static_cast<double>(r.generated); });
    out.dropped = column([](const RunMetrics& r) { return static_cast<double>(r.dropped()); });
    out.runs = std::move(runs);
    return out;
}

RunMetrics run_once(const Scenario& scenario, const Strategy& strategy, std::uint64_t seed,
                    std::uint64_t slots, std::uint64_t state_budget, const TraceSink& trace) {
    Strategy s = strategy;
    if (s.kind == StrategyKind::ehmdp_exact && !s.policy)
        s.policy = solve_exact_policy(resolve(scenario, seed), state_budget);
    Simulator sim(scenario, std::move(s), seed);
    for (std::uint64_t t = 0; t < slots; ++t) {
        auto record = sim.step();
        if (trace) trace(record);
    }
    return sim.metrics();
}

AggregateMetrics run(const Scenario& scenario, const Strategy& strategy,
                     std::span<const std::uint64_t> seeds, std::uint64_t slots,
                     std::uint64_t state_budget) {
    std::vector<RunMetrics> runs;
    runs.reserve(seeds.size());
    for (const auto seed : seeds)
        runs.push_back(run_once(scenario, strategy, seed, slots, state_budget));
    return aggregate(std::move(runs));
}

}  // namespace wpt
