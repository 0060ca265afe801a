#include "wptsched/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "parallel.hpp"
#include "wptsched/errors.hpp"

namespace wpt {

namespace {

void add_outcome(NodeDistribution& dist, NodeState next, double prob, double drops) {
    if (prob <= 0.0) return;
    for (auto& o : dist) {
        if (o.next == next) {
            o.prob += prob;
            o.drop_mass += prob * drops;
            return;
        }
    }
    dist.push_back({next, prob, prob * drops});
}

// Queue after `departures` then `arrivals`, folding overflow into drops.
void spread_arrivals(NodeDistribution& dist, NodeState s, int battery_next, int departures,
                     double mass, std::span<const double> pmf, int queue_cap) {
    for (std::size_t a = 0; a < pmf.size(); ++a) {
        const int raw = s.queue - departures + static_cast<int>(a);
        const int drops = std::max(0, raw - queue_cap);
        add_outcome(dist, {battery_next, std::min(raw, queue_cap)}, mass * pmf[a], drops);
    }
}

int clamp_battery(int level, const NetworkParams& params) {
    return std::clamp(level, 0, params.battery_levels);
}

double drop_total(const NodeDistribution& dist) {
    double total = 0.0;
    for (const auto& o : dist) total += o.drop_mass;
    return total;
}

NodeDistribution node_distribution(std::span<const NodeState> s, std::size_t n,
                                   std::size_t selected, std::span<const EnergyProfile> energy,
                                   const NetworkParams& params) {
    return n == selected ? selected_transition(s[n], energy[n], params)
                         : unselected_transition(s[n], params);
}

}  // namespace

std::vector<double> arrival_pmf(const NetworkParams& params) {
    const int m = arrivals_per_slot(params);
    const double lambda = params.arrival_prob;
    std::vector<double> pmf(static_cast<std::size_t>(m) + 1);
    for (int a = 0; a <= m; ++a) {
        const double choose = std::exp(std::lgamma(m + 1.0) - std::lgamma(a + 1.0) -
                                       std::lgamma(m - a + 1.0));
        pmf[static_cast<std::size_t>(a)] =
            std::round(choose) * std::pow(lambda, a) * std::pow(1.0 - lambda, m - a);
    }
    return pmf;
}

NodeDistribution selected_transition(NodeState s, const EnergyProfile& energy,
                                     const NetworkParams& params) {
    const auto pmf = arrival_pmf(params);
    NodeDistribution dist;
    const bool transmits = s.queue >= 1 && s.battery >= energy.min_tx_battery;
    if (!transmits) {
        // Nothing to send, or not enough charge: the slot is pure WPT.
        const int battery = clamp_battery(s.battery + energy.idle_harvest, params);
        spread_arrivals(dist, s, battery, 0, 1.0, pmf, params.queue_cap);
        return dist;
    }
    const double success = packet_success_prob(params);
    const int battery = clamp_battery(s.battery + energy.harvest_delta, params);
    spread_arrivals(dist, s, battery, 1, success, pmf, params.queue_cap);
    spread_arrivals(dist, s, battery, 0, 1.0 - success, pmf, params.queue_cap);
    return dist;
}

NodeDistribution unselected_transition(NodeState s, const NetworkParams& params) {
    const auto pmf = arrival_pmf(params);
    NodeDistribution dist;
    spread_arrivals(dist, s, s.battery, 0, 1.0, pmf, params.queue_cap);
    return dist;
}

std::vector<JointOutcome> joint_transition(std::span<const NodeState> s, std::size_t selected,
                                           std::span<const EnergyProfile> energy,
                                           const NetworkParams& params) {
    const std::size_t n_nodes = s.size();
    std::vector<NodeDistribution> parts(n_nodes);
    for (std::size_t n = 0; n < n_nodes; ++n)
        parts[n] = node_distribution(s, n, selected, energy, params);

    const std::uint64_t radix = node_state_count(params);
    std::vector<std::uint64_t> weight(n_nodes, 1);
    for (std::size_t n = 1; n < n_nodes; ++n) weight[n] = weight[n - 1] * radix;

    std::vector<JointOutcome> out;
    std::vector<std::size_t> pick(n_nodes, 0);
    while (true) {
        JointOutcome o{0, 1.0, 0.0};
        for (std::size_t n = 0; n < n_nodes; ++n) {
            const auto& part = parts[n][pick[n]];
            o.next += weight[n] * node_index(part.next, params);
            o.prob *= part.prob;
            o.reward += part.drop_mass / part.prob;
        }
        out.push_back(o);

        std::size_t n = 0;
        while (n < n_nodes && ++pick[n] == parts[n].size()) pick[n++] = 0;
        if (n == n_nodes) break;
    }
    return out;
}

double node_overflow(std::span<const NodeState> s, std::size_t n, std::size_t selected,
                     std::span<const EnergyProfile> energy, const NetworkParams& params) {
    return drop_total(node_distribution(s, n, selected, energy, params));
}

double transition_reward(std::span<const NodeState> s, std::span<const NodeState> next,
                         std::size_t selected, std::span<const EnergyProfile> energy,
                         const NetworkParams& params) {
    double total = 0.0;
    for (std::size_t n = 0; n < s.size(); ++n)
        if (s[n].queue == params.queue_cap && next[n].queue == params.queue_cap)
            total += node_overflow(s, n, selected, energy, params);
    return total;
}

double expected_cost(std::span<const NodeState> s, std::size_t selected,
                     std::span<const EnergyProfile> energy, const NetworkParams& params) {
    double total = 0.0;
    for (std::size_t n = 0; n < s.size(); ++n)
        total += node_overflow(s, n, selected, energy, params);
    return total;
}

std::span<const std::uint32_t> TransitionModel::next(std::size_t row) const {
    return {next_.data() + offsets_[row], offsets_[row + 1] - offsets_[row]};
}

std::span<const double> TransitionModel::prob(std::size_t row) const {
    return {prob_.data() + offsets_[row], offsets_[row + 1] - offsets_[row]};
}

std::span<const double> TransitionModel::reward(std::size_t row) const {
    return {reward_.data() + offsets_[row], offsets_[row + 1] - offsets_[row]};
}

void TransitionModel::write_csv(std::ostream& out) const {
    const auto old_precision = out.precision(17);
    out << "state,action,next,prob,reward\n";
    for (std::uint64_t s = 0; s < n_states_; ++s) {
        for (std::size_t a = 0; a < n_actions_; ++a) {
            const std::size_t r = row(s, a);
            for (std::size_t i = offsets_[r]; i < offsets_[r + 1]; ++i)
                out << s << ',' << a << ',' << next_[i] << ',' << prob_[i] << ',' << reward_[i]
                    << '\n';
        }
    }
    out.precision(old_precision);
}

TransitionModel build_model(const NetworkParams& params, std::uint64_t state_budget) {
    require_valid(params);
    const std::uint64_t count = joint_state_count(params);
    if (count > state_budget || count > std::numeric_limits<std::uint32_t>::max()) {
        std::ostringstream msg;
        msg << "joint state space of " << node_state_count(params) << "^" << params.n_nodes
            << " = ";
        if (count == std::numeric_limits<std::uint64_t>::max())
            msg << "~" << std::pow(static_cast<double>(node_state_count(params)),
                                   static_cast<double>(params.n_nodes));
        else
            msg << count;
        msg << " states exceeds the budget of " << state_budget;
        throw BudgetError(msg.str());
    }

    TransitionModel model;
    model.n_states_ = count;
    model.n_actions_ = params.n_nodes;
    model.energy_ = energy_profiles(params);

    const std::size_t n_states = static_cast<std::size_t>(count);
    const std::size_t n_rows = n_states * model.n_actions_;
    std::vector<std::vector<JointOutcome>> rows(n_rows);
    model.cost_.resize(n_rows);

    detail::parallel_chunks(n_states, [&](std::size_t begin, std::size_t end) {
        for (std::size_t s = begin; s < end; ++s) {
            const JointState state = state_unindex(s, params);
            for (std::size_t a = 0; a < model.n_actions_; ++a) {
                const std::size_t r = s * model.n_actions_ + a;
                rows[r] = joint_transition(state, a, model.energy_, params);
                model.cost_[r] = expected_cost(state, a, model.energy_, params);
            }
        }
    }, 64);

    model.offsets_.resize(n_rows + 1, 0);
    for (std::size_t r = 0; r < n_rows; ++r)
        model.offsets_[r + 1] = model.offsets_[r] + rows[r].size();
    const std::size_t nnz = model.offsets_.back();
    model.next_.resize(nnz);
    model.prob_.resize(nnz);
    model.reward_.resize(nnz);
    for (std::size_t r = 0; r < n_rows; ++r) {
        std::size_t i = model.offsets_[r];
        for (const auto& o : rows[r]) {
            model.next_[i] = static_cast<std::uint32_t>(o.next);
            model.prob_[i] = o.prob;
            model.reward_[i] = o.reward;
            ++i;
        }
        std::vector<JointOutcome>().swap(rows[r]);
    }
    return model;
}

std::size_t argmin_lowest(std::span<const double> values, double tol) {
    const double best = *std::min_element(values.begin(), values.end());
    const double slack = tol * std::max(1.0, std::abs(best));
    for (std::size_t i = 0; i < values.size(); ++i)
        if (values[i] <= best + slack) return i;
    return 0;
}

Solution value_iteration(const TransitionModel& model, const NetworkParams& params,
                         const SolverOptions& options) {
    const double omega = params.discount;
    if (!(omega >= 0.0 && omega < 1.0))
        throw ValidationError("discount must lie in [0, 1) for value iteration");
    const double stop = omega > 0.0 ? params.vi_tol * (1.0 - omega) / (2.0 * omega)
                                    : std::numeric_limits<double>::infinity();

    const auto n_states = static_cast<std::size_t>(model.n_states());
    const std::size_t n_actions = model.n_actions();

    auto q_value = [&](const ValueFunction& v, std::size_t s, std::size_t a) {
        const std::size_t r = model.row(s, a);
        const auto next = model.next(r);
        const auto prob = model.prob(r);
        double expect = 0.0;
        for (std::size_t i = 0; i < next.size(); ++i) expect += prob[i] * v[next[i]];
        return model.cost(r) + omega * expect;
    };

    Solution sol;
    ValueFunction v(n_states, 0.0);
    ValueFunction updated(n_states, 0.0);
    bool converged = false;
    while (sol.sweeps < options.max_sweeps) {
        double residual = 0.0;
        std::mutex residual_mutex;
        detail::parallel_chunks(n_states, [&](std::size_t begin, std::size_t end) {
            double local = 0.0;
            for (std::size_t s = begin; s < end; ++s) {
                double best = std::numeric_limits<double>::infinity();
                for (std::size_t a = 0; a < n_actions; ++a) best = std::min(best, q_value(v, s, a));
                updated[s] = best;
                local = std::max(local, std::abs(best - v[s]));
            }
            std::lock_guard lock(residual_mutex);
            residual = std::max(residual, local);
        });
        v.swap(updated);
        ++sol.sweeps;
        sol.residuals.push_back(residual);
        if (residual < stop) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        const double residual = sol.residuals.empty() ? 0.0 : sol.residuals.back();
        std::ostringstream msg;
        msg << "value iteration did not converge in " << sol.sweeps << " sweeps (residual "
            << residual << ", target " << stop << ")";
        throw ConvergenceError(msg.str(), residual);
    }

    sol.policy.resize(n_states);
    std::vector<double> q(n_actions);
    const auto& energy = model.energy();
    for (std::size_t s = 0; s < n_states; ++s) {
        for (std::size_t a = 0; a < n_actions; ++a) q[a] = q_value(v, s, a);
        const std::size_t k = argmin_lowest(q, options.tie_tolerance);
        sol.policy[s] = {k, energy[k].modulation.order};
    }
    sol.value = std::move(v);
    return sol;
}

ApproxIndexPolicy::ApproxIndexPolicy(const NetworkParams& params)
    : ApproxIndexPolicy(params, energy_profiles(params)) {}

ApproxIndexPolicy::ApproxIndexPolicy(const NetworkParams& params,
                                     std::span<const EnergyProfile> energy)
    : stride_(node_state_count(params)), params_(params) {
    const double omega = params.discount;
    const double share = 1.0 / static_cast<double>(params.n_nodes);

    std::vector<NodeDistribution> passive(stride_);
    std::vector<double> passive_cost(stride_);
    for (std::size_t i = 0; i < stride_; ++i) {
        passive[i] = unselected_transition(node_unindex(i, params), params);
        passive_cost[i] = drop_total(passive[i]);
    }

    auto expect = [](const NodeDistribution& dist, const std::vector<double>& v,
                     const NetworkParams& p) {
        double total = 0.0;
        for (const auto& o : dist) total += o.prob * v[node_index(o.next, p)];
        return total;
    };

    index_.resize(params.n_nodes);
    for (std::size_t n = 0; n < params.n_nodes; ++n) {
        std::vector<NodeDistribution> active(stride_);
        std::vector<double> active_cost(stride_);
        for (std::size_t i = 0; i < stride_; ++i) {
            active[i] = selected_transition(node_unindex(i, params), energy[n], params);
            active_cost[i] = drop_total(active[i]);
        }

        // Value of the node under uniformly random service.
        std::vector<double> v(stride_, 0.0), next(stride_, 0.0);
        for (int sweep = 0; sweep < 100'000; ++sweep) {
            double change = 0.0;
            for (std::size_t i = 0; i < stride_; ++i) {
                next[i] = share * (active_cost[i] + omega * expect(active[i], v, params)) +
                          (1.0 - share) * (passive_cost[i] + omega * expect(passive[i], v, params));
                change = std::max(change, std::abs(next[i] - v[i]));
            }
            v.swap(next);
            if (change < 1e-12) break;
        }

        index_[n].resize(stride_);
        for (std::size_t i = 0; i < stride_; ++i)
            index_[n][i] = (active_cost[i] + omega * expect(active[i], v, params)) -
                           (passive_cost[i] + omega * expect(passive[i], v, params));
    }
}

double ApproxIndexPolicy::index(std::size_t n, NodeState s) const {
    return index_.at(n)[node_index(s, params_)];
}

std::size_t ApproxIndexPolicy::choose(std::span<const NodeState> s) const {
    std::vector<double> values(s.size());
    for (std::size_t n = 0; n < s.size(); ++n) values[n] = index(n, s[n]);
    return argmin_lowest(values, 1e-12);
}

EhmdpScheduler::EhmdpScheduler(std::vector<Action> policy, NetworkParams params)
    : policy_(std::move(policy)), params_(std::move(params)) {
    if (policy_.size() != joint_state_count(params_))
        throw ValidationError("policy covers " + std::to_string(policy_.size()) +
                              " states, expected " + std::to_string(joint_state_count(params_)));
}

EhmdpScheduler::EhmdpScheduler(ApproxIndexPolicy approx, std::vector<int> modulation)
    : approx_(std::move(approx)), modulation_(std::move(modulation)) {}

Action EhmdpScheduler::choose(std::span<const NodeState> s) const {
    if (exact()) return policy_[static_cast<std::size_t>(state_index(s, params_))];
    const std::size_t k = approx_->choose(s);
    return {k, modulation_.at(k)};
}

}  // namespace wpt
