#include "wptsched/wptsched.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "wptsched/errors.hpp"
#include "wptsched/experiment.hpp"

struct wpt_network {
    wpt::NetworkParams params;
};

struct wpt_policy {
    wpt::NetworkParams params;
    wpt::TransitionModel model;
    wpt::Solution solution;
};

struct wpt_sim {
    std::optional<wpt::Simulator> sim;
};

struct wpt_experiment {
    wpt::ExperimentSpec spec;
};

namespace {

thread_local std::string last_error;

wpt_status fail(wpt_status status, std::string message) {
    last_error = std::move(message);
    return status;
}

// Runs `body` and maps library exceptions onto status codes.
template <class Body>
wpt_status guarded(Body&& body) {
    try {
        body();
        return WPT_OK;
    } catch (const wpt::ValidationError& e) {
        return fail(WPT_INVALID_ARGUMENT, e.what());
    } catch (const wpt::IoError& e) {
        return fail(WPT_IO, e.what());
    } catch (const wpt::BudgetError& e) {
        return fail(WPT_BUDGET, e.what());
    } catch (const wpt::ConvergenceError& e) {
        return fail(WPT_CONVERGENCE, e.what());
    } catch (const wpt::InfeasibleError& e) {
        return fail(WPT_INFEASIBLE, e.what());
    } catch (const std::bad_alloc&) {
        return fail(WPT_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(WPT_INTERNAL, e.what());
    } catch (...) {
        return fail(WPT_INTERNAL, "unknown error");
    }
}

#define WPT_REQUIRE(cond, what) \
    do {                        \
        if (!(cond)) return fail(WPT_INVALID_ARGUMENT, what); \
    } while (0)

char* copy_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

double* numeric_field(wpt::NetworkParams& p, std::string_view key) {
    if (key == "ber_target") return &p.ber_target;
    if (key == "kappa1") return &p.kappa1;
    if (key == "kappa2") return &p.kappa2;
    if (key == "bs_power") return &p.bs_power;
    if (key == "transfer_efficiency") return &p.transfer_efficiency;
    if (key == "bandwidth") return &p.bandwidth;
    if (key == "slot_len") return &p.slot_len;
    if (key == "arrival_period") return &p.arrival_period;
    if (key == "arrival_prob") return &p.arrival_prob;
    if (key == "battery_quantum") return &p.battery_quantum;
    if (key == "battery_capacity") return &p.battery_capacity;
    if (key == "discount") return &p.discount;
    if (key == "vi_tol") return &p.vi_tol;
    return nullptr;
}

int* integer_field(wpt::NetworkParams& p, std::string_view key) {
    if (key == "packet_bits") return &p.packet_bits;
    if (key == "battery_levels") return &p.battery_levels;
    if (key == "queue_cap") return &p.queue_cap;
    if (key == "max_modulation") return &p.max_modulation;
    return nullptr;
}

}  // namespace

extern "C" {

const char* wpt_version(void) { return "0.1.0"; }

const char* wpt_last_error(void) { return last_error.c_str(); }

const char* wpt_status_name(wpt_status status) {
    switch (status) {
        case WPT_OK: return "ok";
        case WPT_INVALID_ARGUMENT: return "invalid argument";
        case WPT_IO: return "i/o error";
        case WPT_BUDGET: return "state budget exceeded";
        case WPT_CONVERGENCE: return "no convergence";
        case WPT_INFEASIBLE: return "infeasible";
        case WPT_PARTIAL: return "partial failure";
        case WPT_INTERNAL: return "internal error";
    }
    return "unknown status";
}

void wpt_string_free(char* s) { std::free(s); }

wpt_status wpt_network_defaults(size_t n_nodes, double gain, wpt_network** out) {
    WPT_REQUIRE(out, "out is NULL");
    return guarded([&] {
        auto net = std::make_unique<wpt_network>();
        net->params = wpt::paper_defaults(n_nodes, gain);
        wpt::require_valid(net->params);
        *out = net.release();
    });
}

wpt_status wpt_network_from_config(const char* path, size_t n_nodes, int slot_minislots,
                                   uint64_t seed, wpt_network** out) {
    WPT_REQUIRE(path && out, "path or out is NULL");
    return guarded([&] {
        const auto spec = wpt::load_config(path);
        const std::size_t n = n_nodes ? n_nodes : spec.n_values.front();
        const int t = slot_minislots > 0 ? slot_minislots : spec.slot_minislots.front();
        auto net = std::make_unique<wpt_network>();
        net->params = wpt::resolve(wpt::scenario_at(spec, n, t), seed);
        *out = net.release();
    });
}

void wpt_network_free(wpt_network* net) { delete net; }

wpt_status wpt_network_set(wpt_network* net, const char* key, double value) {
    WPT_REQUIRE(net && key, "net or key is NULL");
    if (double* d = numeric_field(net->params, key)) {
        *d = value;
        if (std::string_view(key) == "battery_quantum")
            net->params.battery_capacity = net->params.battery_levels * value;
        return WPT_OK;
    }
    if (int* i = integer_field(net->params, key)) {
        WPT_REQUIRE(value == static_cast<int>(value), "integer field set to a fractional value");
        *i = static_cast<int>(value);
        if (std::string_view(key) == "battery_levels")
            net->params.battery_capacity = *i * net->params.battery_quantum;
        return WPT_OK;
    }
    if (std::string_view(key) == "n_nodes") {
        WPT_REQUIRE(value >= 1 && value == static_cast<std::size_t>(value), "n_nodes must be a positive integer");
        net->params.n_nodes = static_cast<std::size_t>(value);
        net->params.channel_gain.resize(net->params.n_nodes,
                                        net->params.channel_gain.empty() ? 1.0
                                                                         : net->params.channel_gain.back());
        return WPT_OK;
    }
    return fail(WPT_INVALID_ARGUMENT, std::string("unknown network field '") + key + "'");
}

wpt_status wpt_network_get(const wpt_network* net, const char* key, double* value) {
    WPT_REQUIRE(net && key && value, "net, key or value is NULL");
    auto& p = const_cast<wpt::NetworkParams&>(net->params);
    if (double* d = numeric_field(p, key)) {
        *value = *d;
        return WPT_OK;
    }
    if (int* i = integer_field(p, key)) {
        *value = *i;
        return WPT_OK;
    }
    if (std::string_view(key) == "n_nodes") {
        *value = static_cast<double>(p.n_nodes);
        return WPT_OK;
    }
    return fail(WPT_INVALID_ARGUMENT, std::string("unknown network field '") + key + "'");
}

wpt_status wpt_network_set_gains(wpt_network* net, const double* gains, size_t count) {
    WPT_REQUIRE(net && (gains || count == 0), "net or gains is NULL");
    net->params.channel_gain.assign(gains, gains + count);
    net->params.n_nodes = count;
    return WPT_OK;
}

wpt_status wpt_network_gain(const wpt_network* net, size_t node, double* gain) {
    WPT_REQUIRE(net && gain, "net or gain is NULL");
    WPT_REQUIRE(node < net->params.channel_gain.size(), "node index out of range");
    *gain = net->params.channel_gain[node];
    return WPT_OK;
}

size_t wpt_network_nodes(const wpt_network* net) { return net ? net->params.n_nodes : 0; }

wpt_status wpt_network_validate(const wpt_network* net, char** report) {
    WPT_REQUIRE(net && report, "net or report is NULL");
    return guarded([&] {
        std::string text;
        for (const auto& v : wpt::validate(net->params)) text += v + "\n";
        *report = copy_string(text);
    });
}

wpt_status wpt_energy(const wpt_network* net, size_t node, wpt_energy_profile* out) {
    WPT_REQUIRE(net && out, "net or out is NULL");
    return guarded([&] {
        wpt::require_valid(net->params);
        if (node >= net->params.n_nodes) throw wpt::ValidationError("node index out of range");
        const auto e = wpt::energy_profile(net->params, node);
        *out = {e.modulation.order,  e.modulation.net_energy_gain, e.modulation.tx_duration,
                e.modulation.tx_energy, e.harvest_delta,          e.idle_harvest,
                e.collision_loss,     e.min_tx_battery};
    });
}

wpt_status wpt_solve(const wpt_network* net, uint64_t state_budget, wpt_policy** out) {
    WPT_REQUIRE(net && out, "net or out is NULL");
    return guarded([&] {
        auto policy = std::make_unique<wpt_policy>();
        policy->params = net->params;
        policy->model = wpt::build_model(net->params, state_budget);
        policy->solution = wpt::value_iteration(policy->model, net->params);
        *out = policy.release();
    });
}

void wpt_policy_free(wpt_policy* policy) { delete policy; }

uint64_t wpt_policy_states(const wpt_policy* policy) {
    return policy ? policy->model.n_states() : 0;
}

size_t wpt_policy_sweeps(const wpt_policy* policy) {
    return policy ? policy->solution.sweeps : 0;
}

wpt_status wpt_policy_action(const wpt_policy* policy, uint64_t state, size_t* node,
                             int* modulation) {
    WPT_REQUIRE(policy && node && modulation, "policy, node or modulation is NULL");
    WPT_REQUIRE(state < policy->solution.policy.size(), "state index out of range");
    *node = policy->solution.policy[state].node;
    *modulation = policy->solution.policy[state].modulation;
    return WPT_OK;
}

wpt_status wpt_policy_value(const wpt_policy* policy, uint64_t state, double* value) {
    WPT_REQUIRE(policy && value, "policy or value is NULL");
    WPT_REQUIRE(state < policy->solution.value.size(), "state index out of range");
    *value = policy->solution.value[state];
    return WPT_OK;
}

wpt_status wpt_policy_write(const wpt_policy* policy, const char* model_csv,
                            const char* policy_csv) {
    WPT_REQUIRE(policy, "policy is NULL");
    return guarded([&] {
        if (model_csv) {
            std::ofstream out(model_csv, std::ios::binary | std::ios::trunc);
            if (!out) throw wpt::IoError(std::string("cannot write '") + model_csv + "'");
            policy->model.write_csv(out);
            if (!out.flush()) throw wpt::IoError(std::string("failed writing '") + model_csv + "'");
        }
        if (policy_csv) {
            std::ofstream out(policy_csv, std::ios::binary | std::ios::trunc);
            if (!out) throw wpt::IoError(std::string("cannot write '") + policy_csv + "'");
            out << "state,node,modulation,value\n";
            out.precision(17);
            const auto& sol = policy->solution;
            for (std::size_t s = 0; s < sol.policy.size(); ++s)
                out << s << ',' << sol.policy[s].node << ',' << sol.policy[s].modulation << ','
                    << sol.value[s] << '\n';
            if (!out.flush()) throw wpt::IoError(std::string("failed writing '") + policy_csv + "'");
        }
    });
}

wpt_status wpt_sim_create(const wpt_network* net, const char* strategy, const char* design,
                          const wpt_policy* policy, uint64_t seed, wpt_sim** out) {
    WPT_REQUIRE(net && strategy && out, "net, strategy or out is NULL");
    return guarded([&] {
        wpt::Scenario scenario;
        scenario.network = net->params;
        wpt::Strategy s;
        s.kind = wpt::parse_strategy(strategy);
        if (design) s.design = wpt::TxProbDesign::parse(design);
        if (policy)
            s.policy = std::make_shared<const wpt::ExactPolicy>(
                wpt::ExactPolicy{policy->params, policy->solution.policy});
        auto handle = std::make_unique<wpt_sim>();
        handle->sim.emplace(scenario, std::move(s), seed);
        *out = handle.release();
    });
}

void wpt_sim_free(wpt_sim* sim) { delete sim; }

wpt_status wpt_sim_step(wpt_sim* sim, wpt_slot* out) {
    WPT_REQUIRE(sim && out, "sim or out is NULL");
    return guarded([&] {
        const auto t = sim->sim->step();
        out->slot = t.slot;
        out->outcome = static_cast<wpt_outcome>(t.outcome);
        out->transmitters = t.transmitters.size();
        out->recipient = t.recipient ? static_cast<int64_t>(*t.recipient) : -1;
        out->energy_levels = t.energy_levels;
    });
}

wpt_status wpt_sim_run(wpt_sim* sim, uint64_t slots) {
    WPT_REQUIRE(sim, "sim is NULL");
    return guarded([&] {
        for (uint64_t i = 0; i < slots; ++i) sim->sim->step();
    });
}

wpt_status wpt_sim_metrics(const wpt_sim* sim, wpt_metrics* out) {
    WPT_REQUIRE(sim && out, "sim or out is NULL");
    const auto m = sim->sim->metrics();
    *out = {m.slots,           m.generated,      m.delivered,
            m.dropped_overflow, m.dropped_collision_retries_exhausted,
            m.in_queue_final,  m.initial_backlog, m.collisions,
            m.ber_failures,    m.throughput_pps(), m.loss_rate()};
    return WPT_OK;
}

wpt_status wpt_sim_node(const wpt_sim* sim, size_t node, int* battery, int* queue) {
    WPT_REQUIRE(sim && battery && queue, "sim, battery or queue is NULL");
    const auto state = sim->sim->state();
    WPT_REQUIRE(node < state.size(), "node index out of range");
    *battery = state[node].battery;
    *queue = state[node].queue;
    return WPT_OK;
}

wpt_status wpt_experiment_load(const char* path, wpt_experiment** out) {
    WPT_REQUIRE(path && out, "path or out is NULL");
    return guarded([&] {
        auto exp = std::make_unique<wpt_experiment>();
        exp->spec = wpt::load_config(path);
        *out = exp.release();
    });
}

void wpt_experiment_free(wpt_experiment* exp) { delete exp; }

wpt_status wpt_experiment_set_output(wpt_experiment* exp, const char* dir) {
    WPT_REQUIRE(exp && dir, "exp or dir is NULL");
    exp->spec.out = dir;
    return WPT_OK;
}

wpt_status wpt_experiment_set_seeds(wpt_experiment* exp, const char* list) {
    WPT_REQUIRE(exp && list, "exp or list is NULL");
    return guarded([&] { exp->spec.seeds = wpt::parse_seed_list(list); });
}

wpt_status wpt_experiment_set_strategies(wpt_experiment* exp, const char* list) {
    WPT_REQUIRE(exp && list, "exp or list is NULL");
    return guarded([&] {
        auto names = wpt::split_list(list);
        if (names.empty()) throw wpt::ValidationError("strategy list is empty");
        for (const auto& n : names)
            if (n != "ehmdp") wpt::parse_strategy(n);
        exp->spec.strategies = std::move(names);
    });
}

wpt_status wpt_experiment_set_trace(wpt_experiment* exp, int enabled) {
    WPT_REQUIRE(exp, "exp is NULL");
    exp->spec.trace = enabled != 0;
    return WPT_OK;
}

wpt_status wpt_experiment_set_budget(wpt_experiment* exp, uint64_t states) {
    WPT_REQUIRE(exp, "exp is NULL");
    exp->spec.state_budget = states;
    return WPT_OK;
}

wpt_status wpt_experiment_validate(const wpt_experiment* exp) {
    WPT_REQUIRE(exp, "exp is NULL");
    return guarded([&] {
        wpt::require_valid(exp->spec);
        std::vector<std::string> problems;
        for (const auto n : exp->spec.n_values)
            for (const int t : exp->spec.slot_minislots) {
                try {
                    wpt::require_valid(wpt::scenario_at(exp->spec, n, t));
                } catch (const wpt::ValidationError& e) {
                    problems.push_back("n_nodes=" + std::to_string(n) +
                                       " slot_minislots=" + std::to_string(t) + ": " + e.what());
                }
            }
        if (!problems.empty()) throw wpt::ValidationError(std::move(problems));
    });
}

wpt_status wpt_experiment_run(wpt_experiment* exp, wpt_log_fn log, void* user) {
    WPT_REQUIRE(exp, "exp is NULL");
    wpt::ExperimentResult result;
    const auto status = guarded([&] {
        wpt::LogSink sink;
        if (log) sink = [&](std::string_view m) { log(std::string(m).c_str(), user); };
        result = wpt::run_experiment(exp->spec, sink);
    });
    if (status != WPT_OK) return status;
    if (!result.ok())
        return fail(WPT_PARTIAL, std::to_string(result.failures.size()) +
                                     " grid point(s) failed; first: " +
                                     result.failures.front().message);
    return WPT_OK;
}

wpt_status wpt_experiment_manifest(const wpt_experiment* exp, char** json) {
    WPT_REQUIRE(exp && json, "exp or json is NULL");
    return guarded([&] { *json = copy_string(wpt::manifest_json(exp->spec)); });
}

wpt_status wpt_report(const char* aggregate_csv, char** text) {
    WPT_REQUIRE(aggregate_csv && text, "aggregate_csv or text is NULL");
    return guarded([&] {
        std::ifstream in(aggregate_csv, std::ios::binary);
        if (!in) throw wpt::IoError(std::string("cannot open '") + aggregate_csv + "'");
        const auto rows = wpt::read_aggregate_csv(in);
        std::ostringstream out;
        wpt::write_report(out, wpt::make_report(rows));
        *text = copy_string(out.str());
    });
}

}  // extern "C"
