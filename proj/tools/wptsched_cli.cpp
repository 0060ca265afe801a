// Command-line front end over the C interface.

#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "wptsched/wptsched.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitError = 2;

int report_error(wpt_status status) {
    std::fprintf(stderr, "error (%s): %s\n", wpt_status_name(status), wpt_last_error());
    return kExitError;
}

void log_line(const char* message, void*) { std::fprintf(stderr, "note: %s\n", message); }

struct RunOptions {
    std::string config;
    std::string out;
    std::string seeds;
    std::string strategies;
    bool trace = false;
    std::uint64_t budget = 0;
};

int cmd_run(const RunOptions& o) {
    wpt_experiment* exp = nullptr;
    wpt_status st = wpt_experiment_load(o.config.c_str(), &exp);
    if (st != WPT_OK) return report_error(st);
    if (st == WPT_OK && !o.out.empty()) st = wpt_experiment_set_output(exp, o.out.c_str());
    if (st == WPT_OK && !o.seeds.empty()) st = wpt_experiment_set_seeds(exp, o.seeds.c_str());
    if (st == WPT_OK && !o.strategies.empty())
        st = wpt_experiment_set_strategies(exp, o.strategies.c_str());
    if (st == WPT_OK && o.trace) st = wpt_experiment_set_trace(exp, 1);
    if (st == WPT_OK && o.budget) st = wpt_experiment_set_budget(exp, o.budget);
    if (st == WPT_OK) st = wpt_experiment_run(exp, log_line, nullptr);
    wpt_experiment_free(exp);
    if (st == WPT_PARTIAL) {
        std::fprintf(stderr, "warning: %s\n", wpt_last_error());
        return kExitPartial;
    }
    return st == WPT_OK ? kExitOk : report_error(st);
}

int cmd_report(const std::string& path) {
    char* text = nullptr;
    const wpt_status st = wpt_report(path.c_str(), &text);
    if (st != WPT_OK) return report_error(st);
    std::fputs(text, stdout);
    wpt_string_free(text);
    return kExitOk;
}

int cmd_validate(const std::string& config) {
    wpt_experiment* exp = nullptr;
    wpt_status st = wpt_experiment_load(config.c_str(), &exp);
    if (st == WPT_OK) st = wpt_experiment_validate(exp);
    wpt_experiment_free(exp);
    if (st != WPT_OK) return report_error(st);
    std::puts("ok");
    return kExitOk;
}

struct PointOptions {
    std::string config;
    std::size_t n_nodes = 0;
    int slot_minislots = 0;
    std::uint64_t seed = 1;
};

int load_network(const PointOptions& o, wpt_network** net) {
    const wpt_status st =
        wpt_network_from_config(o.config.c_str(), o.n_nodes, o.slot_minislots, o.seed, net);
    return st == WPT_OK ? kExitOk : report_error(st);
}

int cmd_energy(const PointOptions& o) {
    wpt_network* net = nullptr;
    if (int rc = load_network(o, &net)) return rc;
    std::puts("node,gain,modulation,net_energy_j,tx_duration_s,tx_energy_j,harvest_delta,"
              "idle_harvest,collision_loss,min_tx_battery");
    int rc = kExitOk;
    for (size_t k = 0; k < wpt_network_nodes(net); ++k) {
        wpt_energy_profile e;
        double gain = 0.0;
        wpt_status st = wpt_network_gain(net, k, &gain);
        if (st == WPT_OK) st = wpt_energy(net, k, &e);
        if (st != WPT_OK) {
            rc = report_error(st);
            break;
        }
        std::printf("%zu,%.17g,%d,%.17g,%.17g,%.17g,%d,%d,%d,%d\n", k, gain, e.modulation,
                    e.net_energy, e.tx_duration, e.tx_energy, e.harvest_delta, e.idle_harvest,
                    e.collision_loss, e.min_tx_battery);
    }
    wpt_network_free(net);
    return rc;
}

int cmd_solve(const PointOptions& o, std::uint64_t budget, const std::string& model,
              const std::string& policy_path) {
    wpt_network* net = nullptr;
    if (int rc = load_network(o, &net)) return rc;
    wpt_policy* policy = nullptr;
    wpt_status st = wpt_solve(net, budget, &policy);
    wpt_network_free(net);
    if (st != WPT_OK) return report_error(st);
    st = wpt_policy_write(policy, model.empty() ? nullptr : model.c_str(),
                          policy_path.empty() ? nullptr : policy_path.c_str());
    if (st == WPT_OK)
        std::printf("states %llu, value iteration sweeps %zu\n",
                    static_cast<unsigned long long>(wpt_policy_states(policy)),
                    wpt_policy_sweeps(policy));
    wpt_policy_free(policy);
    return st == WPT_OK ? kExitOk : report_error(st);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scheduling experiments for rechargeable sensor networks with wireless power transfer"};
    app.set_version_flag("--version", std::string(wpt_version()));
    app.require_subcommand(1);

    RunOptions run;
    auto* run_cmd = app.add_subcommand("run", "Run an experiment grid and write CSV results");
    run_cmd->add_option("--config", run.config, "INI config or manifest.json")->required();
    run_cmd->add_option("--out", run.out, "Output directory (overrides the config)");
    run_cmd->add_option("--seeds", run.seeds, "Seed list, e.g. 1-20 or 1,5,9");
    run_cmd->add_option("--strategies", run.strategies,
                        "Comma list of ehmdp, ehmdp-exact, ehmdp-approx, fq, rs, eqat, dfq, rc");
    run_cmd->add_flag("--trace", run.trace, "Also write per-slot trace.csv");
    run_cmd->add_option("--budget", run.budget, "State budget for the exact MDP");

    std::string report_path;
    auto* report_cmd = app.add_subcommand("report", "Ordering table and trend flags from aggregate.csv");
    report_cmd->add_option("aggregate", report_path, "Path to aggregate.csv")->required();

    std::string validate_path;
    auto* validate_cmd = app.add_subcommand("validate", "Check a config without running it");
    validate_cmd->add_option("--config", validate_path, "INI config or manifest.json")->required();

    PointOptions point;
    std::uint64_t solve_budget = 100000;
    std::string model_csv, policy_csv;
    auto* solve_cmd = app.add_subcommand("solve", "Solve the exact MDP for one grid point");
    auto* energy_cmd = app.add_subcommand("energy", "Per-node modulation and energy levels");
    for (auto* cmd : {solve_cmd, energy_cmd}) {
        cmd->add_option("--config", point.config, "INI config or manifest.json")->required();
        cmd->add_option("--n", point.n_nodes, "Node count (default: first grid value)");
        cmd->add_option("--slot", point.slot_minislots, "Slot length in mini-slots");
        cmd->add_option("--seed", point.seed, "Seed for the channel gains");
    }
    solve_cmd->add_option("--budget", solve_budget, "State budget");
    solve_cmd->add_option("--model", model_csv, "Write the transition model CSV here");
    solve_cmd->add_option("--policy", policy_csv, "Write the policy CSV here");

    CLI11_PARSE(app, argc, argv);

    if (*run_cmd) return cmd_run(run);
    if (*report_cmd) return cmd_report(report_path);
    if (*validate_cmd) return cmd_validate(validate_path);
    if (*solve_cmd) return cmd_solve(point, solve_budget, model_csv, policy_csv);
    if (*energy_cmd) return cmd_energy(point);
    return kExitError;
}
