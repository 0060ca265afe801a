/* C interface to the wptsched library: energy model, MDP solver, slotted
 * simulator and experiment runner behind opaque handles.
 *
 * Every function returns a wpt_status. On failure the message of the most
 * recent error on the calling thread is available from wpt_last_error().
 * Handles are not thread-safe; distinct handles may be used concurrently.
 * Strings returned through char** are owned by the caller and released with
 * wpt_string_free().
 */
#ifndef WPTSCHED_H
#define WPTSCHED_H

#include <stddef.h>
#include <stdint.h>

#if defined(WPTSCHED_BUILDING)
#define WPT_API __attribute__((visibility("default")))
#else
#define WPT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum wpt_status {
    WPT_OK = 0,
    WPT_INVALID_ARGUMENT = 1, /* bad parameters, state or argument */
    WPT_IO = 2,               /* file could not be read or written */
    WPT_BUDGET = 3,           /* joint state space exceeds the budget */
    WPT_CONVERGENCE = 4,      /* value iteration hit its sweep cap */
    WPT_INFEASIBLE = 5,       /* no modulation order fits a packet */
    WPT_PARTIAL = 6,          /* experiment finished with failed grid points */
    WPT_INTERNAL = 7
} wpt_status;

typedef struct wpt_network wpt_network;
typedef struct wpt_policy wpt_policy;
typedef struct wpt_sim wpt_sim;
typedef struct wpt_experiment wpt_experiment;

typedef void (*wpt_log_fn)(const char* message, void* user);

WPT_API const char* wpt_version(void);
/* Message of the last failed call on this thread; "" if none. */
WPT_API const char* wpt_last_error(void);
WPT_API const char* wpt_status_name(wpt_status status);
WPT_API void wpt_string_free(char* s);

/* ---- network parameters ---- */

/* Evaluation defaults with n nodes and identical gains. */
WPT_API wpt_status wpt_network_defaults(size_t n_nodes, double gain, wpt_network** out);
/* Parameters of the first grid point of a config (INI or manifest JSON) with
 * gains resolved for `seed`. */
WPT_API wpt_status wpt_network_from_config(const char* path, size_t n_nodes, int slot_minislots,
                                           uint64_t seed, wpt_network** out);
WPT_API void wpt_network_free(wpt_network* net);
/* Numeric fields by name, e.g. "arrival_prob", "battery_levels", "discount". */
WPT_API wpt_status wpt_network_set(wpt_network* net, const char* key, double value);
WPT_API wpt_status wpt_network_get(const wpt_network* net, const char* key, double* value);
WPT_API wpt_status wpt_network_set_gains(wpt_network* net, const double* gains, size_t count);
WPT_API wpt_status wpt_network_gain(const wpt_network* net, size_t node, double* gain);
WPT_API size_t wpt_network_nodes(const wpt_network* net);
/* Lists every violated invariant, one per line; WPT_OK with "" when valid. */
WPT_API wpt_status wpt_network_validate(const wpt_network* net, char** report);

typedef struct wpt_energy_profile {
    int modulation;           /* rho* */
    double net_energy;        /* J(rho*), joules */
    double tx_duration;       /* seconds */
    double tx_energy;         /* joules */
    int harvest_delta;        /* levels gained on a clean scheduled slot */
    int idle_harvest;         /* levels gained on a harvest-only slot */
    int collision_loss;       /* levels lost on a collision */
    int min_tx_battery;       /* levels needed to transmit */
} wpt_energy_profile;

WPT_API wpt_status wpt_energy(const wpt_network* net, size_t node, wpt_energy_profile* out);

/* ---- MDP ---- */

WPT_API wpt_status wpt_solve(const wpt_network* net, uint64_t state_budget, wpt_policy** out);
WPT_API void wpt_policy_free(wpt_policy* policy);
WPT_API uint64_t wpt_policy_states(const wpt_policy* policy);
WPT_API size_t wpt_policy_sweeps(const wpt_policy* policy);
WPT_API wpt_status wpt_policy_action(const wpt_policy* policy, uint64_t state, size_t* node,
                                     int* modulation);
WPT_API wpt_status wpt_policy_value(const wpt_policy* policy, uint64_t state, double* value);
/* Writes the transition model (state,action,next,prob,reward) and the policy
 * (state,node,modulation,value); either path may be NULL. */
WPT_API wpt_status wpt_policy_write(const wpt_policy* policy, const char* model_csv,
                                    const char* policy_csv);

/* ---- simulator ---- */

typedef struct wpt_metrics {
    uint64_t slots;
    uint64_t generated;
    uint64_t delivered;
    uint64_t dropped_overflow;
    uint64_t dropped_collision_retries_exhausted;
    uint64_t in_queue_final;
    uint64_t initial_backlog;
    uint64_t collisions;
    uint64_t ber_failures;
    double throughput_pps;
    double loss_rate;
} wpt_metrics;

typedef enum wpt_outcome {
    WPT_SUCCESS = 0,
    WPT_BER_FAIL = 1,
    WPT_COLLISION = 2,
    WPT_IDLE = 3
} wpt_outcome;

typedef struct wpt_slot {
    uint64_t slot;
    wpt_outcome outcome;
    size_t transmitters;   /* nodes that put energy on the air */
    int64_t recipient;     /* node that received WPT, -1 if none */
    int energy_levels;
} wpt_slot;

/* strategy: ehmdp-exact, ehmdp-approx, fq, rs, eqat, dfq, rc. `policy` is
 * required for ehmdp-exact and must be solved for `net`. `design` selects the
 * E-QAT design ("exp:0.5", "sigmoid", "gamma:2:1") and may be NULL. */
WPT_API wpt_status wpt_sim_create(const wpt_network* net, const char* strategy,
                                  const char* design, const wpt_policy* policy, uint64_t seed,
                                  wpt_sim** out);
WPT_API void wpt_sim_free(wpt_sim* sim);
WPT_API wpt_status wpt_sim_step(wpt_sim* sim, wpt_slot* out);
WPT_API wpt_status wpt_sim_run(wpt_sim* sim, uint64_t slots);
WPT_API wpt_status wpt_sim_metrics(const wpt_sim* sim, wpt_metrics* out);
WPT_API wpt_status wpt_sim_node(const wpt_sim* sim, size_t node, int* battery, int* queue);

/* ---- experiments ---- */

WPT_API wpt_status wpt_experiment_load(const char* path, wpt_experiment** out);
WPT_API void wpt_experiment_free(wpt_experiment* exp);
WPT_API wpt_status wpt_experiment_set_output(wpt_experiment* exp, const char* dir);
WPT_API wpt_status wpt_experiment_set_seeds(wpt_experiment* exp, const char* list);
WPT_API wpt_status wpt_experiment_set_strategies(wpt_experiment* exp, const char* list);
WPT_API wpt_status wpt_experiment_set_trace(wpt_experiment* exp, int enabled);
WPT_API wpt_status wpt_experiment_set_budget(wpt_experiment* exp, uint64_t states);
WPT_API wpt_status wpt_experiment_validate(const wpt_experiment* exp);
/* Returns WPT_PARTIAL when some grid points failed; their messages go to
 * `log` (which may be NULL) and to wpt_last_error(). */
WPT_API wpt_status wpt_experiment_run(wpt_experiment* exp, wpt_log_fn log, void* user);
/* Resolved configuration as manifest JSON. */
WPT_API wpt_status wpt_experiment_manifest(const wpt_experiment* exp, char** json);

/* Ordering table and trend flags for an aggregate.csv. */
WPT_API wpt_status wpt_report(const char* aggregate_csv, char** text);

#ifdef __cplusplus
}
#endif

#endif
