#ifndef RESHARE_H
#define RESHARE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum ReshareStatus {
  RESHARE_STATUS_OK = 0,
  RESHARE_STATUS_NULL_POINTER = 1,
  RESHARE_STATUS_INVALID_ARGUMENT = 2,
  RESHARE_STATUS_SCENARIO = 3,
  RESHARE_STATUS_INFEASIBLE = 4,
  RESHARE_STATUS_OUT_OF_RANGE = 5,
  RESHARE_STATUS_INVARIANT = 6,
  RESHARE_STATUS_IO = 7,
  RESHARE_STATUS_INTERNAL = 8,
} ReshareStatus;

/**
 * A parsed, validated scenario.
 */
typedef struct ReshareScenario ReshareScenario;

/**
 * One strategy's live simulation state.
 */
typedef struct ReshareSimulation ReshareSimulation;

/**
 * Snapshot of a simulation's cost figures.
 */
typedef struct ReshareCost {
  /**
   * Instantaneous cost rate.
   */
  double phi;
  /**
   * Cost integrated up to `clock`.
   */
  double cumulative;
  double clock;
  double epsilon;
  double pod_fraction;
  uint64_t vm_count;
} ReshareCost;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next call from the same thread.
 */
const char *reshare_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *reshare_version(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void reshare_string_free(char *s);

/**
 * Loads a scenario file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum ReshareStatus reshare_scenario_load(const char *path, struct ReshareScenario **out);

/**
 * Parses a scenario from JSON text. Relative trace paths resolve against
 * the current directory.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum ReshareStatus reshare_scenario_parse(const char *json, struct ReshareScenario **out);

/**
 * # Safety
 * `scenario` must come from `reshare_scenario_load`/`_parse` or be NULL.
 */
void reshare_scenario_free(struct ReshareScenario *scenario);

/**
 * Number of services in the scenario's catalog; service indices passed to
 * `reshare_simulation_arrive` range over `0..count`.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be writable.
 */
enum ReshareStatus reshare_scenario_service_count(const struct ReshareScenario *scenario,
                                                  uint32_t *out);

/**
 * Generates the scenario's workload for `seed`, runs `strategy` over it and
 * returns the summary as JSON in `out_json`.
 *
 * # Safety
 * Pointers must be valid; `strategy` NUL-terminated; `out_json` writable.
 */
enum ReshareStatus reshare_run_summary(const struct ReshareScenario *scenario,
                                       const char *strategy,
                                       uint64_t seed,
                                       char **out_json);

/**
 * Starts an empty simulation of `strategy` on the scenario's system. Cost is
 * integrated up to the scenario horizon. Per-event invariant checks run when
 * `verify` is non-zero.
 *
 * # Safety
 * Pointers must be valid; `strategy` NUL-terminated; `out` writable.
 */
enum ReshareStatus reshare_simulation_new(const struct ReshareScenario *scenario,
                                          const char *strategy,
                                          bool verify,
                                          struct ReshareSimulation **out);

/**
 * # Safety
 * `sim` must come from `reshare_simulation_new` or be NULL.
 */
void reshare_simulation_free(struct ReshareSimulation *sim);

/**
 * Admits a request. `duration` < 0 means it never leaves on its own;
 * departures are always explicit through `reshare_simulation_depart`.
 * Times must not go backwards.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum ReshareStatus reshare_simulation_arrive(struct ReshareSimulation *sim,
                                             uint64_t request_id,
                                             uint32_t service_index,
                                             uint32_t leaf,
                                             double time,
                                             double duration,
                                             double load);

/**
 * Removes an active request.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum ReshareStatus reshare_simulation_depart(struct ReshareSimulation *sim,
                                             uint64_t request_id,
                                             double time);

/**
 * Integrates cost up to `time` without an event.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum ReshareStatus reshare_simulation_advance(struct ReshareSimulation *sim, double time);

/**
 * # Safety
 * `sim` must be a live handle; `out` writable.
 */
enum ReshareStatus reshare_simulation_cost(const struct ReshareSimulation *sim,
                                           struct ReshareCost *out);

/**
 * Index of the latency range containing `delay`.
 *
 * # Safety
 * `out` must be writable.
 */
enum ReshareStatus reshare_range_index(double mu_bar,
                                       double lambda_min,
                                       double epsilon,
                                       double delay,
                                       uint32_t *out);

/**
 * Latency of a job served alone at full speed: `1/(mu_bar - theta*load)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum ReshareStatus reshare_solo_latency(double theta, double load, double mu_bar, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RESHARE_H */
