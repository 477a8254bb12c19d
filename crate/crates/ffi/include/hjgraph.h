#ifndef HJGRAPH_H
#define HJGRAPH_H

/* This header is generated by cbindgen from hjgraph-ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum HjgStatus {
  HJG_STATUS_OK = 0,
  HJG_STATUS_NULL_POINTER = 1,
  HJG_STATUS_UTF8_ERROR = 2,
  HJG_STATUS_CONFIG_ERROR = 3,
  HJG_STATUS_INTERNAL_ERROR = 4,
} HjgStatus;

/**
 * Opaque scenario handle.
 */
typedef struct HjgScenario HjgScenario;

/**
 * Opaque solution handle: a solved value grid plus the output sign of
 * the scenario orientation.
 */
typedef struct HjgSolution HjgSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; do not free.
 */
const char *hjg_version(void);

/**
 * Returns the last error message on this thread as a newly allocated
 * string (free with [`hjg_string_free`]), or NULL if none.
 */
char *hjg_last_error_message(void);

/**
 * Frees a string allocated by this library.
 *
 * # Safety
 * `s` must have been returned by an hjgraph function and not freed yet.
 */
void hjg_string_free(char *s);

/**
 * Loads and validates a scenario file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum HjgStatus hjg_scenario_load(const char *path, struct HjgScenario **out);

/**
 * Releases a scenario handle.
 *
 * # Safety
 * `s` must come from [`hjg_scenario_load`] and not be freed twice.
 */
void hjg_scenario_free(struct HjgScenario *s);

/**
 * Number of lattice nodes of a loaded scenario (0 on null).
 *
 * # Safety
 * `s` must be a valid scenario handle or NULL.
 */
uintptr_t hjg_scenario_node_count(const struct HjgScenario *s);

/**
 * Solves the scenario and returns a solution handle.
 *
 * # Safety
 * `s` must be a valid scenario handle; `out` a valid pointer.
 */
enum HjgStatus hjg_solve(const struct HjgScenario *s, struct HjgSolution **out);

/**
 * Releases a solution handle.
 *
 * # Safety
 * `s` must come from [`hjg_solve`] and not be freed twice.
 */
void hjg_solution_free(struct HjgSolution *s);

/**
 * Number of lattice nodes (0 on null).
 *
 * # Safety
 * `s` must be a valid solution handle or NULL.
 */
uintptr_t hjg_solution_node_count(const struct HjgSolution *s);

/**
 * Number of time steps (0 on null).
 *
 * # Safety
 * `s` must be a valid solution handle or NULL.
 */
uintptr_t hjg_solution_step_count(const struct HjgSolution *s);

/**
 * Time step of the solution grid (0 on null).
 *
 * # Safety
 * `s` must be a valid solution handle or NULL.
 */
double hjg_solution_dt(const struct HjgSolution *s);

/**
 * Location of lattice node `node` as (edge id, offset).
 *
 * # Safety
 * All pointers must be valid; `s` a valid solution handle.
 */
enum HjgStatus hjg_solution_node_location(const struct HjgSolution *s,
                                          uintptr_t node,
                                          uintptr_t *out_edge,
                                          double *out_offset);

/**
 * U at lattice node `node` and time index `step`.
 *
 * # Safety
 * All pointers must be valid; `s` a valid solution handle.
 */
enum HjgStatus hjg_solution_value(const struct HjgSolution *s,
                                  uintptr_t node,
                                  uintptr_t step,
                                  double *out);

/**
 * U interpolated at an arbitrary point (edge id, offset) and time t.
 *
 * # Safety
 * All pointers must be valid; `s` a valid solution handle.
 */
enum HjgStatus hjg_solution_value_at(const struct HjgSolution *s,
                                     uintptr_t edge,
                                     double offset,
                                     double t,
                                     double *out);

/**
 * Solves and runs the full verification suite; writes 1 to `out_passed`
 * iff every check passes.
 *
 * # Safety
 * `s` must be a valid scenario handle; `out_passed` a valid pointer.
 */
enum HjgStatus hjg_verify(const struct HjgScenario *s, int *out_passed);

/**
 * File-level entry point mirroring the CLI: runs `command` on the
 * scenario at `path`, writing outputs under `out_dir`. As in the CLI,
 * a verify run with failing checks reports `ConfigError`-level status 0
 * via `out_passed`, not an error.
 *
 * # Safety
 * `path`, `command`, `out_dir` must be NUL-terminated strings;
 * `out_passed` must be a valid pointer.
 */
enum HjgStatus hjg_run_command(const char *path,
                               const char *command,
                               const char *out_dir,
                               int *out_passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HJGRAPH_H */
