/* Generated by cbindgen. Do not edit. */

#ifndef ASYNCNET_H
#define ASYNCNET_H

#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AsyncnetStatus {
  ASYNCNET_STATUS_OK = 0,
  ASYNCNET_STATUS_NULL_POINTER = 1,
  ASYNCNET_STATUS_INVALID_UTF8 = 2,
  ASYNCNET_STATUS_PARSE = 3,
  ASYNCNET_STATUS_VALIDATION = 4,
  ASYNCNET_STATUS_UNKNOWN_PRESET = 5,
  ASYNCNET_STATUS_TOPOLOGY = 6,
  ASYNCNET_STATUS_MODEL = 7,
  ASYNCNET_STATUS_NUMERICAL = 8,
  ASYNCNET_STATUS_DIVERGENCE = 9,
  ASYNCNET_STATUS_IO = 10,
  ASYNCNET_STATUS_BUFFER_TOO_SMALL = 11,
  ASYNCNET_STATUS_PANIC = 12,
} AsyncnetStatus;

/**
 * Opaque experiment handle.
 */
typedef struct AsyncnetExperiment AsyncnetExperiment;

/**
 * Steady-state predictions (dB) and convergence quantities.
 */
typedef struct AsyncnetTheory {
  double msd_db_dist_sync;
  double msd_db_dist_async;
  double msd_db_cent_sync;
  double msd_db_cent_async;
  double nu;
  double rho_mean;
  double rho_ms_sync;
  double rho_ms_async;
  bool ms_stable;
  bool fourth_stable;
} AsyncnetTheory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates an experiment from a JSON config document.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AsyncnetStatus asyncnet_experiment_from_json(const char *json,
                                                  struct AsyncnetExperiment **out);

/**
 * Creates an experiment from a preset name (`"desk"` or `"paper-fig3"`).
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AsyncnetStatus asyncnet_experiment_from_preset(const char *name,
                                                    struct AsyncnetExperiment **out);

/**
 * Releases an experiment. Null is ignored.
 *
 * # Safety
 * `experiment` must come from one of the constructors and not be freed twice.
 */
void asyncnet_experiment_free(struct AsyncnetExperiment *experiment);

/**
 * Overrides the simulation base seed. Parameter draws keep their seed.
 *
 * # Safety
 * `experiment` must be a live handle.
 */
enum AsyncnetStatus asyncnet_experiment_set_seed(struct AsyncnetExperiment *experiment,
                                                 uint64_t seed);

/**
 * Overrides the trial and iteration counts.
 *
 * # Safety
 * `experiment` must be a live handle.
 */
enum AsyncnetStatus asyncnet_experiment_set_simulation(struct AsyncnetExperiment *experiment,
                                                       size_t trials,
                                                       size_t iterations);

/**
 * Number of agents, or 0 for a null handle.
 *
 * # Safety
 * `experiment` must be a live handle or null.
 */
size_t asyncnet_experiment_n_agents(const struct AsyncnetExperiment *experiment);

/**
 * Computes the steady-state predictions.
 *
 * # Safety
 * `experiment` must be a live handle and `out` a valid pointer.
 */
enum AsyncnetStatus asyncnet_theory(const struct AsyncnetExperiment *experiment,
                                    struct AsyncnetTheory *out);

/**
 * Writes the Perron vector `p̄` of the mean combination matrix into `buffer`.
 * `written` receives the number of agents, also when the buffer is too small.
 *
 * # Safety
 * `buffer` must hold `len` doubles; `written` may be null.
 */
enum AsyncnetStatus asyncnet_perron_vector(const struct AsyncnetExperiment *experiment,
                                           double *buffer,
                                           size_t len,
                                           size_t *written);

/**
 * Runs the full comparison and returns the report as a JSON string, to be
 * released with [`asyncnet_string_free`]. A diverging simulation still
 * returns the partial report, with status `Divergence`.
 *
 * # Safety
 * `experiment` must be a live handle and `out_json` a valid pointer.
 */
enum AsyncnetStatus asyncnet_compare_json(const struct AsyncnetExperiment *experiment,
                                          char **out_json);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void asyncnet_string_free(char *s);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library on the same thread.
 */
const char *asyncnet_last_error_message(void);

/**
 * Library version, static.
 */
const char *asyncnet_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ASYNCNET_H */
