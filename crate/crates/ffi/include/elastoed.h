#ifndef ELASTOED_H
#define ELASTOED_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a C API call. Codes 2 to 6 match the command line exit codes.
 */
typedef enum ElastoedStatus {
  ELASTOED_STATUS_OK = 0,
  ELASTOED_STATUS_INVALID_CONFIG = 2,
  ELASTOED_STATUS_GEOMETRY = 3,
  ELASTOED_STATUS_NUMERICAL = 4,
  ELASTOED_STATUS_DIMENSION = 5,
  ELASTOED_STATUS_IO = 6,
  ELASTOED_STATUS_NULL_POINTER = 10,
  ELASTOED_STATUS_INVALID_UTF8 = 11,
  ELASTOED_STATUS_BUFFER_TOO_SMALL = 12,
  ELASTOED_STATUS_PANIC = 13,
} ElastoedStatus;

/**
 * Experiment settings.
 */
typedef struct ElastoedConfig ElastoedConfig;

/**
 * Assembled forward and Gaussian model for one configuration.
 */
typedef struct ElastoedProblem ElastoedProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of the calling thread into `buffer` as a
 * NUL-terminated string and returns its length including the terminator.
 * Nothing is written when `buffer` is null or `capacity` is too small.
 *
 * # Safety
 * `buffer` must be null or valid for `capacity` bytes.
 */
size_t elastoed_last_error(char *buffer, size_t capacity);

/**
 * Library version as a static NUL-terminated string.
 */
const char *elastoed_version(void);

/**
 * Default configuration. Never returns null.
 */
struct ElastoedConfig *elastoed_config_new(void);

/**
 * Parses `key = value` lines over the defaults into a new configuration.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ElastoedStatus elastoed_config_parse(const char *text, struct ElastoedConfig **out);

/**
 * Sets one configuration key.
 *
 * # Safety
 * `config` must come from this library; `key` and `value` must be
 * NUL-terminated strings.
 */
enum ElastoedStatus elastoed_config_set(struct ElastoedConfig *config,
                                        const char *key,
                                        const char *value);

/**
 * Releases a configuration; null is ignored.
 *
 * # Safety
 * `config` must be null or come from this library and not be used again.
 */
void elastoed_config_free(struct ElastoedConfig *config);

/**
 * Runs the configured experiment and writes its files to the output
 * directory. `out_phi` may be null.
 *
 * # Safety
 * `config` must come from this library; `out_phi` must be null or valid.
 */
enum ElastoedStatus elastoed_run(const struct ElastoedConfig *config, double *out_phi);

/**
 * Builds the mesh, factorizes the operator and prepares the model.
 *
 * # Safety
 * `config` must come from this library and `out` be a valid pointer.
 */
enum ElastoedStatus elastoed_problem_new(const struct ElastoedConfig *config,
                                         struct ElastoedProblem **out);

/**
 * Releases a problem; null is ignored.
 *
 * # Safety
 * `problem` must be null or come from this library and not be used again.
 */
void elastoed_problem_free(struct ElastoedProblem *problem);

/**
 * Boundary length `L`, or NaN for a null problem.
 *
 * # Safety
 * `problem` must be null or come from this library.
 */
double elastoed_problem_length(const struct ElastoedProblem *problem);

/**
 * Number of activations the configured search places, or 0 for null.
 *
 * # Safety
 * `problem` must be null or come from this library.
 */
size_t elastoed_problem_activations(const struct ElastoedProblem *problem);

/**
 * Number of unknown parameters `2N`, or 0 for null.
 *
 * # Safety
 * `problem` must be null or come from this library.
 */
size_t elastoed_problem_parameters(const struct ElastoedProblem *problem);

/**
 * `Φ_A` at the `len` positions in `design`.
 *
 * # Safety
 * `problem` must come from this library, `design_values` be valid for `len`
 * values and `out_phi` be a valid pointer.
 */
enum ElastoedStatus elastoed_problem_evaluate(const struct ElastoedProblem *problem,
                                              const double *design_values,
                                              size_t len,
                                              double *out_phi);

/**
 * `Φ_A` and its gradient; `out_gradient` receives `len` values.
 *
 * # Safety
 * `problem` must come from this library, `design_values` and `out_gradient` be
 * valid for `len` values and `out_phi` be a valid pointer.
 */
enum ElastoedStatus elastoed_problem_gradient(const struct ElastoedProblem *problem,
                                              const double *design_values,
                                              size_t len,
                                              double *out_phi,
                                              double *out_gradient);

/**
 * Runs the configured search without writing files. `out_design` receives
 * [`elastoed_problem_activations`] positions; `capacity` is its length.
 *
 * # Safety
 * `problem` must come from this library, `out_design` be valid for
 * `capacity` values and `out_phi` be a valid pointer.
 */
enum ElastoedStatus elastoed_problem_optimize(struct ElastoedProblem *problem,
                                              double *out_design,
                                              size_t capacity,
                                              double *out_phi);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ELASTOED_H */
