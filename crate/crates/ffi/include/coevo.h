#ifndef COEVO_H
#define COEVO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CoevoStatus {
  COEVO_STATUS_OK = 0,
  COEVO_STATUS_INVALID_ARGUMENT = 1,
  COEVO_STATUS_IO = 2,
  COEVO_STATUS_RUN_FAULT = 3,
  COEVO_STATUS_PROVIDER = 4,
  COEVO_STATUS_SANDBOX = 5,
  COEVO_STATUS_PANIC = 6,
} CoevoStatus;

/**
 * Opaque engine handle.
 */
typedef struct CoevoEngine CoevoEngine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *coevo_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *coevo_version(void);

/**
 * Crossover rate of iteration `r`.
 *
 * # Safety
 * `out` must be a valid pointer to a double.
 */
enum CoevoStatus coevo_crossover_rate(uint32_t r,
                                      double x_init,
                                      double x_final,
                                      uint32_t max_iter,
                                      double *out);

/**
 * Binary entropy of a pass rate.
 *
 * # Safety
 * `out` must be a valid pointer to a double.
 */
enum CoevoStatus coevo_test_discrimination(double pass_rate, double *out);

/**
 * Consensus confidence of each row of a row-major 0/1 matrix.
 *
 * # Safety
 * `bits` must point to `rows * cols` bytes and `out` to `rows` doubles.
 */
enum CoevoStatus coevo_program_confidence(const uint8_t *bits,
                                          size_t rows,
                                          size_t cols,
                                          double *out);

/**
 * Creates an engine from a TOML configuration (null for defaults).
 *
 * # Safety
 * `config_toml` must be null or a nul-terminated string; `out` must be a
 * valid pointer.
 */
enum CoevoStatus coevo_engine_new(const char *config_toml, struct CoevoEngine **out);

/**
 * Runs the engine on one problem (a JSON object). With a non-null
 * `script_path` the scripted provider replays that file; otherwise the
 * configured provider is used. With a non-null `out_dir` the run directory
 * is written there. On success `*result_json` receives the run result.
 *
 * # Safety
 * `engine` must come from [`coevo_engine_new`]; string arguments must be
 * null or nul-terminated; `result_json` must be a valid pointer.
 */
enum CoevoStatus coevo_engine_run(const struct CoevoEngine *engine,
                                  const char *problem_json,
                                  const char *script_path,
                                  const char *out_dir,
                                  char **result_json);

/**
 * Releases an engine. Null is ignored.
 *
 * # Safety
 * `engine` must be null or come from [`coevo_engine_new`], and not be
 * used afterwards.
 */
void coevo_engine_free(struct CoevoEngine *engine);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string returned through an out-pointer of this
 * library, and not be used afterwards.
 */
void coevo_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COEVO_H */
