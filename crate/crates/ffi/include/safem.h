/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef SAFEM_H
#define SAFEM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SafemMarking {
  SAFEM_MARKING_DORFLER = 0,
  SAFEM_MARKING_FIXED_FRACTION = 1,
} SafemMarking;

typedef enum SafemMode {
  SAFEM_MODE_AFEM = 0,
  SAFEM_MODE_SAFEM = 1,
} SafemMode;

typedef enum SafemProblem {
  SAFEM_PROBLEM_PEAK = 0,
  SAFEM_PROBLEM_CORNER = 1,
  SAFEM_PROBLEM_DRIFT = 2,
  SAFEM_PROBLEM_SINE = 3,
} SafemProblem;

typedef enum SafemSmoother {
  SAFEM_SMOOTHER_RICHARDSON = 0,
  SAFEM_SMOOTHER_CG = 1,
  SAFEM_SMOOTHER_GMRES = 2,
} SafemSmoother;

typedef enum SafemStatus {
  SAFEM_STATUS_OK = 0,
  SAFEM_STATUS_NULL_POINTER = 1,
  SAFEM_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A tight solve or smoother broke down.
   */
  SAFEM_STATUS_SOLVER_FAILURE = 3,
  /**
   * Marking selected no cell before the last cycle.
   */
  SAFEM_STATUS_EMPTY_MARKING = 4,
  SAFEM_STATUS_IO = 5,
  SAFEM_STATUS_OUT_OF_RANGE = 6,
  SAFEM_STATUS_BUFFER_TOO_SMALL = 7,
  SAFEM_STATUS_INTERNAL = 8,
} SafemStatus;

/**
 * Result of [`safem_run`].
 */
typedef struct SafemRun SafemRun;

/**
 * Run parameters. Fill with [`safem_config_default`] and adjust.
 */
typedef struct SafemConfig {
  enum SafemProblem problem;
  /**
   * Drift strength, only read for `Drift`.
   */
  double beta;
  uint32_t degree;
  uint32_t cycles;
  enum SafemMode mode;
  enum SafemSmoother smoother;
  uint32_t smoothing_steps;
  enum SafemMarking marking;
  /**
   * Θ for Dörfler marking, the fraction otherwise.
   */
  double marking_parameter;
  double tolerance;
  bool diagnostic;
} SafemConfig;

/**
 * One cycle of a finished run.
 */
typedef struct SafemRecord {
  uint32_t cycle;
  uint64_t n_cells;
  uint64_t n_dofs;
  uint32_t smoothing_steps;
  double error_h1;
  double estimator_j;
  /**
   * NaN unless `has_estimator_j_exact`.
   */
  double estimator_j_exact;
  bool has_estimator_j_exact;
  uint64_t solver_iterations;
  uint64_t matvec_count;
  double solve_seconds;
  uint64_t marked_cells;
} SafemRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *safem_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *safem_version(void);

/**
 * Writes the library defaults for `problem` and `degree` into `out`.
 *
 * # Safety
 * `out` must be NULL or point to writable memory for one `SafemConfig`.
 */
enum SafemStatus safem_config_default(enum SafemProblem problem,
                                      uint32_t degree,
                                      struct SafemConfig *out);

/**
 * Runs the adaptive loop. On success `*out` receives a new handle.
 *
 * # Safety
 * `config` must be NULL or point to a valid `SafemConfig`; `out` must be
 * NULL or point to writable storage for one pointer.
 */
enum SafemStatus safem_run(const struct SafemConfig *config, struct SafemRun **out);

/**
 * Releases a handle from [`safem_run`]. NULL is ignored.
 *
 * # Safety
 * `run` must be NULL or a handle not yet freed.
 */
void safem_run_free(struct SafemRun *run);

/**
 * Number of recorded cycles, or 0 for NULL.
 *
 * # Safety
 * `run` must be NULL or a live handle.
 */
size_t safem_run_cycle_count(const struct SafemRun *run);

/**
 * Copies the record of cycle `index` (0-based) into `out`.
 *
 * # Safety
 * `run` must be NULL or a live handle; `out` must be NULL or writable.
 */
enum SafemStatus safem_run_record(const struct SafemRun *run,
                                  size_t index,
                                  struct SafemRecord *out);

/**
 * Copies the final solution coefficients into `buffer`. `*len` holds the
 * buffer capacity on input and the number of coefficients on output; with
 * a NULL buffer only the length is reported.
 *
 * # Safety
 * `run` must be NULL or a live handle; `len` must be NULL or writable;
 * `buffer`, if not NULL, must hold `*len` doubles.
 */
enum SafemStatus safem_run_solution(const struct SafemRun *run, double *buffer, size_t *len);

/**
 * Writes the per-cycle records as CSV to the UTF-8 path `path`.
 *
 * # Safety
 * `run` must be NULL or a live handle; `path` must be NULL or a
 * NUL-terminated string.
 */
enum SafemStatus safem_run_write_csv(const struct SafemRun *run, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SAFEM_H */
