#ifndef ROOTLIP_H
#define ROOTLIP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  /**
   * Bounded interval (0, L); the parameter is L.
   */
  RL_CASE_KIND_INTERVAL = 0,
  /**
   * Whole line; the parameter is γ.
   */
  RL_CASE_KIND_LINE = 1,
  /**
   * Half-line (0, ∞); the parameter is γ.
   */
  RL_CASE_KIND_HALF_LINE = 2,
} RlCaseKind;

typedef enum {
  RL_SOLVE_STATUS_COMPLETED = 0,
  RL_SOLVE_STATUS_BLOWUP_DETECTED = 1,
  RL_SOLVE_STATUS_STEP_FAILURE = 2,
} RlSolveStatus;

/**
 * Result code of every `rl_*` call.
 */
typedef enum {
  RL_STATUS_OK = 0,
  RL_STATUS_NULL_POINTER = 1,
  RL_STATUS_INVALID_UTF8 = 2,
  RL_STATUS_INVALID_CONFIG = 3,
  RL_STATUS_INVALID_INPUT = 4,
  RL_STATUS_SOLVER_FAILURE = 5,
  RL_STATUS_OUT_OF_RANGE = 6,
  RL_STATUS_BUFFER_TOO_SMALL = 7,
  RL_STATUS_PANIC = 8,
} RlStatus;

/**
 * A finished solve: snapshots, trust regions and status.
 */
typedef struct RlSolution RlSolution;

/**
 * A change of variables ζ for one domain case.
 */
typedef struct RlTransform RlTransform;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *rl_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next `rl_*` call on the same thread.
 */
const char *rl_last_error(void);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must be NULL or a pointer returned by this library and not yet freed.
 */
void rl_string_free(char *s);

/**
 * s(t) = 2/(2/s0 − t), the blow-up curve of ∂x²u at the boundary.
 *
 * # Safety
 * `out` must be NULL or point to writable memory for one double.
 */
RlStatus rl_riccati_reference(double s0, double t, double *out);

/**
 * Build the default transform for a case. `param` is L for the interval
 * and γ otherwise.
 *
 * # Safety
 * `out` must be NULL or point to writable memory for one pointer.
 */
RlStatus rl_transform_new(RlCaseKind kind, double param, double kappa, double k, RlTransform **out);

/**
 * # Safety
 * `t` must be NULL or a handle from [`rl_transform_new`] not yet freed.
 */
void rl_transform_free(RlTransform *t);

/**
 * Computational box [y_min, y_max] of the transform.
 *
 * # Safety
 * `t` must be a live handle; `y_min` and `y_max` writable doubles.
 */
RlStatus rl_transform_y_range(const RlTransform *t, double *y_min, double *y_max);

/**
 * x = ζ(y) together with ζ'(y).
 *
 * # Safety
 * `t` must be a live handle; `x` and `dx_dy` writable doubles.
 */
RlStatus rl_transform_zeta(const RlTransform *t, double y, double *x, double *dx_dy);

/**
 * y = ζ⁻¹(x) for x in the image of ζ.
 *
 * # Safety
 * `t` must be a live handle; `y` a writable double.
 */
RlStatus rl_transform_inverse(const RlTransform *t, double x, double *y);

/**
 * Solve from a scenario config (JSON, the CLI's schema). Only the case,
 * `u0`, `solver` and `y_range` sections are used.
 *
 * # Safety
 * `config_json` must be NULL or a NUL-terminated string; `out` must be
 * NULL or point to writable memory for one pointer.
 */
RlStatus rl_solve(const char *config_json, RlSolution **out);

/**
 * # Safety
 * `s` must be NULL or a handle from [`rl_solve`] not yet freed.
 */
void rl_solution_free(RlSolution *s);

/**
 * Terminal status; `t_stop` is the final time, or the estimated blow-up
 * time when one was detected.
 *
 * # Safety
 * `s` must be a live handle; `status` and `t_stop` writable.
 */
RlStatus rl_solution_status(const RlSolution *s, RlSolveStatus *status, double *t_stop);

/**
 * Number of stored snapshots, including t = 0.
 *
 * # Safety
 * `s` must be a live handle; `count` writable.
 */
RlStatus rl_solution_snapshot_count(const RlSolution *s, size_t *count);

/**
 * Copy snapshot `k` over its trusted nodes into `x` and `u`, each of
 * capacity `cap`. `len` receives the node count; when it exceeds `cap`
 * nothing is copied and `RL_STATUS_BUFFER_TOO_SMALL` is returned, so a
 * call with `cap = 0` queries the size.
 *
 * # Safety
 * `s` must be a live handle; `t` and `len` writable; `x` and `u` must each
 * hold `cap` doubles (they may be NULL when `cap` is 0).
 */
RlStatus rl_solution_snapshot(const RlSolution *s,
                              size_t k,
                              double *t,
                              double *x,
                              double *u,
                              size_t cap,
                              size_t *len);

/**
 * Run a full scenario in memory (no files are written). `exit_code`
 * receives the CLI exit code; `report_json` receives the report document,
 * to be released with [`rl_string_free`].
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `exit_code` and
 * `report_json` must be writable.
 */
RlStatus rl_run_scenario(const char *config_json, int32_t *exit_code, char **report_json);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* ROOTLIP_H */
