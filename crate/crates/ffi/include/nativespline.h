#ifndef NATIVESPLINE_H
#define NATIVESPLINE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum NsStatus {
  NS_STATUS_OK = 0,
  NS_STATUS_NULL_POINTER = 1,
  NS_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A mathematical precondition failed (biorthogonality, admissibility, membership).
   */
  NS_STATUS_DOMAIN = 3,
  /**
   * Singular system, non-convergence or another solver failure.
   */
  NS_STATUS_SOLVER = 4,
  NS_STATUS_BUFFER_TOO_SMALL = 5,
  NS_STATUS_PANIC = 6,
} NsStatus;

/**
 * Primary norm of a native space.
 */
typedef enum NsPrimary {
  NS_PRIMARY_L2 = 0,
  NS_PRIMARY_MEASURE = 1,
  NS_PRIMARY_LP = 2,
} NsPrimary;

/**
 * Analysis functionals of a native space.
 */
typedef enum NsPhi {
  NS_PHI_HERMITE_GAUSSIAN = 0,
  NS_PHI_GAUSSIAN = 1,
  NS_PHI_DELTA = 2,
} NsPhi;

/**
 * Opaque derivative operator `D^m`.
 */
typedef struct NsOperator NsOperator;

/**
 * Opaque interpolation solution.
 */
typedef struct NsSolution NsSolution;

/**
 * Opaque native-space specification on the default grid.
 */
typedef struct NsSpace NsSpace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ns_version(void);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len` bytes) and returns the full message length excluding
 * the NUL. Returns 0 when there is no error.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t ns_last_error_message(char *buf, size_t len);

/**
 * Creates `D^m` for `1 <= m <= 4`.
 *
 * # Safety
 * `out_op` must be a valid pointer to writable storage for a handle.
 */
enum NsStatus ns_operator_new(uint32_t m, struct NsOperator **out_op);

/**
 * # Safety
 * `op` must be null or a handle from [`ns_operator_new`] not yet freed.
 */
void ns_operator_free(struct NsOperator *op);

/**
 * Green's function `sign(x) x^(m-1) / (2 (m-1)!)`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum NsStatus ns_green(const struct NsOperator *op, double x, double *value);

/**
 * Interpolation kernel `(-1)^m |x - y|^(2m-1) / (2 (2m-1)!)`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum NsStatus ns_kernel(const struct NsOperator *op, double x, double y, double *value);

/**
 * Minimum-`||D^m f||_2` interpolant of `(xs[i], ys[i])`.
 *
 * # Safety
 * `xs` and `ys` must point to `len` doubles; `out_sol` must be valid.
 */
enum NsStatus ns_solve_l2(const struct NsOperator *op,
                          const double *xs,
                          const double *ys,
                          size_t len,
                          struct NsSolution **out_sol);

/**
 * Minimum-total-variation (`||D^m f||_M`) interpolant with candidate knots
 * `knot_density` per data point (0 selects the default).
 *
 * # Safety
 * As [`ns_solve_l2`].
 */
enum NsStatus ns_solve_gtv(const struct NsOperator *op,
                           const double *xs,
                           const double *ys,
                           size_t len,
                           uint32_t knot_density,
                           struct NsSolution **out_sol);

/**
 * # Safety
 * `sol` must be null or a handle from a solver not yet freed.
 */
void ns_solution_free(struct NsSolution *sol);

/**
 * Objective value, interpolation residual and knot count.
 *
 * # Safety
 * `sol` must be valid; each output may be null to skip it.
 */
enum NsStatus ns_solution_summary(const struct NsSolution *sol,
                                  double *objective,
                                  double *residual,
                                  size_t *knot_count);

/**
 * Copies knots and weights into arrays of capacity `cap`. Fails with
 * `BufferTooSmall` when `cap` is below the knot count.
 *
 * # Safety
 * `knots` and `weights` must point to `cap` writable doubles.
 */
enum NsStatus ns_solution_knots(const struct NsSolution *sol,
                                double *knots,
                                double *weights,
                                size_t cap);

/**
 * Copies the `m` null-space coefficients into `coeffs` (capacity `cap`).
 *
 * # Safety
 * `coeffs` must point to `cap` writable doubles.
 */
enum NsStatus ns_solution_null_coeffs(const struct NsSolution *sol, double *coeffs, size_t cap);

/**
 * Evaluates the interpolant at `xs[0..len]` into `values[0..len]`.
 *
 * # Safety
 * `xs` must point to `len` doubles and `values` to `len` writable doubles.
 */
enum NsStatus ns_solution_evaluate(const struct NsSolution *sol,
                                   const double *xs,
                                   size_t len,
                                   double *values);

/**
 * Smallest kernel quadratic form over `trials` random unit vectors that
 * annihilate the null space at `points`; positive means conditionally
 * positive definite on the sample.
 *
 * # Safety
 * `points` must point to `len` doubles; `min_value` must be valid.
 */
enum NsStatus ns_conditional_pd_min(const struct NsOperator *op,
                                    const double *points,
                                    size_t len,
                                    uint32_t trials,
                                    uint64_t seed,
                                    double *min_value);

/**
 * Native space of `D^m` on the default grid `[-12, 12]`, 4801 nodes.
 * `p` is read only for `NS_PRIMARY_LP`.
 *
 * # Safety
 * `out_space` must be valid.
 */
enum NsStatus ns_space_new(uint32_t m,
                           enum NsPrimary primary,
                           double p,
                           enum NsPhi phi,
                           struct NsSpace **out_space);

/**
 * # Safety
 * `space` must be null or a handle from [`ns_space_new`] not yet freed.
 */
void ns_space_free(struct NsSpace *space);

/**
 * Runs the randomized identity suite; `passed` receives 1 if every
 * invariant holds, else 0, and `failed_count` the number of failures.
 *
 * # Safety
 * Pointers must be valid; `failed_count` may be null.
 */
enum NsStatus ns_identity_suite(const struct NsSpace *space,
                                uint32_t trials,
                                uint64_t seed,
                                int32_t *passed,
                                size_t *failed_count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NATIVESPLINE_H */
