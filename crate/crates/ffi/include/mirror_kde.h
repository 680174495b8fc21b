#ifndef MIRROR_KDE_H
#define MIRROR_KDE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MkdeKernel {
  MKDE_KERNEL_EPANECHNIKOV = 0,
  MKDE_KERNEL_GAUSSIAN = 1,
  MKDE_KERNEL_UNIFORM = 2,
} MkdeKernel;

typedef enum MkdeMethod {
  MKDE_METHOD_RULE_OF_THUMB = 0,
  // Cross-validation summed over all mirror copies.
  MKDE_METHOD_LSCV = 1,
  // Cross-validation summed over the original points only.
  MKDE_METHOD_LSCV_ORIGINAL = 2,
  MKDE_METHOD_LSCV_GAMMA = 3,
  MKDE_METHOD_BCV = 4,
} MkdeMethod;

typedef enum MkdeScaling {
  // rank / (n + 1)
  MKDE_SCALING_OVER_N_PLUS1 = 0,
  // rank / n
  MKDE_SCALING_OVER_N = 1,
} MkdeScaling;

// Status codes.
typedef enum MkdeStatus {
  MKDE_STATUS_OK = 0,
  MKDE_STATUS_NULL_POINTER = 1,
  MKDE_STATUS_INVALID_ARGUMENT = 2,
  MKDE_STATUS_SAMPLE_TOO_SMALL = 3,
  MKDE_STATUS_DEGENERATE_SAMPLE = 4,
  MKDE_STATUS_DEGENERATE_REFERENCE = 5,
  MKDE_STATUS_NON_FINITE = 6,
  MKDE_STATUS_NO_CONVERGENCE = 7,
  MKDE_STATUS_BUFFER_TOO_SMALL = 8,
  MKDE_STATUS_INTERNAL = 99,
} MkdeStatus;

// A fitted mirror-reflection density estimator.
typedef struct MkdeEstimator MkdeEstimator;

// Pseudo-observations built from a raw bivariate sample.
typedef struct MkdeSample MkdeSample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *mkde_version(void);

// Copy the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length excluding the NUL,
// or 0 if there is none.
//
// # Safety
// `buf` must be null or valid for `len` writes.
size_t mkde_last_error(char *buf, size_t len);

// Rank-transform `n` pairs `(x[i], y[i])` into a new sample handle.
//
// # Safety
// `x` and `y` must be valid for `n` reads; `out` must be valid for a write.
enum MkdeStatus mkde_sample_new(const double *x,
                                const double *y,
                                size_t n,
                                enum MkdeScaling scaling,
                                struct MkdeSample **out);

// # Safety
// `sample` must be null or a handle from [`mkde_sample_new`] not yet freed.
void mkde_sample_free(struct MkdeSample *sample);

// # Safety
// `sample` must be a live handle; `out` must be valid for a write.
enum MkdeStatus mkde_sample_len(const struct MkdeSample *sample, size_t *out);

// Copy the pseudo-observations into `u` and `v`, each with room for `len`
// values.
//
// # Safety
// `sample` must be a live handle; `u` and `v` must be valid for `len` writes.
enum MkdeStatus mkde_sample_pseudo(const struct MkdeSample *sample,
                                   double *u,
                                   double *v,
                                   size_t len);

// Select a bandwidth. Data-driven methods minimize over the `grid_len`
// candidates in `grid` (strictly increasing, at least 10); the rule of
// thumb ignores the grid.
//
// # Safety
// `sample` must be a live handle; `grid` must be valid for `grid_len`
// reads; `out_h` must be valid for a write.
enum MkdeStatus mkde_select_bandwidth(const struct MkdeSample *sample,
                                      enum MkdeMethod method,
                                      enum MkdeKernel kernel,
                                      const double *grid,
                                      size_t grid_len,
                                      double *out_h);

// Build an estimator with bandwidth `h` in (0, 1].
//
// # Safety
// `sample` must be a live handle; `out` must be valid for a write.
enum MkdeStatus mkde_estimator_new(const struct MkdeSample *sample,
                                   double h,
                                   enum MkdeKernel kernel,
                                   struct MkdeEstimator **out);

// # Safety
// `est` must be null or a handle from [`mkde_estimator_new`] not yet freed.
void mkde_estimator_free(struct MkdeEstimator *est);

// # Safety
// `est` must be a live handle; `out` must be valid for a write.
enum MkdeStatus mkde_estimator_bandwidth(const struct MkdeEstimator *est, double *out);

// Density at `n` points; zero outside the unit square.
//
// # Safety
// `est` must be a live handle; `u`, `v` must be valid for `n` reads and
// `out` for `n` writes.
enum MkdeStatus mkde_estimator_eval(const struct MkdeEstimator *est,
                                    const double *u,
                                    const double *v,
                                    size_t n,
                                    double *out);

// Density on a `resolution` x `resolution` grid of equally spaced nodes
// covering [0, 1]², row-major with `u` varying slowest.
//
// # Safety
// `est` must be a live handle; `out` must be valid for `len` writes.
enum MkdeStatus mkde_estimator_grid(const struct MkdeEstimator *est,
                                    size_t resolution,
                                    double *out,
                                    size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIRROR_KDE_H */
