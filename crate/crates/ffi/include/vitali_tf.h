/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef VITALI_TF_H
#define VITALI_TF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum VtfStatus {
  VTF_STATUS_OK = 0,
  VTF_STATUS_NULL_POINTER = 1,
  VTF_STATUS_INVALID_ARGUMENT = 2,
  VTF_STATUS_SHAPE = 3,
  VTF_STATUS_NUMERICAL = 4,
  VTF_STATUS_NOT_CONVERGED = 5,
  VTF_STATUS_IO = 6,
  VTF_STATUS_FORMAT = 7,
  VTF_STATUS_PANIC = 8,
} VtfStatus;

/**
 * Solver used by [`vtf_fit_margin`] and [`vtf_fit_anova`].
 */
typedef enum VtfSolver {
  VTF_SOLVER_ACTIVE_SET = 0,
  VTF_SOLVER_ACCELERATED_PROXIMAL_GRADIENT = 1,
  VTF_SOLVER_COORDINATE_DESCENT = 2,
} VtfSolver;

/**
 * Opaque fit: the estimate and its diagnostics.
 */
typedef struct VtfFit VtfFit;

/**
 * Opaque dense tensor.
 */
typedef struct VtfTensor VtfTensor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the message of the last failed call on this thread into `buf`
 * (NUL-terminated, truncated to `cap - 1` bytes) and returns the full
 * message length in bytes, excluding the terminator.
 *
 * # Safety
 * `buf` must be null or point to `cap` writable bytes.
 */
size_t vtf_last_error_message(char *buf, size_t cap);

/**
 * Library version as a static NUL-terminated string.
 */
const char *vtf_version(void);

/**
 * Creates a tensor of shape `shape[0..ndim]` from `data[0..len]`, where `len`
 * must equal the product of the extents.
 *
 * # Safety
 * `shape` and `data` must point to `ndim` and `len` readable elements; `out` must be writable.
 */
enum VtfStatus vtf_tensor_new(const size_t *shape,
                              size_t ndim,
                              const double *data,
                              size_t len,
                              struct VtfTensor **out);

/**
 * Releases a tensor; null is ignored.
 *
 * # Safety
 * `t` must be null or a handle returned by this library that was not freed yet.
 */
void vtf_tensor_free(struct VtfTensor *t);

/**
 * Number of axes, or 0 for a null handle.
 *
 * # Safety
 * `t` must be null or a live tensor handle.
 */
size_t vtf_tensor_ndim(const struct VtfTensor *t);

/**
 * Number of entries, or 0 for a null handle.
 *
 * # Safety
 * `t` must be null or a live tensor handle.
 */
size_t vtf_tensor_len(const struct VtfTensor *t);

/**
 * Writes the extents into `shape[0..cap]`; `cap` must be at least the number of axes.
 *
 * # Safety
 * `t` must be a live tensor handle and `shape` must point to `cap` writable elements.
 */
enum VtfStatus vtf_tensor_shape(const struct VtfTensor *t, size_t *shape, size_t cap);

/**
 * Writes the entries into `data[0..cap]`; `cap` must be at least the number of entries.
 *
 * # Safety
 * `t` must be a live tensor handle and `data` must point to `cap` writable elements.
 */
enum VtfStatus vtf_tensor_data(const struct VtfTensor *t, double *data, size_t cap);

/**
 * Reads a `VTF1` file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` must be writable.
 */
enum VtfStatus vtf_tensor_load(const char *path, struct VtfTensor **out);

/**
 * Writes a `VTF1` file.
 *
 * # Safety
 * `t` must be a live tensor handle and `path` a NUL-terminated string.
 */
enum VtfStatus vtf_tensor_save(const struct VtfTensor *t, const char *path);

/**
 * `TV_k(t) = ||D^k t||_1`.
 *
 * # Safety
 * `t` must be a live tensor handle and `out` must be writable.
 */
enum VtfStatus vtf_vitali_tv(const struct VtfTensor *t, size_t k, double *out);

/**
 * Smallest penalty level at which the full-margin fit of `y` is zero.
 *
 * # Safety
 * `y` must be a live tensor handle and `out` must be writable.
 */
enum VtfStatus vtf_lambda_max(const struct VtfTensor *y, size_t k, double *out);

/**
 * Universal penalty level for noise level `sigma` and `n` entries.
 */
double vtf_universal_lambda(double sigma, size_t n);

/**
 * Fits the full margin of `y` at penalty `lambda` and returns the estimate
 * `fitted + (y - y_perp)`, which adds back the polynomial null-space part.
 * A run that stops before convergence still returns its fit with status
 * `NotConverged`.
 *
 * # Safety
 * `y` must be a live tensor handle and `out` must be writable.
 */
enum VtfStatus vtf_fit_margin(const struct VtfTensor *y,
                              size_t k,
                              double lambda,
                              enum VtfSolver solver,
                              struct VtfFit **out);

/**
 * Fits every ANOVA margin of `y`, each at `scale` times its universal level
 * for noise level `sigma`.
 *
 * # Safety
 * `y` must be a live tensor handle and `out` must be writable.
 */
enum VtfStatus vtf_fit_anova(const struct VtfTensor *y,
                             size_t k,
                             double sigma,
                             double scale,
                             enum VtfSolver solver,
                             struct VtfFit **out);

/**
 * Releases a fit; null is ignored.
 *
 * # Safety
 * `f` must be null or a handle returned by this library that was not freed yet.
 */
void vtf_fit_free(struct VtfFit *f);

/**
 * Copies the estimate into a new tensor owned by the caller.
 *
 * # Safety
 * `f` must be a live fit handle and `out` must be writable.
 */
enum VtfStatus vtf_fit_fitted(const struct VtfFit *f, struct VtfTensor **out);

/**
 * Penalty level of the full margin.
 *
 * # Safety
 * `f` must be null or a live fit handle; null yields NaN.
 */
double vtf_fit_lambda(const struct VtfFit *f);

/**
 * Objective value of a full-margin fit; NaN for ANOVA fits.
 *
 * # Safety
 * `f` must be null or a live fit handle; null yields NaN.
 */
double vtf_fit_objective(const struct VtfFit *f);

/**
 * Largest KKT residual over the fitted margins.
 *
 * # Safety
 * `f` must be null or a live fit handle; null yields NaN.
 */
double vtf_fit_kkt_residual(const struct VtfFit *f);

/**
 * Solver iterations (the maximum over margins for ANOVA fits).
 *
 * # Safety
 * `f` must be null or a live fit handle; null yields 0.
 */
size_t vtf_fit_iterations(const struct VtfFit *f);

/**
 * Number of nonzero coefficients (summed over margins for ANOVA fits).
 *
 * # Safety
 * `f` must be null or a live fit handle; null yields 0.
 */
size_t vtf_fit_support(const struct VtfFit *f);

/**
 * Whether every solve met its KKT tolerance.
 *
 * # Safety
 * `f` must be null or a live fit handle; null yields false.
 */
bool vtf_fit_converged(const struct VtfFit *f);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VITALI_TF_H */
