#ifndef SOBOLEV_ERM_H
#define SOBOLEV_ERM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum SeStatus {
  SE_STATUS_OK = 0,
  SE_STATUS_NULL_POINTER = 1,
  SE_STATUS_DOMAIN = 2,
  SE_STATUS_DIMENSION = 3,
  SE_STATUS_CONFIG = 4,
  SE_STATUS_UNSUPPORTED = 5,
  SE_STATUS_INFEASIBLE = 6,
  SE_STATUS_IDENTIFIABILITY = 7,
  SE_STATUS_NUMERICAL = 8,
  SE_STATUS_IO = 9,
  SE_STATUS_INVALID_UTF8 = 10,
  SE_STATUS_PANIC = 11,
} SeStatus;

// Which family of excess-risk bound to evaluate.
typedef enum SeBoundKind {
  SE_BOUND_KIND_PROBABILITY = 0,
  SE_BOUND_KIND_EXPECTATION = 1,
} SeBoundKind;

// Truncated Fourier basis on `[-L, L]^d`.
typedef struct SeBasis SeBasis;

// Vector field expanded in a basis.
typedef struct SeCoeffs SeCoeffs;

// Problem parameters; see `se_params_default` for the defaults.
typedef struct SeParams {
  uint32_t s;
  uint32_t dx;
  uint32_t dy;
  double sigma_w;
  double theta;
  double persistence;
  double rho_tilde;
  double c_c;
  double c_c_prime;
  double rho_f;
  double c_h_factor;
  double sup_bound;
  double delta;
  double half_width;
} SeParams;

// Excess-risk bound `slow_term + fast_term` at one sample size.
typedef struct SeRateBound {
  double bound;
  double slow_term;
  double fast_term;
  double c_slow;
  double c_fast;
  // Smallest admissible physics weight; NaN for the unregularized bound.
  double lambda_min;
  // Smallest sample size satisfying the burn-in condition (may be inf).
  double burn_in;
  // 1 when some quantity overflowed and was capped at infinity.
  uint8_t overflow;
} SeRateBound;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer
// stays valid until the next call into this library on the same thread.
const char *se_last_error(void);

// Library version as a static NUL-terminated string.
const char *se_version(void);

// Creates the first `size` members of the basis on `[-half_width, half_width]^dim`.
//
// # Safety
// `out` must be valid for one write.
enum SeStatus se_basis_new(size_t dim, double half_width, size_t size, struct SeBasis **out);

// # Safety
// `basis` must be null or a handle from `se_basis_new` not yet freed.
void se_basis_free(struct SeBasis *basis);

// Number of basis members, or 0 for a null handle.
//
// # Safety
// `basis` must be null or a live handle.
size_t se_basis_size(const struct SeBasis *basis);

// Evaluates every basis member at `x` (length `dim`) into `out` (length `size`).
//
// # Safety
// Pointers must be valid for the stated lengths.
enum SeStatus se_basis_eval(const struct SeBasis *basis,
                            const double *x,
                            size_t x_len,
                            double *out,
                            size_t out_len);

// Wraps `out_dim x size` row-major coefficients over `basis`.
//
// # Safety
// `values` must hold `len` doubles and `out` must be valid for one write.
enum SeStatus se_coeffs_new(const struct SeBasis *basis,
                            size_t out_dim,
                            const double *values,
                            size_t len,
                            struct SeCoeffs **out);

// # Safety
// `coeffs` must be null or a live handle.
void se_coeffs_free(struct SeCoeffs *coeffs);

// Writes the input dimension, output dimension and basis size.
//
// # Safety
// All pointers must be valid.
enum SeStatus se_coeffs_shape(const struct SeCoeffs *coeffs,
                              size_t *in_dim,
                              size_t *out_dim,
                              size_t *size);

// Copies the `out_dim x size` coefficients, row-major, into `out`.
//
// # Safety
// `out` must be valid for `len` writes.
enum SeStatus se_coeffs_values(const struct SeCoeffs *coeffs, double *out, size_t len);

// Evaluates the field at `x` (length `in_dim`) into `out` (length `out_dim`).
//
// # Safety
// Pointers must be valid for the stated lengths.
enum SeStatus se_coeffs_eval(const struct SeCoeffs *coeffs,
                             const double *x,
                             size_t x_len,
                             double *out,
                             size_t out_len);

// Reads a coefficient CSV file.
//
// # Safety
// `file` must be a NUL-terminated path and `out` valid for one write.
enum SeStatus se_coeffs_read(const char *file, struct SeCoeffs **out);

// Writes a coefficient CSV file.
//
// # Safety
// `coeffs` must be live and `file` a NUL-terminated path.
enum SeStatus se_coeffs_write(const struct SeCoeffs *coeffs, const char *file);

// Fits the estimator with a Laplacian penalty integrated over the input
// cube. `inputs` is `n x dim` and `targets` is `n x dim`, both row-major.
//
// # Safety
// Arrays must hold `n * dim` doubles each; `out` must be valid for one write.
enum SeStatus se_fit_laplacian(const struct SeBasis *basis,
                               const double *inputs,
                               const double *targets,
                               size_t n,
                               double sobolev_order,
                               double ridge,
                               double physics_weight,
                               struct SeCoeffs **out);

// Closed-form martingale offset complexity of the span of `phi`
// (`t x m`, row-major) against noise `w` (`t x p`, row-major).
//
// # Safety
// Arrays must hold `t * m` and `t * p` doubles; `out` valid for one write.
enum SeStatus se_moc_linear(const double *phi,
                            size_t t,
                            size_t m,
                            const double *w,
                            size_t p,
                            double *out);

// Default problem parameters.
struct SeParams se_params_default(void);

// Excess-risk bound with physics regularization at alignment `r_fstar > 0`.
//
// # Safety
// `params` and `out` must be valid.
enum SeStatus se_rate_bound(enum SeBoundKind kind,
                            double t,
                            double r_fstar,
                            const struct SeParams *params,
                            struct SeRateBound *out);

// Excess-risk bound without physics regularization.
//
// # Safety
// `params` and `out` must be valid.
enum SeStatus se_noreg_bound(enum SeBoundKind kind,
                             double t,
                             const struct SeParams *params,
                             struct SeRateBound *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOBOLEV_ERM_H */
