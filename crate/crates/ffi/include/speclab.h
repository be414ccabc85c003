#ifndef SPECLAB_H
#define SPECLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SpeclabStatus {
  SPECLAB_STATUS_OK = 0,
  SPECLAB_STATUS_INVALID_ARGUMENT = 1,
  SPECLAB_STATUS_NULL_POINTER = 2,
  SPECLAB_STATUS_POLE = 3,
  SPECLAB_STATUS_DOMAIN = 4,
  SPECLAB_STATUS_CROSS_VALIDATION = 5,
  SPECLAB_STATUS_DISCRETIZATION = 6,
  SPECLAB_STATUS_NUMERICAL = 7,
  SPECLAB_STATUS_IO = 8,
  SPECLAB_STATUS_PANIC = 9,
} SpeclabStatus;

// Opaque structure-function evaluator for one a.
typedef struct SpeclabEvaluator SpeclabEvaluator;

// Opaque tabulated potential μ(u).
typedef struct SpeclabPotential SpeclabPotential;

// Opaque bound-state spectrum.
typedef struct SpeclabSpectrum SpeclabSpectrum;

typedef struct SpeclabComplex {
  double re;
  double im;
} SpeclabComplex;

// Structure functions and scattering solutions at one s.
typedef struct SpeclabPoint {
  struct SpeclabComplex cal_a;
  struct SpeclabComplex cal_b;
  struct SpeclabComplex j;
  struct SpeclabComplex k;
  struct SpeclabComplex e_hat;
  struct SpeclabComplex f_hat;
  struct SpeclabComplex gamma;
} SpeclabPoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the calling thread's last error message (NUL-terminated, truncated
// to `len`) into `buf`. Returns the full message length without the NUL.
// `buf` may be null to query the length.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t speclab_last_error(char *buf, size_t len);

// χ(s) = π^(s−½)Γ((1−s)/2)/Γ(s/2).
//
// # Safety
// `out` must be null or valid for writes.
enum SpeclabStatus speclab_chi(struct SpeclabComplex s, struct SpeclabComplex *out);

// γ(s) = π^(−s/2)Γ(s/2).
//
// # Safety
// `out` must be null or valid for writes.
enum SpeclabStatus speclab_gamma_factor(struct SpeclabComplex s, struct SpeclabComplex *out);

// Smoothed zero count (T/2π)ln(T/2π) − T/2π + 7/8.
//
// # Safety
// `out` must be null or valid for writes.
enum SpeclabStatus speclab_rvm_count(double t, double *out);

// log det(1 + sign·Cₐ); `sign` is +1 or −1.
//
// # Safety
// `out` must be null or valid for writes.
enum SpeclabStatus speclab_log_det(double a, int32_t sign, size_t n, double *out);

// μ(u) by the resolvent route, gated against finite differences.
//
// # Safety
// `out` must be null or valid for writes.
enum SpeclabStatus speclab_mu(double u, size_t n, double *out);

// New evaluator for a with base node count n (memoized internally).
//
// # Safety
// `out` must be null or valid for writes; release with
// [`speclab_evaluator_free`].
enum SpeclabStatus speclab_evaluator_new(double a, size_t n, struct SpeclabEvaluator **out);

// # Safety
// `ev` must be null or a handle from [`speclab_evaluator_new`], not yet freed.
void speclab_evaluator_free(struct SpeclabEvaluator *ev);

// 𝒜, ℬ, J, K, Ê, F̂ and γ at s.
//
// # Safety
// `ev` must be a live handle, `out` valid for writes.
enum SpeclabStatus speclab_evaluator_point(const struct SpeclabEvaluator *ev,
                                           struct SpeclabComplex s,
                                           struct SpeclabPoint *out);

// (Ê(z)Ê(w) − F̂(z)F̂(w))/(z+w−1) with the removable limit at z+w = 1.
//
// # Safety
// `ev` must be a live handle, `out` valid for writes.
enum SpeclabStatus speclab_evaluator_inner(const struct SpeclabEvaluator *ev,
                                           struct SpeclabComplex z,
                                           struct SpeclabComplex w,
                                           struct SpeclabComplex *out);

// Tabulate μ on `steps` intervals of [u_min, u_max].
//
// # Safety
// `out` must be null or valid for writes; release with
// [`speclab_potential_free`].
enum SpeclabStatus speclab_potential_new(double u_min,
                                         double u_max,
                                         size_t steps,
                                         size_t n,
                                         struct SpeclabPotential **out);

// # Safety
// `p` must be null or a handle from [`speclab_potential_new`], not yet freed.
void speclab_potential_free(struct SpeclabPotential *p);

// Interpolated μ(u).
//
// # Safety
// `p` must be a live handle, `out` valid for writes.
enum SpeclabStatus speclab_potential_mu(const struct SpeclabPotential *p, double u, double *out);

// Zeros of 𝒜ₐ₀ on [−E_max, E_max] with their norms.
//
// # Safety
// `out` must be null or valid for writes; release with
// [`speclab_spectrum_free`].
enum SpeclabStatus speclab_bound_states(double a0, double e_max, struct SpeclabSpectrum **out);

// # Safety
// `s` must be null or a handle from [`speclab_bound_states`], not yet freed.
void speclab_spectrum_free(struct SpeclabSpectrum *s);

// Number of eigenvalues in the spectrum.
//
// # Safety
// `s` must be a live handle, `out` valid for writes.
enum SpeclabStatus speclab_spectrum_len(const struct SpeclabSpectrum *s, size_t *out);

// Eigenvalue `i` (ascending) and its norm.
//
// # Safety
// `s` must be a live handle; `energy` and `norm` valid for writes.
enum SpeclabStatus speclab_spectrum_get(const struct SpeclabSpectrum *s,
                                        size_t i,
                                        double *energy,
                                        double *norm);

// Scattering m-function −J(u0, s)/K(u0, s), s = ½ + iE.
//
// # Safety
// `out` must be null or valid for writes.
enum SpeclabStatus speclab_m_scattering(double a0,
                                        struct SpeclabComplex e,
                                        struct SpeclabComplex *out);

// Bound-state m-function −ℬₐ₀(s)/𝒜ₐ₀(s), s = ½ + iE.
//
// # Safety
// `out` must be null or valid for writes.
enum SpeclabStatus speclab_m_bound(double a0, struct SpeclabComplex e, struct SpeclabComplex *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SPECLAB_H */
