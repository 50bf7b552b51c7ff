#ifndef SIRCONVEX_H
#define SIRCONVEX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result of every fallible call.
 */
typedef enum {
  SIR_STATUS_OK = 0,
  SIR_STATUS_NULL_POINTER = 1,
  SIR_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The engine rejected the input or could not proceed.
   */
  SIR_STATUS_ENGINE = 3,
  /**
   * A caller-provided buffer is too small; the required length was written.
   */
  SIR_STATUS_BUFFER_TOO_SMALL = 4,
  SIR_STATUS_PANIC = 5,
} SirStatus;

typedef enum {
  SIR_CORRELATION_EQUAL = 0,
  SIR_CORRELATION_INDEPENDENT = 1,
} SirCorrelation;

/**
 * Opaque spreading profile.
 */
typedef struct SirProfile SirProfile;

/**
 * Opaque `R(n)` trajectory.
 */
typedef struct SirTrajectory SirTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *sir_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sir_version(void);

/**
 * Single-atom profile `(sigma, iota)`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
SirStatus sir_profile_homogeneous(double sigma, double iota, uint64_t n0, SirProfile **out);

/**
 * Gamma profile of shape `k` quantized to `atom_count` atoms and calibrated
 * to `target_r0`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
SirStatus sir_profile_gamma(double k,
                            SirCorrelation correlation,
                            uint64_t n0,
                            double target_r0,
                            uintptr_t atom_count,
                            SirProfile **out);

/**
 * Profile from `len` atoms given as parallel arrays. Masses are normalized.
 *
 * # Safety
 * `s`, `phi` and `w` must point to `len` readable values; `out` must be valid
 * for writes.
 */
SirStatus sir_profile_explicit(const double *s,
                               const double *phi,
                               const double *w,
                               uintptr_t len,
                               uint64_t n0,
                               SirProfile **out);

/**
 * New profile rescaled so that `R0 == target_r0`.
 *
 * # Safety
 * `profile` must be a live handle; `out` must be valid for writes.
 */
SirStatus sir_profile_calibrate(const SirProfile *profile, double target_r0, SirProfile **out);

/**
 * # Safety
 * `profile` must be a live handle; `out` must be valid for writes.
 */
SirStatus sir_profile_r0(const SirProfile *profile, double *out);

/**
 * # Safety
 * `profile` must be a live handle; `out` must be valid for writes.
 */
SirStatus sir_profile_len(const SirProfile *profile, uintptr_t *out);

/**
 * Releases a profile. Null is ignored.
 *
 * # Safety
 * `profile` must be null or a handle not yet freed.
 */
void sir_profile_free(SirProfile *profile);

/**
 * `R(n)` from step 0 until it drops below 1, plus `overshoot` steps.
 *
 * # Safety
 * `profile` must be a live handle; `out` must be valid for writes.
 */
SirStatus sir_trajectory_compute(const SirProfile *profile,
                                 uint64_t overshoot,
                                 SirTrajectory **out);

/**
 * # Safety
 * `traj` must be a live handle; `out` must be valid for writes.
 */
SirStatus sir_trajectory_len(const SirTrajectory *traj, uintptr_t *out);

/**
 * Copies `R(0), R(1), ...` into `buffer`. Writes the number of values to
 * `written`; if `capacity` is too small nothing is copied and
 * `SIR_STATUS_BUFFER_TOO_SMALL` is returned.
 *
 * # Safety
 * `traj` must be a live handle, `buffer` valid for `capacity` writes and
 * `written` valid for writes.
 */
SirStatus sir_trajectory_values(const SirTrajectory *traj,
                                double *buffer,
                                uintptr_t capacity,
                                uintptr_t *written);

/**
 * First step with `R < 1`. `found` is set to false when `R` never crossed.
 *
 * # Safety
 * `traj` must be a live handle; `step` and `found` must be valid for writes.
 */
SirStatus sir_trajectory_hit_step(const SirTrajectory *traj, uint64_t *step, bool *found);

/**
 * Largest growth of the per-step decrease of `R` and where it occurs.
 *
 * # Safety
 * `traj` must be a live handle; the outputs must be valid for writes.
 */
SirStatus sir_trajectory_check_convexity(const SirTrajectory *traj,
                                         double *max_violation,
                                         uint64_t *location,
                                         bool *passed);

/**
 * Releases a trajectory. Null is ignored.
 *
 * # Safety
 * `traj` must be null or a handle not yet freed.
 */
void sir_trajectory_free(SirTrajectory *traj);

/**
 * Infections before the herd-immunity crossing with `vaccines` doses given
 * at step `timing`.
 *
 * # Safety
 * `profile` must be a live handle; `out` must be valid for writes.
 */
SirStatus sir_cost_of_region(const SirProfile *profile,
                             uint64_t vaccines,
                             uint64_t timing,
                             uint64_t *out);

/**
 * Exact `R(n)` of at most nine individuals by enumeration.
 *
 * # Safety
 * `s` and `phi` must point to `len` readable values; `out` must be valid for
 * writes.
 */
SirStatus sir_brute_force_r(const double *s,
                            const double *phi,
                            uintptr_t len,
                            uintptr_t n,
                            double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIRCONVEX_H */
