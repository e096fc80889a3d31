#ifndef WHICHWAY_H
#define WHICHWAY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WwmStatus {
  WWM_STATUS_OK = 0,
  WWM_STATUS_NULL_POINTER = 1,
  WWM_STATUS_INVALID_ARGUMENT = 2,
  WWM_STATUS_DOMAIN = 3,
  WWM_STATUS_NODE = 4,
  WWM_STATUS_EMPTY_PIXEL = 5,
  WWM_STATUS_DETECTOR = 6,
  WWM_STATUS_RECONSTRUCTION = 7,
  WWM_STATUS_NUMERICAL = 8,
  WWM_STATUS_PANIC = 9,
  WWM_STATUS_BUFFER_TOO_SMALL = 10,
} WwmStatus;

/**
 * Opaque analytic field for one relative phase.
 */
typedef struct WwmField WwmField;

/**
 * Opaque pair of phi = 0 and phi = pi trajectory ensembles.
 */
typedef struct WwmSimulation WwmSimulation;

/**
 * Geometry in metres. The plane list is passed separately.
 */
typedef struct WwmApparatus {
  double slit_separation;
  double packet_waist;
  double wavelength;
} WwmApparatus;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buffer`, NUL
 * terminated. `needed` receives the size including the terminator; it is
 * 1 when there is no message.
 *
 * # Safety
 * `buffer` must point to `capacity` writable bytes or be null with
 * `capacity == 0`; `needed` may be null.
 */
enum WwmStatus wwm_last_error_message(char *buffer, size_t capacity, size_t *needed);

/**
 * # Safety
 * `out_apparatus` must be a valid pointer.
 */
enum WwmStatus wwm_apparatus_reference(struct WwmApparatus *out_apparatus);

/**
 * Lower bound `(2/pi)(1 - V)` on the mean absolute disturbance [hbar/d].
 *
 * # Safety
 * `out_bound` must be a valid pointer.
 */
enum WwmStatus wwm_bound(double visibility, double *out_bound);

/**
 * Weak momentum estimate [hbar/d] from circular-polarisation counts.
 *
 * # Safety
 * `apparatus` and `out_momentum` must be valid pointers.
 */
enum WwmStatus wwm_invert_counts(double right,
                                 double left,
                                 double coupling,
                                 const struct WwmApparatus *apparatus,
                                 double *out_momentum);

/**
 * Creates the analytic field for relative phase `phase`. `planes` may be
 * null with `n_planes == 0` for the reference plane list.
 *
 * # Safety
 * `apparatus` must be valid, `planes` must hold `n_planes` values, and
 * `out_field` must be a valid pointer. Free the handle with
 * [`wwm_field_free`].
 */
enum WwmStatus wwm_field_new(const struct WwmApparatus *apparatus,
                             const double *planes,
                             size_t n_planes,
                             double phase,
                             struct WwmField **out_field);

/**
 * # Safety
 * `field` must come from [`wwm_field_new`] and not be used afterwards.
 */
void wwm_field_free(struct WwmField *field);

/**
 * Probability density [1/m] at `(x, z)` in metres.
 *
 * # Safety
 * `field` and `out_intensity` must be valid pointers.
 */
enum WwmStatus wwm_field_intensity(const struct WwmField *field,
                                   double x,
                                   double z,
                                   double *out_intensity);

/**
 * Transverse momentum [hbar/d] and velocity ratio v/c at `(x, z)`.
 *
 * # Safety
 * `field` must be valid; either out pointer may be null.
 */
enum WwmStatus wwm_field_momentum(const struct WwmField *field,
                                  double x,
                                  double z,
                                  double *out_momentum,
                                  double *out_velocity_ratio);

/**
 * Seeds `n_per_slit` trajectories per slit and integrates both phases.
 * `substeps == 0` selects the plane-to-plane Euler scheme, otherwise RK4
 * with that many substeps per interval.
 *
 * # Safety
 * As for [`wwm_field_new`]; free with [`wwm_simulation_free`].
 */
enum WwmStatus wwm_simulation_new(const struct WwmApparatus *apparatus,
                                  const double *planes,
                                  size_t n_planes,
                                  size_t n_per_slit,
                                  uint32_t substeps,
                                  struct WwmSimulation **out_simulation);

/**
 * # Safety
 * `simulation` must come from [`wwm_simulation_new`] and not be used
 * afterwards.
 */
void wwm_simulation_free(struct WwmSimulation *simulation);

/**
 * Number of trajectories per phase and number of planes.
 *
 * # Safety
 * `simulation` must be valid; either out pointer may be null.
 */
enum WwmStatus wwm_simulation_shape(const struct WwmSimulation *simulation,
                                    size_t *out_trajectories,
                                    size_t *out_planes);

/**
 * Position [m] of trajectory `index` on plane `plane`; `disturbed` selects
 * the phi = pi ensemble. NaN after a trajectory stopped at a node.
 *
 * # Safety
 * `simulation` and `out_position` must be valid pointers.
 */
enum WwmStatus wwm_simulation_position(const struct WwmSimulation *simulation,
                                       bool disturbed,
                                       size_t index,
                                       size_t plane,
                                       double *out_position);

/**
 * Mean absolute momentum disturbance [hbar/d] of the `eta0` mixture on
 * `plane`, smoothed with a Gaussian of width `sigma` [hbar/d] using paired
 * trajectories.
 *
 * # Safety
 * `simulation` and `out_mean_abs` must be valid pointers.
 */
enum WwmStatus wwm_simulation_mean_abs(const struct WwmSimulation *simulation,
                                       size_t plane,
                                       double eta0,
                                       double sigma,
                                       double *out_mean_abs);

/**
 * Slit separation [m] the simulation was built with.
 *
 * # Safety
 * `simulation` and `out_separation` must be valid pointers.
 */
enum WwmStatus wwm_simulation_slit_separation(const struct WwmSimulation *simulation,
                                              double *out_separation);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WHICHWAY_H */
