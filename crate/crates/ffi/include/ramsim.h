#ifndef RAMSIM_H
#define RAMSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum RamsimStatus {
  RAMSIM_STATUS_OK = 0,
  RAMSIM_STATUS_NULL_POINTER = 1,
  RAMSIM_STATUS_INVALID_UTF8 = 2,
  /**
   * Scenario text or file rejected.
   */
  RAMSIM_STATUS_CONFIG = 3,
  RAMSIM_STATUS_INVALID_PARAMETER = 4,
  /**
   * A numerical routine failed (non-convergence, too few samples).
   */
  RAMSIM_STATUS_NUMERICAL = 5,
  RAMSIM_STATUS_BUFFER_TOO_SMALL = 6,
  RAMSIM_STATUS_IO = 7,
  /**
   * Internal panic caught at the boundary.
   */
  RAMSIM_STATUS_PANIC = 8,
} RamsimStatus;

typedef enum RamsimApertureKind {
  RAMSIM_APERTURE_KIND_FULL_PLANE = 0,
  /**
   * Blocks `x < edge_x`.
   */
  RAMSIM_APERTURE_KIND_HALF_PLANE_SCREEN = 1,
  RAMSIM_APERTURE_KIND_OFFSET_RECT = 2,
} RamsimApertureKind;

/**
 * Opaque parsed scenario.
 */
typedef struct RamsimScenario RamsimScenario;

/**
 * Gaussian spatial mode (SI units).
 */
typedef struct RamsimMode {
  double w0;
  double center_x;
  double tilt;
  double wavelength;
} RamsimMode;

/**
 * Detector aperture; fields not used by `kind` are ignored.
 */
typedef struct RamsimAperture {
  enum RamsimApertureKind kind;
  double edge_x;
  double center_x;
  double center_y;
  double half_width;
  double half_height;
} RamsimAperture;

typedef struct RamsimComplex {
  double re;
  double im;
} RamsimComplex;

/**
 * Closed-loop summary. Undefined quantities are NaN.
 */
typedef struct RamsimRejectionReport {
  double beam1_rejection_db;
  double beam2_rejection_db;
  bool converged;
  double settle_time_s;
  double residual_relative_am;
  double initial_relative_am;
  bool initial_am_zero;
  bool clamped;
  uint64_t steps;
  double final_m_i;
  double final_m_q;
} RamsimRejectionReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *ramsim_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into the library on this thread.
 */
const char *ramsim_last_error_message(void);

/**
 * Parses scenario text into a new handle stored in `*out`.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RamsimStatus ramsim_scenario_parse(const char *text, struct RamsimScenario **out);

/**
 * Reads and parses a scenario file into a new handle stored in `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RamsimStatus ramsim_scenario_load(const char *path, struct RamsimScenario **out);

/**
 * Releases a handle. NULL is ignored.
 *
 * # Safety
 * `scenario` must come from this library and not be used afterwards.
 */
void ramsim_scenario_free(struct RamsimScenario *scenario);

/**
 * Writes the 16-hex-digit scenario hash plus NUL into `buf` (17 bytes).
 *
 * # Safety
 * `buf` must hold `len` bytes.
 */
enum RamsimStatus ramsim_scenario_hash(const struct RamsimScenario *scenario,
                                       char *buf,
                                       uintptr_t len);

/**
 * Sideband amplitudes J_n(beta), n = -n_max..=n_max, into `out[0..2 n_max + 1]`.
 *
 * # Safety
 * `out` must hold `len` doubles.
 */
enum RamsimStatus ramsim_bessel_amplitudes(double beta,
                                           uintptr_t n_max,
                                           double *out,
                                           uintptr_t len);

/**
 * Aperture-restricted overlap of two modes.
 *
 * # Safety
 * All pointers must be valid.
 */
enum RamsimStatus ramsim_overlap(const struct RamsimMode *a,
                                 const struct RamsimMode *b,
                                 const struct RamsimAperture *aperture,
                                 struct RamsimComplex *out);

/**
 * Occultation curve over the scenario's configured grid. Writes up to
 * `len` points and the point count to `*written`.
 *
 * # Safety
 * `x_over_w0` and `normalized_ifm` must hold `len` doubles.
 */
enum RamsimStatus ramsim_fig2_scan(const struct RamsimScenario *scenario,
                                   double *x_over_w0,
                                   double *normalized_ifm,
                                   uintptr_t len,
                                   uintptr_t *written);

/**
 * Closed loop for `steps` control steps (0: the scenario's own count).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum RamsimStatus ramsim_run_closed_loop(const struct RamsimScenario *scenario,
                                         uint64_t steps,
                                         struct RamsimRejectionReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RAMSIM_H */
