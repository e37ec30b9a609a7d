#ifndef OMNISIM_H
#define OMNISIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Values per log row, in CSV column order.
 */
#define OMNI_LOG_COLUMNS 13

typedef enum OmniStatus {
  OMNI_OK = 0,
  OMNI_ERR_NULL = 1,
  OMNI_ERR_INVALID = 2,
  OMNI_ERR_DIVERGED = 3,
  OMNI_ERR_DEGENERATE = 4,
  OMNI_ERR_NOT_CONVERGED = 5,
  OMNI_ERR_IO = 6,
  OMNI_ERR_SINGULAR = 7,
  OMNI_ERR_PANIC = 8,
} OmniStatus;

/**
 * Simulator configuration handle.
 */
typedef struct OmniConfig OmniConfig;

/**
 * Response log handle.
 */
typedef struct OmniLog OmniLog;

typedef struct OmniFrictionFit {
  double slope;
  double intercept;
  double b_viscous;
  double f_coulomb;
  double residual_rms;
  bool nonphysical;
} OmniFrictionFit;

typedef struct OmniFitSummary {
  double initial_cost;
  double final_cost;
  uint32_t iterations;
  uint32_t evaluations;
  bool converged;
} OmniFitSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *omni_last_error(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void omni_string_free(char *s);

/**
 * Creates a config from a shipped preset (`"fitted"`, `"datasheet"`, ...).
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum OmniStatus omni_config_from_preset(const char *name, struct OmniConfig **out);

/**
 * Parses a TOML config document.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum OmniStatus omni_config_from_toml(const char *text, struct OmniConfig **out);

/**
 * Reads a TOML config document from a file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum OmniStatus omni_config_load(const char *path, struct OmniConfig **out);

/**
 * # Safety
 * `cfg` must be null or a handle from this library that has not been freed.
 */
void omni_config_free(struct OmniConfig *cfg);

/**
 * Applies a `dotted.key=value` override. The config is unchanged on error.
 *
 * # Safety
 * `cfg` must be a live handle; `spec` a NUL-terminated string.
 */
enum OmniStatus omni_config_set(struct OmniConfig *cfg, const char *spec);

/**
 * Reads a numeric value at a dotted path, e.g. `"body.j_z"`.
 *
 * # Safety
 * `cfg` must be a live handle; `key` a NUL-terminated string; `out` writable.
 */
enum OmniStatus omni_config_get(const struct OmniConfig *cfg, const char *key, double *out);

/**
 * Serializes the config as TOML. Free the result with [`omni_string_free`].
 *
 * # Safety
 * `cfg` must be a live handle.
 */
char *omni_config_to_toml(const struct OmniConfig *cfg);

/**
 * Body velocity `[v, vn, omega]` to wheel rim speeds.
 *
 * # Safety
 * `cfg` must be a live handle; `body` and `wheels` must hold 3 doubles.
 */
enum OmniStatus omni_body_to_wheels(const struct OmniConfig *cfg,
                                    const double *body,
                                    double *wheels);

/**
 * Wheel rim speeds to body velocity `[v, vn, omega]`.
 *
 * # Safety
 * `cfg` must be a live handle; `wheels` and `body` must hold 3 doubles.
 */
enum OmniStatus omni_wheels_to_body(const struct OmniConfig *cfg,
                                    const double *wheels,
                                    double *body);

/**
 * Steady-state motor voltage at a wheel-shaft speed.
 *
 * # Safety
 * `cfg` must be a live handle; `out` writable.
 */
enum OmniStatus omni_steady_state_voltage(const struct OmniConfig *cfg, double omega, double *out);

/**
 * Runs the config's profile from rest.
 *
 * # Safety
 * `cfg` must be a live handle; `out` writable.
 */
enum OmniStatus omni_simulate(const struct OmniConfig *cfg, struct OmniLog **out);

/**
 * # Safety
 * `log` must be null or a handle from this library that has not been freed.
 */
void omni_log_free(struct OmniLog *log);

/**
 * Number of rows, or 0 for a null handle.
 *
 * # Safety
 * `log` must be null or a live handle.
 */
size_t omni_log_len(const struct OmniLog *log);

/**
 * Sample period in seconds, or 0 for a null handle.
 *
 * # Safety
 * `log` must be null or a live handle.
 */
double omni_log_sample_period(const struct OmniLog *log);

/**
 * Copies row `index` into `row` (`OMNI_LOG_COLUMNS` doubles).
 *
 * # Safety
 * `log` must be a live handle; `row` must hold `OMNI_LOG_COLUMNS` doubles.
 */
enum OmniStatus omni_log_row(const struct OmniLog *log, size_t index, double *row);

/**
 * # Safety
 * `log` must be a live handle; `path` a NUL-terminated string.
 */
enum OmniStatus omni_log_write_csv(const struct OmniLog *log, const char *path);

/**
 * Reads a log CSV. `period_hint` is used only for single-row files; pass
 * 0 for none.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` writable.
 */
enum OmniStatus omni_log_read_csv(const char *path, double period_hint, struct OmniLog **out);

/**
 * Straight-line friction fit over `n` (speed, voltage) pairs. `weighting`
 * is 0 for ordinary least squares, 1 for `1/u²` weights.
 *
 * # Safety
 * `omega` and `voltage` must hold `n` doubles; `out` writable.
 */
enum OmniStatus omni_fit_friction(const double *omega,
                                  const double *voltage,
                                  size_t n,
                                  double r_internal_ohm,
                                  double k_torque,
                                  uint32_t weighting,
                                  struct OmniFrictionFit *out);

/**
 * Fits kp, ki, kd against `measured`, starting from and writing back into
 * `cfg`. Returns `OMNI_ERR_NOT_CONVERGED` with `cfg` still updated when
 * the iteration budget runs out.
 *
 * # Safety
 * `cfg` and `measured` must be live handles; `out` null or writable.
 */
enum OmniStatus omni_fit_gains(struct OmniConfig *cfg,
                               const struct OmniLog *measured,
                               struct OmniFitSummary *out);

/**
 * Fits the yaw inertia against `measured`; see [`omni_fit_gains`].
 *
 * # Safety
 * `cfg` and `measured` must be live handles; `out` null or writable.
 */
enum OmniStatus omni_fit_inertia(struct OmniConfig *cfg,
                                 const struct OmniLog *measured,
                                 struct OmniFitSummary *out);

/**
 * Mean squared error of two equal-length series.
 *
 * # Safety
 * `a` and `b` must hold `n` doubles; `out` writable.
 */
enum OmniStatus omni_mse(const double *a, const double *b, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OMNISIM_H */
