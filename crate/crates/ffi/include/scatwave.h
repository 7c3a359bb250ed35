#ifndef SCATWAVE_H
#define SCATWAVE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call. Codes 2 and 3 match the CLI exit codes.
typedef enum ScwStatus {
  SCW_STATUS_OK = 0,
  // A run completed but some acceptance criterion failed.
  SCW_STATUS_CRITERION_FAILED = 1,
  SCW_STATUS_INVALID_ARGUMENT = 2,
  SCW_STATUS_NUMERICAL = 3,
  SCW_STATUS_NULL_POINTER = 4,
  SCW_STATUS_LENGTH_MISMATCH = 5,
  SCW_STATUS_PANIC = 6,
} ScwStatus;

// A static barrier.
typedef struct ScwPotential ScwPotential;

// A stationary wave operator with its mode table.
typedef struct ScwWaveOperator ScwWaveOperator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL
// terminated, truncated to `len`) and returns the full message length.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t scw_last_error(char *buf, size_t len);

// Square barrier of height `v0` on `[a, b]`; `c_floor <= 0` uses the
// default positivity floor.
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum ScwStatus scw_potential_square(double a,
                                    double b,
                                    double v0,
                                    double c_floor,
                                    struct ScwPotential **out);

// # Safety
// `p` must be null or a handle from [`scw_potential_square`], freed once.
void scw_potential_free(struct ScwPotential *p);

// Transmission and reflection at real momentum `k != 0`, each written as
// `(re, im)`.
//
// # Safety
// `p` must be a live handle; `transmission` and `reflection` must each
// point to two writable doubles.
enum ScwStatus scw_scattering(const struct ScwPotential *p,
                              double h,
                              double k,
                              double *transmission,
                              double *reflection);

// Wave operator for interface parameter `θ` on `n` nodes over
// `[x_min, x_max]` with `n_k` spectral nodes per half-line.
//
// # Safety
// `p` must be a live handle and `out` a valid handle slot.
enum ScwStatus scw_wave_operator_new(const struct ScwPotential *p,
                                     double h,
                                     double theta_re,
                                     double theta_im,
                                     double x_min,
                                     double x_max,
                                     size_t n,
                                     double k_min,
                                     double k_max,
                                     size_t n_k,
                                     struct ScwWaveOperator **out);

// # Safety
// `w` must be null or a handle from [`scw_wave_operator_new`], freed once.
void scw_wave_operator_free(struct ScwWaveOperator *w);

// Number of spatial nodes; 0 for a null handle.
//
// # Safety
// `w` must be null or a live handle.
size_t scw_wave_operator_len(const struct ScwWaveOperator *w);

// Position of node `i`; NaN when out of range.
//
// # Safety
// `w` must be null or a live handle.
double scw_wave_operator_node(const struct ScwWaveOperator *w, size_t i);

// `W̃φ` for a state of `n` nodes.
//
// # Safety
// `w` must be a live handle; `input` and `output` must each hold `2 n`
// doubles.
enum ScwStatus scw_wave_operator_apply(const struct ScwWaveOperator *w,
                                       const double *input,
                                       size_t n,
                                       double *output);

// `W̃⁻¹φ` for a state of `n` nodes.
//
// # Safety
// As for [`scw_wave_operator_apply`].
enum ScwStatus scw_wave_operator_apply_inverse(const struct ScwWaveOperator *w,
                                               const double *input,
                                               size_t n,
                                               double *output);

// The conjugated propagator `W̃ e^{−itH₀} W̃⁻¹φ` at time `t`.
//
// # Safety
// As for [`scw_wave_operator_apply`].
enum ScwStatus scw_propagate(const struct ScwWaveOperator *w,
                             const double *input,
                             size_t n,
                             double t,
                             double *output);

// Runs an experiment from a JSON config (null for the defaults) and writes
// reports to `out_dir`. `experiment` may be null to keep the config's
// choice; `threads = 0` uses the default pool. Returns
// [`ScwStatus::CriterionFailed`] when the run completes with a failing
// criterion.
//
// # Safety
// String arguments must be null or NUL-terminated.
enum ScwStatus scw_run_experiment(const char *config_json,
                                  const char *experiment,
                                  const char *out_dir,
                                  bool quick,
                                  size_t threads);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCATWAVE_H */
