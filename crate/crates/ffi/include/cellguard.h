#ifndef CELLGUARD_H
#define CELLGUARD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result of a fallible call. Error classes share their numbers with the
// command-line exit codes.
typedef enum CgStatus {
  CG_OK = 0,
  // Malformed configuration, JSON or CSV.
  CG_CONFIG = 2,
  CG_IO = 3,
  // Stability guard, state outside a map's domain, or wrong dimensions.
  CG_DOMAIN = 4,
  // Divergence or an iteration that did not terminate.
  CG_DIVERGED = 5,
  CG_CONDITIONING = 6,
  // Unobservable pair or a closed loop that is not Schur stable.
  CG_UNOBSERVABLE = 7,
  CG_GATE = 8,
  CG_INVALID = 9,
  CG_NULL_POINTER = 10,
  CG_INVALID_UTF8 = 11,
  CG_PANIC = 12,
} CgStatus;

// Fitted Gaussian process mismatch model.
typedef struct CgGp CgGp;

// Cell parameter set.
typedef struct CgParams CgParams;

// Simulated or loaded cycle record.
typedef struct CgRecord CgRecord;

// Detection outcome of a scenario. Absent times are NaN.
typedef struct CgOutcome {
  double onset;
  double voltage_latency;
  double thermal_latency;
  size_t voltage_false_alarms;
  size_t thermal_false_alarms;
  double max_abs_r_v;
  double max_abs_r_t;
} CgOutcome;

// One record sample. Fault channels are the injected ground truth.
typedef struct CgSample {
  double t;
  // Current (A), positive on discharge.
  double current;
  double v_meas;
  double t_meas;
  double v_true;
  double t_true;
  double fault_voltage;
  double fault_power;
} CgSample;

// Lyapunov certificate of one closed loop at one `gamma`.
typedef struct CgCertificate {
  bool passed;
  double margin;
  double lambda_p_min;
  double lambda_p_max;
  double spectral_radius;
  // Largest `gamma` at which the margin is negative.
  double critical_gamma;
} CgCertificate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *cg_version(void);

// Message of the most recent failure on this thread, or NULL if none.
// Valid until the next failing call on this thread.
const char *cg_last_error(void);

// Static name of a status code; "unknown" for values outside [`CgStatus`].
const char *cg_status_name(int32_t status);

// Default cell parameters.
//
// # Safety
// `out` must be valid for writes.
enum CgStatus cg_params_new(struct CgParams **out);

// Parameters from `key = value` configuration text.
//
// # Safety
// `config` must be a NUL-terminated string; `out` must be valid for writes.
enum CgStatus cg_params_parse(const char *config, struct CgParams **out);

// Parameters from a configuration file.
//
// # Safety
// `file` must be a NUL-terminated string; `out` must be valid for writes.
enum CgStatus cg_params_load(const char *file, struct CgParams **out);

// Reads one scalar parameter by name.
//
// # Safety
// `params` must come from a `cg_params_*` constructor; `key` must be a
// NUL-terminated string; `out` must be valid for writes.
enum CgStatus cg_params_get(const struct CgParams *params, const char *key, double *out);

// Sets one scalar parameter by name and revalidates the set.
//
// # Safety
// `params` must come from a `cg_params_*` constructor; `key` must be a
// NUL-terminated string.
enum CgStatus cg_params_set(struct CgParams *params, const char *key, double value);

// # Safety
// `params` must be NULL or come from a `cg_params_*` constructor and not
// have been freed.
void cg_params_free(struct CgParams *params);

// Simulates a noise-free constant-current cycle (positive `current`
// discharges) from `initial_soc` at ambient temperature.
//
// # Safety
// `params` must come from a `cg_params_*` constructor; `out` must be valid
// for writes.
enum CgStatus cg_record_simulate(const struct CgParams *params,
                                 double current,
                                 double duration,
                                 double initial_soc,
                                 uint64_t seed,
                                 struct CgRecord **out);

// Simulates the detection cycle of a scenario file.
//
// # Safety
// `scenario` must be a NUL-terminated string; `out` must be valid for
// writes.
enum CgStatus cg_scenario_simulate(const char *scenario, struct CgRecord **out);

// Learns, calibrates and detects on a scenario file.
//
// # Safety
// `scenario` must be a NUL-terminated string; `out` must be valid for
// writes.
enum CgStatus cg_scenario_run(const char *scenario, struct CgOutcome *out);

// Loads a record CSV and its metadata sidecar.
//
// # Safety
// `file` must be a NUL-terminated string; `out` must be valid for writes.
enum CgStatus cg_record_load(const char *file, struct CgRecord **out);

// Writes a record CSV and its metadata sidecar.
//
// # Safety
// `record` must come from a `cg_record_*` constructor; `file` must be a
// NUL-terminated string.
enum CgStatus cg_record_save(const struct CgRecord *record, const char *file);

// Number of samples, or 0 for NULL.
//
// # Safety
// `record` must be NULL or come from a `cg_record_*` constructor.
size_t cg_record_len(const struct CgRecord *record);

// Copies sample `index` into `out`.
//
// # Safety
// `record` must come from a `cg_record_*` constructor; `out` must be valid
// for writes.
enum CgStatus cg_record_sample(const struct CgRecord *record, size_t index, struct CgSample *out);

// # Safety
// `record` must be NULL or come from a `cg_record_*` constructor and not
// have been freed.
void cg_record_free(struct CgRecord *record);

// Fits a Gaussian process to `n` row-major inputs of width `dim` (2 for
// the voltage model, 3 for the thermal model) with the given
// hyperparameters; `length_scales` has `dim` entries.
//
// # Safety
// `inputs` must hold `n * dim` values, `labels` `n` values and
// `length_scales` `dim` values; `out` must be valid for writes.
enum CgStatus cg_gp_fit(const double *inputs,
                        const double *labels,
                        size_t n,
                        size_t dim,
                        double sigma_p2,
                        const double *length_scales,
                        double jitter,
                        struct CgGp **out);

// Loads a GP artifact written by the learn command or [`cg_gp_save`].
//
// # Safety
// `file` must be a NUL-terminated string; `out` must be valid for writes.
enum CgStatus cg_gp_load(const char *file, struct CgGp **out);

// Writes a GP artifact tagged with `version`.
//
// # Safety
// `gp` must come from a `cg_gp_*` constructor; `file` must be a
// NUL-terminated string.
enum CgStatus cg_gp_save(const struct CgGp *gp, uint64_t version, const char *file);

// Input width, or 0 for NULL.
//
// # Safety
// `gp` must be NULL or come from a `cg_gp_*` constructor.
size_t cg_gp_dim(const struct CgGp *gp);

// Posterior mean and variance at one query point of width `dim`.
//
// # Safety
// `gp` must come from a `cg_gp_*` constructor; `query` must hold `dim`
// values; `mean` and `variance` must be valid for writes.
enum CgStatus cg_gp_predict(const struct CgGp *gp,
                            const double *query,
                            size_t dim,
                            double *mean,
                            double *variance);

// # Safety
// `gp` must be NULL or come from a `cg_gp_*` constructor and not have been
// freed.
void cg_gp_free(struct CgGp *gp);

// Observer gain placing the eigenvalues of `A - L C` at `spectrum`.
// `a` is row-major `n × n`; `c`, `spectrum` and `gain_out` hold `n` values.
//
// # Safety
// Pointers must be valid for the stated lengths.
enum CgStatus cg_design_gain(const double *a,
                             const double *c,
                             const double *spectrum,
                             size_t n,
                             double *gain_out);

// Lyapunov certificate of the closed loop `A - L C` at `gamma`.
// `a` is row-major `n × n`; `c` and `gain` hold `n` values.
//
// # Safety
// Pointers must be valid for the stated lengths; `out` must be valid for
// writes.
enum CgStatus cg_verify_lyapunov(const double *a,
                                 const double *c,
                                 const double *gain,
                                 size_t n,
                                 double gamma,
                                 struct CgCertificate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CELLGUARD_H */
