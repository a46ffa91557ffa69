/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef ENDOCHECK_H
#define ENDOCHECK_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum {
  EC_STATUS_OK = 0,
  EC_STATUS_NULL_POINTER = 1,
  EC_STATUS_INVALID_ARGUMENT = 2,
  EC_STATUS_RANK_DEFICIENT = 3,
  EC_STATUS_NOT_POSITIVE_DEFINITE = 4,
  EC_STATUS_DEGENERATE_VARIANCE = 5,
  EC_STATUS_IO = 6,
  EC_STATUS_PARSE = 7,
  EC_STATUS_CONFIG_INVALID = 8,
  EC_STATUS_PANIC = 9,
} EcStatus;

/**
 * Selects one of the four statistics.
 */
typedef enum {
  EC_STATISTIC_TH1 = 0,
  EC_STATISTIC_TH2 = 1,
  EC_STATISTIC_TH3 = 2,
  EC_STATISTIC_CF = 3,
} EcStatistic;

/**
 * Opaque dataset handle.
 */
typedef struct EcDataset EcDataset;

/**
 * Opaque test-report handle.
 */
typedef struct EcTestReport EcTestReport;

/**
 * Relative discrepancies of the exact finite-sample identities.
 */
typedef struct {
  double lemma1_theta_gap;
  double lemma1_rho_gap;
  double lemma1_tcf_gap;
  double lemma2_gap_ols;
  double lemma2_gap_2sls;
  double pl41_gap;
  double pl32_gap;
  double max_gap;
  /**
   * `[t_H1, t_H2, t_H3, t_CF]`.
   */
  double statistics[4];
  double h_n;
  double tol;
  bool ordering_ok;
  bool strict_required;
  /**
   * All gaps below `tol` and the ordering holds.
   */
  bool passes;
} EcIdentityReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null if none.
 * The pointer stays valid until the next failing call on this thread.
 */
const char *ec_last_error_message(void);

/**
 * Builds a dataset from row-major arrays: `y2` (n), `y1` (n × d_y1),
 * `z1` (n × d_z1, may be null when d_z1 = 0) and `z2` (n × d_z2).
 *
 * # Safety
 * Each non-null array must hold the stated number of doubles; `out` must be
 * writable.
 */
EcStatus ec_dataset_new(size_t n,
                        const double *y2,
                        const double *y1,
                        size_t d_y1,
                        const double *z1,
                        size_t d_z1,
                        const double *z2,
                        size_t d_z2,
                        EcDataset **out);

/**
 * Loads a CSV file. `endog`, `exog` and `iv` are comma-separated column
 * names; `exog` may be null, empty or `"none"`.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `out` must be writable.
 */
EcStatus ec_dataset_load_csv(const char *path,
                             const char *outcome,
                             const char *endog,
                             const char *exog,
                             const char *iv,
                             bool add_intercept,
                             EcDataset **out);

/**
 * Writes the sample size and block widths. Any output pointer may be null.
 *
 * # Safety
 * `ds` must be a live handle; non-null outputs must be writable.
 */
EcStatus ec_dataset_dims(const EcDataset *ds, size_t *n, size_t *d_y1, size_t *d_z1, size_t *d_z2);

/**
 * # Safety
 * `ds` must be null or a handle not yet freed.
 */
void ec_dataset_free(EcDataset *ds);

/**
 * Runs all four tests at the `n_alphas` significance levels in `alphas`.
 *
 * # Safety
 * `ds` must be a live handle, `alphas` must hold `n_alphas` doubles (or be
 * null when `n_alphas` is 0), and `out` must be writable.
 */
EcStatus ec_run_tests(const EcDataset *ds,
                      const double *alphas,
                      size_t n_alphas,
                      EcTestReport **out);

/**
 * # Safety
 * `report` must be a live handle and `value` writable.
 */
EcStatus ec_report_statistic(const EcTestReport *report, EcStatistic which, double *value);

/**
 * `1 − F_χ²(df)(t)` for the chosen statistic.
 *
 * # Safety
 * `report` must be a live handle and `value` writable.
 */
EcStatus ec_report_p_value(const EcTestReport *report, EcStatistic which, double *value);

/**
 * # Safety
 * `report` must be a live handle and `value` writable.
 */
EcStatus ec_report_h_n(const EcTestReport *report, double *value);

/**
 * Degrees of freedom of the reference `χ²` distribution (= d_y1).
 *
 * # Safety
 * `report` must be a live handle and `value` writable.
 */
EcStatus ec_report_df(const EcTestReport *report, size_t *value);

/**
 * Whether the chosen statistic rejects at the `alpha_index`-th level passed
 * to [`ec_run_tests`].
 *
 * # Safety
 * `report` must be a live handle and `rejects` writable.
 */
EcStatus ec_report_rejects(const EcTestReport *report,
                           size_t alpha_index,
                           EcStatistic which,
                           bool *rejects);

/**
 * The whole report as JSON. Release the string with [`ec_string_free`].
 *
 * # Safety
 * `report` must be a live handle and `out` writable.
 */
EcStatus ec_report_to_json(const EcTestReport *report, char **out);

/**
 * # Safety
 * `report` must be null or a handle not yet freed.
 */
void ec_report_free(EcTestReport *report);

/**
 * Checks the exact finite-sample identities and fills `out`.
 *
 * # Safety
 * `ds` must be a live handle and `out` writable.
 */
EcStatus ec_verify_identities(const EcDataset *ds, double tol, EcIdentityReport *out);

/**
 * `P(χ²(df) ≤ x)`; NaN when `df` is 0.
 */
double ec_chi2_cdf(size_t df, double x);

/**
 * Inverse of [`ec_chi2_cdf`]; NaN when `df` is 0.
 */
double ec_chi2_quantile(size_t df, double p);

/**
 * Runs a Monte Carlo study described by a JSON document (the format read by
 * `endocheck simulate --config`) and returns the result JSON.
 *
 * # Safety
 * `config_json` must be NUL-terminated and `out_json` writable.
 */
EcStatus ec_simulate_json(const char *config_json, char **out_json);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be null or a string from this library not yet freed.
 */
void ec_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ENDOCHECK_H */
