#ifndef PLAB_H
#define PLAB_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a fallible call.
 */
typedef enum PlabStatus {
  PLAB_STATUS_OK = 0,
  PLAB_STATUS_NULL_POINTER = 1,
  PLAB_STATUS_INVALID_UTF8 = 2,
  PLAB_STATUS_CONFIG = 3,
  PLAB_STATUS_UNKNOWN_EXPERIMENT = 4,
  PLAB_STATUS_INVALID_ARGUMENT = 5,
  PLAB_STATUS_NUMERICAL = 6,
  PLAB_STATUS_IO = 7,
  PLAB_STATUS_PANIC = 8,
} PlabStatus;

/**
 * Smooth wavelet family.
 */
typedef struct PlabFamily PlabFamily;

/**
 * Experiment parameters.
 */
typedef struct PlabParams PlabParams;

/**
 * Finished experiment report.
 */
typedef struct PlabReport PlabReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *plab_last_error(void);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void plab_string_free(char *s);

/**
 * Default parameters.
 */
struct PlabParams *plab_params_default(void);

/**
 * Parse TOML parameters into `*out`.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PlabStatus plab_params_from_toml(const char *toml, struct PlabParams **out);

/**
 * Apply one `key=value` override, as `--set` does on the command line.
 *
 * # Safety
 * `params` must be a live handle and `item` a NUL-terminated string.
 */
enum PlabStatus plab_params_set(struct PlabParams *params, const char *item);

/**
 * Check the parameters for `experiment` (may be null for the generic rules).
 *
 * # Safety
 * `params` must be a live handle; `experiment` null or NUL-terminated.
 */
enum PlabStatus plab_params_validate(const struct PlabParams *params, const char *experiment);

/**
 * # Safety
 * `params` must be null or a handle not yet freed.
 */
void plab_params_free(struct PlabParams *params);

/**
 * Number of available experiments.
 */
size_t plab_experiment_count(void);

/**
 * Name of experiment `i` as a new string, or null when out of range.
 */
char *plab_experiment_name(size_t i);

/**
 * Run an experiment in memory and store the report in `*out`.
 *
 * # Safety
 * `experiment` must be NUL-terminated, `params` a live handle and `out` valid.
 */
enum PlabStatus plab_run(const char *experiment,
                         const struct PlabParams *params,
                         struct PlabReport **out);

/**
 * 1 when every gating check passed, 0 otherwise (also for null).
 *
 * # Safety
 * `report` must be null or a live handle.
 */
int32_t plab_report_passed(const struct PlabReport *report);

/**
 * Number of data rows.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
size_t plab_report_row_count(const struct PlabReport *report);

/**
 * The report as JSON; release with [`plab_string_free`].
 *
 * # Safety
 * `report` must be a live handle and `out` valid.
 */
enum PlabStatus plab_report_json(const struct PlabReport *report, char **out);

/**
 * Write the rows as CSV to `path`.
 *
 * # Safety
 * `report` must be a live handle and `path` NUL-terminated.
 */
enum PlabStatus plab_report_write_csv(const struct PlabReport *report, const char *path);

/**
 * # Safety
 * `report` must be null or a handle not yet freed.
 */
void plab_report_free(struct PlabReport *report);

/**
 * Build the smooth Alpert family for spatial dimension `dim`.
 *
 * # Safety
 * `out` must be valid.
 */
enum PlabStatus plab_family_new(size_t dim, size_t kappa, double eta, struct PlabFamily **out);

/**
 * Number of members in the family.
 *
 * # Safety
 * `family` must be null or a live handle.
 */
size_t plab_family_len(const struct PlabFamily *family);

/**
 * Extension `E h(ξ', ξ_d)` of member `a` on the cube with the given centre
 * (length `dim`) and side. `xi` has length `dim`.
 *
 * # Safety
 * `family` must be a live handle, `center` and `xi` must point to `dim`
 * values and `re`, `im` must be valid.
 */
enum PlabStatus plab_wavelet_extend(const struct PlabFamily *family,
                                    size_t a,
                                    const double *center,
                                    double side,
                                    const double *xi,
                                    double xi_d,
                                    double *re,
                                    double *im);

/**
 * # Safety
 * `family` must be null or a handle not yet freed.
 */
void plab_family_free(struct PlabFamily *family);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PLAB_H */
