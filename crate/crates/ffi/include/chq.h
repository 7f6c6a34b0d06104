/* C interface to the chq consistent-histories engine. */

#ifndef CHQ_H
#define CHQ_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code of every fallible call.
 */
typedef enum ChqStatus {
  CHQ_STATUS_OK = 0,
  CHQ_STATUS_NULL_ARGUMENT = 1,
  CHQ_STATUS_INVALID_UTF8 = 2,
  CHQ_STATUS_IO = 3,
  CHQ_STATUS_INVALID_SCENARIO = 4,
  CHQ_STATUS_PANIC = 5,
} ChqStatus;

/**
 * Opaque handle to a finished report.
 */
typedef struct ChqReport ChqReport;

/**
 * Opaque handle to a validated scenario.
 */
typedef struct ChqScenario ChqScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; do not free.
 */
const char *chq_version(void);

/**
 * Last error message for this thread as a fresh allocation (empty string
 * when no error is pending). Free with `chq_string_free`.
 */
char *chq_last_error(void);

/**
 * Load and validate a scenario file.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string; `out` must be a valid
 * pointer to receive the handle.
 */
enum ChqStatus chq_scenario_load_path(const char *path, struct ChqScenario **out);

/**
 * Load and validate a scenario from a JSON string.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string; `out` must be a valid
 * pointer to receive the handle.
 */
enum ChqStatus chq_scenario_load_json(const char *json, struct ChqScenario **out);

/**
 * Load a built-in demo scenario (`stern_gerlach` or `crossed_beam`) with
 * its bundled default parameters.
 *
 * # Safety
 * `name` must be a valid NUL-terminated string; `out` must be a valid
 * pointer to receive the handle.
 */
enum ChqStatus chq_demo_scenario(const char *name, struct ChqScenario **out);

/**
 * Load the Stern-Gerlach demo with explicit spin amplitudes
 * α = a_re + i·a_im, β = b_re + i·b_im (|α|² + |β|² must be 1).
 *
 * # Safety
 * `out` must be a valid pointer to receive the handle.
 */
enum ChqStatus chq_demo_stern_gerlach(double a_re,
                                      double a_im,
                                      double b_re,
                                      double b_im,
                                      struct ChqScenario **out);

/**
 * Scenario digest (hex SHA-256 of the canonical form). Free with
 * `chq_string_free`.
 *
 * # Safety
 * `scenario` must be a live handle from one of the load functions.
 */
char *chq_scenario_digest(const struct ChqScenario *scenario);

/**
 * Run every query in the scenario. `consistency_tol` overrides the
 * scenario's consistency tolerance when nonnegative; pass a negative
 * value to keep the scenario default. Query failures do not fail the
 * call — inspect `chq_report_has_errors`.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be a valid pointer.
 */
enum ChqStatus chq_scenario_run(const struct ChqScenario *scenario,
                                double consistency_tol,
                                struct ChqReport **out);

/**
 * True when any query in the report failed.
 *
 * # Safety
 * `report` must be a live handle from `chq_scenario_run`.
 */
bool chq_report_has_errors(const struct ChqReport *report);

/**
 * Machine-readable report (JSON). Free with `chq_string_free`.
 *
 * # Safety
 * `report` must be a live handle from `chq_scenario_run`.
 */
char *chq_report_to_json(const struct ChqReport *report);

/**
 * Human-readable report. Free with `chq_string_free`.
 *
 * # Safety
 * `report` must be a live handle from `chq_scenario_run`.
 */
char *chq_report_to_text(const struct ChqReport *report);

/**
 * # Safety
 * `scenario` must be null or a handle not yet freed.
 */
void chq_scenario_free(struct ChqScenario *scenario);

/**
 * # Safety
 * `report` must be null or a handle not yet freed.
 */
void chq_report_free(struct ChqReport *report);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must be null or a string produced by this library and not yet
 * freed.
 */
void chq_string_free(char *s);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* CHQ_H */
