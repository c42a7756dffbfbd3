/* C interface to didkit. All functions are safe to call from several threads
 * on distinct handles; a failed call stores a message retrievable with
 * didkit_last_error() on the calling thread. Strings returned through char**
 * are owned by the caller and released with didkit_string_free(). Options are
 * JSON objects; NULL or "" selects the defaults. */
#ifndef DIDKIT_DIDKIT_H
#define DIDKIT_DIDKIT_H

#include <stddef.h>

#if defined(_WIN32)
#define DIDKIT_API __declspec(dllexport)
#else
#define DIDKIT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum didkit_status {
  DIDKIT_OK = 0,
  DIDKIT_ERR_VALIDATION = 1, /* bad input, options or usage */
  DIDKIT_ERR_ESTIMATION = 2, /* the data do not support the requested estimate */
  DIDKIT_ERR_INTERNAL = 3
} didkit_status;

typedef struct didkit_panel didkit_panel;
typedef struct didkit_attgt didkit_attgt;
typedef struct didkit_curve didkit_curve;

DIDKIT_API const char* didkit_version(void);
DIDKIT_API const char* didkit_last_error(void);
/* error category name such as "UnbalancedPanel"; empty after success */
DIDKIT_API const char* didkit_last_error_kind(void);
DIDKIT_API void didkit_string_free(char* s);

/* Re-serializes any JSON document canonically (sorted keys, %.10g numbers). */
DIDKIT_API didkit_status didkit_json_canonicalize(const char* doc, char** out);

/* ---- panels ----
 * schema keys: unit, period, outcome, first_treat, weight, cluster,
 * covariates (array), never_value */
DIDKIT_API didkit_status didkit_panel_load(const char* path, const char* schema_json, didkit_panel** out);
DIDKIT_API didkit_status didkit_panel_normalize(const didkit_panel* panel, didkit_panel** out, char** report_json);
DIDKIT_API didkit_status didkit_panel_write(const didkit_panel* panel, const char* path);
DIDKIT_API size_t didkit_panel_n_units(const didkit_panel* panel);
DIDKIT_API size_t didkit_panel_n_periods(const didkit_panel* panel);
DIDKIT_API size_t didkit_panel_n_covariates(const didkit_panel* panel);
DIDKIT_API void didkit_panel_free(didkit_panel* panel);

/* ---- group-time effects ----
 * options: assumption (never|not_yet|all_periods), estimator (means|ra|ipw|dr),
 * include_pretrends, covariate_timing (baseline|pre_and_post), threads,
 * outcome_covariates, propensity_covariates (arrays of names) */
DIDKIT_API didkit_status didkit_attgt_estimate(const didkit_panel* panel, const char* options_json, didkit_attgt** out);
DIDKIT_API didkit_status didkit_attgt_to_json(const didkit_attgt* table, int with_influence, char** out);
DIDKIT_API didkit_status didkit_attgt_from_json(const char* doc, didkit_attgt** out);
DIDKIT_API size_t didkit_attgt_n_cells(const didkit_attgt* table);
/* joint Wald test of the pre-treatment cells */
DIDKIT_API didkit_status didkit_pretrend_test(const didkit_attgt* table, char** out_json);
DIDKIT_API void didkit_attgt_free(didkit_attgt* table);

/* ---- event studies ----
 * options: level, window ([lo, hi], balanced cohorts), draws (0: no band),
 * seed, multiplier (rademacher|mammen), threads */
DIDKIT_API didkit_status didkit_event_study(const didkit_attgt* table, const char* options_json, didkit_curve** out);
DIDKIT_API didkit_status didkit_curve_to_json(const didkit_curve* curve, char** out);
DIDKIT_API didkit_status didkit_curve_from_json(const char* doc, didkit_curve** out);
DIDKIT_API didkit_status didkit_curve_to_svg(const didkit_curve* curve, char** out);
/* options: target_e, mbar, benchmark (max_pre_step|absolute), level, cumulate */
DIDKIT_API didkit_status didkit_sensitivity(const didkit_curve* curve, const char* options_json, char** out_json);
DIDKIT_API void didkit_curve_free(didkit_curve* curve);

/* ---- diagnostics ---- */
/* options: pre, post (period labels), weighted */
DIDKIT_API didkit_status didkit_balance(const didkit_panel* panel, const char* options_json, char** out_json,
                                        char** out_markdown);
/* options: spec (static|dynamic_2xT|saturated_SA), weighted */
DIDKIT_API didkit_status didkit_twfe(const didkit_panel* panel, const char* options_json, char** out_json);
/* options: weighted */
DIDKIT_API didkit_status didkit_bacon(const didkit_panel* panel, const char* options_json, char** out_json);

/* ---- simulation ----
 * config_text: TOML-style generator settings; overrides: seed, n_units, threads */
DIDKIT_API didkit_status didkit_simulate(const char* config_text, const char* overrides_json, didkit_panel** out_panel,
                                         char** truth_json);

#ifdef __cplusplus
}
#endif

#endif
