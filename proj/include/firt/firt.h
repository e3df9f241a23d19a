#ifndef FIRT_FIRT_H
#define FIRT_FIRT_H

#include <stddef.h>
#include <stdint.h>

#if defined(FIRT_BUILDING_LIBRARY)
#define FIRT_API __attribute__((visibility("default")))
#else
#define FIRT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. The first four double as process exit codes. */
typedef enum firt_status {
  FIRT_OK = 0,
  FIRT_ERR_FAILURE = 1,
  FIRT_ERR_INPUT = 2,
  FIRT_CONVERGENCE_WARNING = 3,
  FIRT_ERR_DOMAIN = 4,
  FIRT_ERR_UNDEFINED = 5,
  FIRT_ERR_ARGUMENT = 6
} firt_status;

/* Message for the last non-OK status on this thread; "" if none. */
FIRT_API const char* firt_last_error(void);
FIRT_API const char* firt_version(void);

/* Warnings go to stderr unless a callback is installed. NULL restores the
   default. The callback may be invoked from worker threads. */
typedef void (*firt_warning_fn)(const char* message, void* user_data);
FIRT_API void firt_set_warning_callback(firt_warning_fn fn, void* user_data);

/* ---- Fuzzy numbers ---------------------------------------------------- */

typedef struct firt_moments {
  double mass;
  double mean;
  double variance;
  int degenerate;
} firt_moments;

FIRT_API firt_status firt_membership(double l, double c, double r, double omega, double y, double* out);
FIRT_API firt_status firt_moments_of(double l, double c, double r, double omega, firt_moments* out);

/* ---- Trees ------------------------------------------------------------ */

typedef struct firt_tree firt_tree;

/* Built-in name ("fig3-linear", "fig2a") or path to a mapping file. */
FIRT_API firt_status firt_tree_load(const char* name_or_path, firt_tree** out);
/* Mapping text: one row per category, entries 0, 1 or NA. */
FIRT_API firt_status firt_tree_parse(const char* text, firt_tree** out);
FIRT_API void firt_tree_free(firt_tree* tree);
FIRT_API int firt_tree_n_nodes(const firt_tree* tree);
FIRT_API int firt_tree_n_categories(const firt_tree* tree);
/* eta and alpha hold n_nodes values; out receives n_categories values. */
FIRT_API firt_status firt_category_distribution(const firt_tree* tree, const double* eta, const double* alpha,
                                                double* out);

/* ---- Pipeline configuration ------------------------------------------- */

typedef struct firt_config firt_config;

FIRT_API firt_status firt_config_create(firt_config** out);
FIRT_API void firt_config_free(firt_config* config);
/* Keys: ratings, times, covariates, schema, tree, out, models (comma list,
   possibly empty), covariance (none, diagonal, full). */
FIRT_API firt_status firt_config_set_string(firt_config* config, const char* key, const char* value);
/* Keys: trim, w_ones. */
FIRT_API firt_status firt_config_set_bool(firt_config* config, const char* key, int value);
/* Keys: alpha_level. */
FIRT_API firt_status firt_config_set_double(firt_config* config, const char* key, double value);
/* Keys: seed, rating_offset, threads. */
FIRT_API firt_status firt_config_set_int(firt_config* config, const char* key, int64_t value);

/* ---- Commands ----------------------------------------------------------
   Each writes its files into the configured output directory and returns
   FIRT_OK, FIRT_CONVERGENCE_WARNING, FIRT_ERR_INPUT or FIRT_ERR_FAILURE.
   Warnings raised during the call are passed to the warning callback. */

FIRT_API firt_status firt_simulate(const char* out_dir, const char* tree, int n_raters, int n_items,
                                   uint64_t seed);
FIRT_API firt_status firt_trim(const firt_config* config);
FIRT_API firt_status firt_fit_irtree(const firt_config* config);
FIRT_API firt_status firt_fuzzify(const firt_config* config, const char* fit_json);
FIRT_API firt_status firt_regress(const firt_config* config, const char* composite_csv);
/* Full pipeline; always writes manifest.json, also on failure. */
FIRT_API firt_status firt_run(const firt_config* config);
FIRT_API firt_status firt_report(const char* fits_json, const char* composite_csv, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif
