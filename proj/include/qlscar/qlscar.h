#ifndef QLSCAR_QLSCAR_H
#define QLSCAR_QLSCAR_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(QLSCAR_BUILDING)
#    define QLSCAR_API __declspec(dllexport)
#  else
#    define QLSCAR_API __declspec(dllimport)
#  endif
#else
#  define QLSCAR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum qlscar_status {
  QLSCAR_OK = 0,
  QLSCAR_ERR_INVALID_ARGUMENT = 1,
  QLSCAR_ERR_NUMERICAL = 2,
  QLSCAR_ERR_IO = 3,
  QLSCAR_ERR_CORRUPT_DATA = 4,
  /* The run finished and wrote its outputs, but some states did not converge. */
  QLSCAR_ERR_NOT_CONVERGED = 5,
  QLSCAR_ERR_INTERNAL = 6
} qlscar_status;

typedef struct qlscar_config qlscar_config_t;
typedef struct qlscar_solution qlscar_solution_t;

/* Message for the last failed call on this thread ("" if none). */
QLSCAR_API const char* qlscar_last_error(void);
QLSCAR_API const char* qlscar_status_name(qlscar_status status);
QLSCAR_API const char* qlscar_version(void);

/* Warnings go to stderr unless a sink is installed; NULL restores stderr. */
typedef void (*qlscar_message_fn)(const char* message, void* user);
QLSCAR_API void qlscar_set_diagnostic_sink(qlscar_message_fn sink, void* user);

/* Worker threads for solves and surveys; n < 1 keeps the runtime default. */
QLSCAR_API void qlscar_set_threads(int n);
QLSCAR_API int qlscar_threads(void);

/* ---- configuration ------------------------------------------------------ */

QLSCAR_API qlscar_status qlscar_config_new(qlscar_config_t** out);
/* Reads a flat-key JSON config (or a run's metadata.json). Relative paths
   inside it resolve against the file's directory. */
QLSCAR_API qlscar_status qlscar_config_load(const char* path, qlscar_config_t** out);
QLSCAR_API qlscar_status qlscar_config_parse(const char* json_text, qlscar_config_t** out);
QLSCAR_API void qlscar_config_free(qlscar_config_t* cfg);
/* `value` is JSON ("3", "0.5", "[1, 2]", "true"); bare words are strings. */
QLSCAR_API qlscar_status qlscar_config_set(qlscar_config_t* cfg, const char* key, const char* value);
/* Caller releases *out with qlscar_string_free. */
QLSCAR_API qlscar_status qlscar_config_to_json(const qlscar_config_t* cfg, char** out);
QLSCAR_API void qlscar_string_free(char* s);

/* ---- commands ----------------------------------------------------------- */

/* One JSON object per progress line. */
typedef void (*qlscar_progress_fn)(const char* json_line, void* user);

/* Writes bumps.csv, states.qlsc, metadata.json and progress.jsonl into the
   configured output directory. QLSCAR_ERR_NOT_CONVERGED when some state did
   not converge (outputs are still written and flagged). */
QLSCAR_API qlscar_status qlscar_run_solve(const qlscar_config_t* cfg, qlscar_progress_fn progress, void* user);
QLSCAR_API qlscar_status qlscar_run_analyze(const qlscar_config_t* cfg, const char* archive_path);
QLSCAR_API qlscar_status qlscar_run_scan(const qlscar_config_t* cfg, qlscar_progress_fn progress, void* user);

QLSCAR_API qlscar_status qlscar_export_orbit(int p, int q, double energy, double eta, double phase,
                                             int samples, double omega0, const char* path);
QLSCAR_API qlscar_status qlscar_export_oracle(const qlscar_config_t* cfg, double e_cut, size_t states,
                                              const char* path);
QLSCAR_API qlscar_status qlscar_export_bumps(const qlscar_config_t* cfg, const char* path);
QLSCAR_API qlscar_status qlscar_export_density(const char* archive_path, size_t index, const char* path);

/* ---- in-memory solutions ------------------------------------------------ */

/* *out is set on QLSCAR_OK and on QLSCAR_ERR_NOT_CONVERGED. */
QLSCAR_API qlscar_status qlscar_solve(const qlscar_config_t* cfg, qlscar_solution_t** out);
QLSCAR_API qlscar_status qlscar_solution_load(const char* archive_path, qlscar_solution_t** out);
QLSCAR_API qlscar_status qlscar_solution_save(const qlscar_solution_t* sol, const char* archive_path);
QLSCAR_API void qlscar_solution_free(qlscar_solution_t* sol);

QLSCAR_API size_t qlscar_solution_count(const qlscar_solution_t* sol);
QLSCAR_API qlscar_status qlscar_solution_grid(const qlscar_solution_t* sol, int* points_x, int* points_y,
                                              double* extent_x, double* extent_y);
QLSCAR_API qlscar_status qlscar_solution_energy(const qlscar_solution_t* sol, size_t index, double* energy);
/* NaN for loaded archives, which carry no residuals. */
QLSCAR_API qlscar_status qlscar_solution_residual(const qlscar_solution_t* sol, size_t index, double* residual);
QLSCAR_API int qlscar_solution_converged(const qlscar_solution_t* sol);
/* Copies 2 * points_x * points_y doubles (re, im pairs, row-major). */
QLSCAR_API qlscar_status qlscar_solution_state(const qlscar_solution_t* sol, size_t index, double* buffer,
                                               size_t buffer_len);
QLSCAR_API qlscar_status qlscar_solution_alpha(const qlscar_solution_t* sol, size_t index, double omega_x,
                                               double omega_y, double* alpha);

#ifdef __cplusplus
}
#endif

#endif
