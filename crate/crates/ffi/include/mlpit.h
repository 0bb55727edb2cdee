/* C interface to the mlpit toolkit. Generated by cbindgen; do not edit. */

#ifndef MLPIT_H
#define MLPIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code for every fallible call in this API.
typedef enum {
  // The call succeeded; out parameters are valid.
  MLP_STATUS_OK = 0,
  // A required pointer argument was NULL.
  MLP_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  MLP_STATUS_INVALID_UTF8 = 2,
  // The file could not be read or written.
  MLP_STATUS_IO = 3,
  // The pipeline or scenario source failed to parse or validate.
  MLP_STATUS_PARSE = 4,
  // The dataset or generator input was rejected.
  MLP_STATUS_DATA = 5,
  // Execution failed after parsing succeeded.
  MLP_STATUS_RUN = 6,
  // The handle does not carry the requested quantity.
  MLP_STATUS_NOT_APPLICABLE = 7,
  // A panic was caught at the boundary; state may be incomplete.
  MLP_STATUS_INTERNAL = 8,
} MlpStatus;

// Opaque dataset handle.
typedef struct MlpDataset MlpDataset;

// Opaque scenario-report handle; paired or batch depending on the scenario.
typedef struct MlpReport MlpReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the description of the most recent failure on this thread into
// `buffer` (NUL-terminated, truncated to `capacity` bytes) and return the
// full message length in bytes, excluding the NUL. Returns 0 when the last
// call on this thread succeeded. `buffer` may be NULL to query the length.
size_t mlp_last_error_message(char *buffer, size_t capacity);

// Toolkit version as a static NUL-terminated string; never freed.
const char *mlp_version(void);

// Release a string returned through a `char **` out parameter.
void mlp_string_free(char *string);

// Load a dataset from its CSV form. On success `*out` owns the handle.
//
// # Safety
// `path` must point to a NUL-terminated string; `out` must be a valid
// pointer to write one pointer through.
MlpStatus mlp_dataset_load(const char *path, MlpDataset **out);

// Generate a synthetic scenario dataset. `kind` is one of `oversample`,
// `featsel`, `patient`, `augment`, `batch`. `knobs` is a comma- or
// space-separated `KEY=VALUE` list, or NULL for defaults. When the kind
// produces a companion external set and `out_external` is non-NULL it is
// written there (NULL otherwise).
//
// # Safety
// `kind` must be NUL-terminated, `knobs` NUL-terminated or NULL, `out`
// valid; `out_external` may be NULL.
MlpStatus mlp_dataset_generate(const char *kind,
                               const char *knobs,
                               uint64_t seed,
                               MlpDataset **out,
                               MlpDataset **out_external);

// Number of samples; 0 for NULL.
size_t mlp_dataset_n_samples(const MlpDataset *dataset);

// Number of feature columns; 0 for NULL.
size_t mlp_dataset_n_features(const MlpDataset *dataset);

// Write the dataset in its CSV form.
//
// # Safety
// `dataset` must be a live handle; `path` NUL-terminated.
MlpStatus mlp_dataset_write(const MlpDataset *dataset, const char *path);

// Release a dataset handle. NULL is a no-op.
//
// # Safety
// `dataset` must be NULL or a handle this library returned, not yet freed.
void mlp_dataset_free(MlpDataset *dataset);

// Lint pipeline source text. `*out_rendered` receives the diagnostics in
// `label:line:col: severity CODE message` form (empty string when clean) and
// `*out_errors` the number of error-severity findings; either may be NULL
// when not wanted.
//
// # Safety
// `label` and `source` must be NUL-terminated; non-NULL out pointers valid.
MlpStatus mlp_lint_source(const char *label,
                          const char *source,
                          char **out_rendered,
                          uint32_t *out_errors);

// Execute pipeline source against a dataset. `*out_summary` (optional)
// receives one line per evaluation, baseline, and external record plus the
// audit verdict; `*out_violations` (optional) the audit violation count.
// `external` may be NULL when the pipeline has no `external_eval`.
//
// # Safety
// `source` must be NUL-terminated; `dataset` (and `external` when non-NULL)
// must be live handles; non-NULL out pointers valid.
MlpStatus mlp_exec_source(const char *source,
                          const MlpDataset *dataset,
                          uint64_t seed,
                          const MlpDataset *external,
                          char **out_summary,
                          uint32_t *out_violations);

// Parse and run scenario source text. Paired scenarios run both arms;
// `batch` scenarios run the merge probe. `reps_override` replaces the
// scenario's repetition count when non-zero.
//
// # Safety
// `source` must be NUL-terminated; `out` valid.
MlpStatus mlp_run_scenario_source(const char *source, uint32_t reps_override, MlpReport **out);

// 0 for a paired report, 1 for a batch report, -1 for NULL.
int32_t mlp_report_kind(const MlpReport *report);

// Human-readable report table.
//
// # Safety
// `report` must be a live handle; `out` valid.
MlpStatus mlp_report_text(const MlpReport *report, char **out);

// Per-repetition rows in delimited form.
//
// # Safety
// `report` must be a live handle; `out` valid.
MlpStatus mlp_report_csv(const MlpReport *report, char **out);

// Mean-F1 gap (incorrect minus correct) of a paired report.
//
// # Safety
// `report` must be a live handle; `out` valid.
MlpStatus mlp_report_f1_gap(const MlpReport *report, double *out);

// Rank-sum p-value of a paired report's F1 comparison.
//
// # Safety
// `report` must be a live handle; `out` valid.
MlpStatus mlp_report_p_value(const MlpReport *report, double *out);

// Release a report handle. NULL is a no-op.
//
// # Safety
// `report` must be NULL or a handle this library returned, not yet freed.
void mlp_report_free(MlpReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MLPIT_H */
