#ifndef RULXAI_H
#define RULXAI_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RulxaiStatus {
  RULXAI_STATUS_OK = 0,
  RULXAI_STATUS_NULL_POINTER = 1,
  RULXAI_STATUS_INVALID_ARGUMENT = 2,
  RULXAI_STATUS_IO = 3,
  RULXAI_STATUS_PARSE = 4,
  RULXAI_STATUS_COMPUTATION = 5,
  RULXAI_STATUS_BUFFER_TOO_SMALL = 6,
  RULXAI_STATUS_PANIC = 7,
} RulxaiStatus;

/**
 * Opaque dataset handle.
 */
typedef struct RulxaiDataset RulxaiDataset;

/**
 * Opaque fitted-model handle.
 */
typedef struct RulxaiModel RulxaiModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next rulxai call on the same thread.
 */
const char *rulxai_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rulxai_version(void);

/**
 * Loads a 26-column trajectory file, derives RUL, splits and (optionally)
 * min-max scales it. `unit < 0` keeps every engine; `csv` selects the
 * header-CSV format instead of whitespace-delimited text.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RulxaiStatus rulxai_dataset_load(const char *path,
                                      bool csv,
                                      int64_t unit,
                                      double test_ratio,
                                      uint64_t seed,
                                      bool normalize,
                                      struct RulxaiDataset **out);

/**
 * New dataset restricted to the named feature columns, in the given order.
 *
 * # Safety
 * `ds` must be a live dataset handle, `names` an array of `n_names`
 * NUL-terminated strings and `out` a valid pointer.
 */
enum RulxaiStatus rulxai_dataset_select(const struct RulxaiDataset *ds,
                                        const char *const *names,
                                        size_t n_names,
                                        struct RulxaiDataset **out);

/**
 * Rows in the dataset; 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live dataset handle.
 */
size_t rulxai_dataset_n_rows(const struct RulxaiDataset *ds);

/**
 * # Safety
 * `ds` must be null or a live dataset handle.
 */
size_t rulxai_dataset_n_features(const struct RulxaiDataset *ds);

/**
 * # Safety
 * `ds` must be null or a live dataset handle.
 */
size_t rulxai_dataset_n_train(const struct RulxaiDataset *ds);

/**
 * # Safety
 * `ds` must be null or a live dataset handle.
 */
size_t rulxai_dataset_n_test(const struct RulxaiDataset *ds);

/**
 * # Safety
 * `ds` must be null or a handle not yet freed.
 */
void rulxai_dataset_free(struct RulxaiDataset *ds);

/**
 * Trains a model of `kind` (`tree`, `figs`, `ebm`, `relu_dnn`) on the
 * training split. `spec_json` may be null or a JSON object overriding
 * individual hyperparameters.
 *
 * # Safety
 * `ds` must be a live dataset handle, `kind` a NUL-terminated string,
 * `spec_json` null or NUL-terminated, and `out` a valid pointer.
 */
enum RulxaiStatus rulxai_model_train(const struct RulxaiDataset *ds,
                                     const char *kind,
                                     const char *spec_json,
                                     struct RulxaiModel **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RulxaiStatus rulxai_model_load(const char *path, struct RulxaiModel **out);

/**
 * # Safety
 * `model` must be a live model handle and `path` a NUL-terminated string.
 */
enum RulxaiStatus rulxai_model_save(const struct RulxaiModel *model, const char *path);

/**
 * Serialized model as a newly allocated string; release it with
 * [`rulxai_string_free`].
 *
 * # Safety
 * `model` must be a live model handle and `out` a valid pointer.
 */
enum RulxaiStatus rulxai_model_to_json(const struct RulxaiModel *model, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void rulxai_string_free(char *s);

/**
 * Feature count the model expects; 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live model handle.
 */
size_t rulxai_model_n_features(const struct RulxaiModel *model);

/**
 * Predicts `n_rows` rows of a row-major `n_rows x n_cols` matrix into
 * `out` (length `n_rows`).
 *
 * # Safety
 * `x` must point to `n_rows * n_cols` doubles and `out` to `n_rows`
 * writable doubles.
 */
enum RulxaiStatus rulxai_model_predict(const struct RulxaiModel *model,
                                       const double *x,
                                       size_t n_rows,
                                       size_t n_cols,
                                       double *out);

/**
 * Exact Shapley values of dataset row `sample` against a seeded background
 * of up to 100 training rows. `phi` receives one value per model feature
 * (`phi_len` must be at least that) and `base` the background mean.
 *
 * # Safety
 * `model` and `ds` must be live handles, `phi` must point to `phi_len`
 * writable doubles and `base` to one.
 */
enum RulxaiStatus rulxai_model_shapley(const struct RulxaiModel *model,
                                       const struct RulxaiDataset *ds,
                                       size_t sample,
                                       uint64_t seed,
                                       double *phi,
                                       size_t phi_len,
                                       double *base);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void rulxai_model_free(struct RulxaiModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RULXAI_H */
