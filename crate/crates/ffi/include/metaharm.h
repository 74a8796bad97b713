#ifndef METAHARM_H
#define METAHARM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

enum MhStatus
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  MH_STATUS_OK = 0,
  MH_STATUS_NULL_ARGUMENT = 1,
  MH_STATUS_INVALID_UTF8 = 2,
  MH_STATUS_IO = 3,
  MH_STATUS_PARSE = 4,
  MH_STATUS_MODEL = 5,
  MH_STATUS_INVALID_ARGUMENT = 6,
  MH_STATUS_INDEX_OUT_OF_RANGE = 7,
  MH_STATUS_DATA = 8,
  MH_STATUS_PANIC = 9,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum MhStatus MhStatus;
#else
typedef int32_t MhStatus;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

enum MhMethod
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  MH_METHOD_NONE = 0,
  MH_METHOD_LEVENSHTEIN = 1,
  MH_METHOD_EMBEDDING = 2,
  MH_METHOD_CLASSIFIER = 3,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum MhMethod MhMethod;
#else
typedef int32_t MhMethod;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

enum MhConfidence
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  MH_CONFIDENCE_UNMATCHED = 0,
  MH_CONFIDENCE_WEAK = 1,
  MH_CONFIDENCE_QUALIFIED = 2,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum MhConfidence MhConfidence;
#else
typedef int32_t MhConfidence;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

/**
 * A loaded standard schema, optional embedding model and optional classifier.
 */
typedef struct MhEngine MhEngine;

/**
 * Crosswalk results for one call.
 */
typedef struct MhResults MhResults;

/**
 * Matcher settings for [`mh_crosswalk`]. Start from [`mh_strategy_default`].
 * `mode` holds an [`MhMode`] value; anything else is rejected.
 */
typedef struct MhStrategy {
  int32_t mode;
  uint32_t threshold;
  uint32_t k;
  bool strict;
} MhStrategy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *mh_version(void);

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call into this library on the same thread.
 */
const char *mh_last_error(void);

/**
 * Levenshtein mode, threshold 70, k 5, not strict.
 */
struct MhStrategy mh_strategy_default(void);

/**
 * Loads and refines a standard schema (CSV, or JSON by `.json` extension)
 * and, when `model_path` is not null, an embedding model.
 *
 * # Safety
 * Path arguments are null or NUL-terminated strings; `out` is a valid
 * pointer to write the new handle to.
 */
MhStatus mh_engine_load(const char *std_path, const char *model_path, struct MhEngine **out);

/**
 * Trains the feedback classifier from a decision log and attaches it.
 *
 * # Safety
 * `engine` comes from [`mh_engine_load`]; `log_path` is a NUL-terminated string.
 */
MhStatus mh_engine_load_decisions(struct MhEngine *engine, const char *log_path);

/**
 * # Safety
 * `engine` is null or comes from [`mh_engine_load`] and is not used afterwards.
 */
void mh_engine_free(struct MhEngine *engine);

/**
 * # Safety
 * `engine` comes from [`mh_engine_load`]; `out` is valid for writes.
 */
MhStatus mh_engine_entry_count(const struct MhEngine *engine, size_t *out);

/**
 * Crosswalks `n` column names. `strategy` may be null for the defaults.
 *
 * # Safety
 * `names` points to `n` NUL-terminated strings; `out` is valid for writes.
 */
MhStatus mh_crosswalk(const struct MhEngine *engine,
                      const char *const *names,
                      size_t n,
                      const struct MhStrategy *strategy,
                      struct MhResults **out);

/**
 * Crosswalks a source schema given as JSON (`{"dataset_id", "columns":
 * [{"name", ...}]}`). `strategy_json` is null or a strategy object. On
 * success `*out_json` holds a JSON array of results; free it with
 * [`mh_string_free`].
 *
 * # Safety
 * String arguments are null or NUL-terminated; `out_json` is valid for writes.
 */
MhStatus mh_crosswalk_json(const struct MhEngine *engine,
                           const char *source_json,
                           const char *strategy_json,
                           char **out_json);

/**
 * # Safety
 * `s` is null or a string returned by [`mh_crosswalk_json`].
 */
void mh_string_free(char *s);

/**
 * # Safety
 * `results` is null or comes from [`mh_crosswalk`] and is not used afterwards.
 */
void mh_results_free(struct MhResults *results);

/**
 * # Safety
 * `results` comes from [`mh_crosswalk`]; `out` is valid for writes.
 */
MhStatus mh_results_len(const struct MhResults *results, size_t *out);

/**
 * Source column name of result `i`.
 *
 * # Safety
 * `results` comes from [`mh_crosswalk`]; `out` is valid for writes.
 */
MhStatus mh_result_source(const struct MhResults *results, size_t i, const char **out);

/**
 * Matched entry id of result `i`; writes null when the column is unmatched.
 *
 * # Safety
 * `results` comes from [`mh_crosswalk`]; `out` is valid for writes.
 */
MhStatus mh_result_entry_id(const struct MhResults *results, size_t i, const char **out);

/**
 * Predicted tier path of result `i`, tiers joined by `|`; empty when unmatched.
 *
 * # Safety
 * `results` comes from [`mh_crosswalk`]; `out` is valid for writes.
 */
MhStatus mh_result_path(const struct MhResults *results, size_t i, const char **out);

/**
 * # Safety
 * `results` comes from [`mh_crosswalk`]; `out` is valid for writes.
 */
MhStatus mh_result_score(const struct MhResults *results, size_t i, double *out);

/**
 * # Safety
 * `results` comes from [`mh_crosswalk`]; `out` is valid for writes.
 */
MhStatus mh_result_method(const struct MhResults *results, size_t i, MhMethod *out);

/**
 * # Safety
 * `results` comes from [`mh_crosswalk`]; `out` is valid for writes.
 */
MhStatus mh_result_confidence(const struct MhResults *results, size_t i, MhConfidence *out);

/**
 * Number of alternates of result `i`.
 *
 * # Safety
 * `results` comes from [`mh_crosswalk`]; `out` is valid for writes.
 */
MhStatus mh_result_alternate_count(const struct MhResults *results, size_t i, size_t *out);

/**
 * Alternate `j` of result `i`: its entry id and score.
 *
 * # Safety
 * `results` comes from [`mh_crosswalk`]; `entry_id` and `score` are valid for writes.
 */
MhStatus mh_result_alternate(const struct MhResults *results,
                             size_t i,
                             size_t j,
                             const char **entry_id,
                             double *score);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* METAHARM_H */
