#ifndef BURSTFUSE_H
#define BURSTFUSE_H

/* Generated by cbindgen from burstfuse-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code of every fallible call. `BF_STATUS_OK` is zero; anything else
 * leaves a description in `bf_last_error_message`.
 */
typedef enum {
  BF_STATUS_OK = 0,
  BF_STATUS_INVALID_ARGUMENT = 1,
  BF_STATUS_IO = 2,
  BF_STATUS_PARSE = 3,
  BF_STATUS_UNSUPPORTED = 4,
  BF_STATUS_INTEGRITY = 5,
  BF_STATUS_INTERNAL = 6,
} BfStatus;

/**
 * One execution's burst dataset (opaque).
 */
typedef struct BfDataset BfDataset;

/**
 * A cross-execution match set (opaque).
 */
typedef struct BfMatchSet BfMatchSet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Crate version as a static string.
 */
const char *bf_version(void);

/**
 * Description of the last error on this thread; valid until the next
 * failing call.
 */
const char *bf_last_error_message(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from a `bf_*` call and not have been freed before.
 */
void bf_string_free(char *s);

/**
 * Loads a dataset by parsing a `.prv` trace (plus companion `.pcf` when
 * given) and extracting its compute bursts.
 *
 * # Safety
 * String arguments must be null or valid NUL-terminated strings; `out` must
 * be a valid pointer.
 */
BfStatus bf_dataset_from_prv(const char *prv_path,
                             const char *pcf_path,
                             const char *exec_id,
                             const char *counter_set,
                             const char *config_json,
                             BfDataset **out);

/**
 * Loads a dataset from a burst CSV.
 *
 * # Safety
 * See `bf_dataset_from_prv`.
 */
BfStatus bf_dataset_from_csv(const char *csv_path, const char *config_json, BfDataset **out);

/**
 * Writes a dataset as a burst CSV.
 *
 * # Safety
 * `dataset` must be a live handle; `csv_path` a valid string.
 */
BfStatus bf_dataset_write_csv(const BfDataset *dataset, const char *csv_path);

/**
 * Number of ranks in the dataset; 0 for a null handle.
 *
 * # Safety
 * `dataset` must be null or a live handle.
 */
uint32_t bf_dataset_rank_count(const BfDataset *dataset);

/**
 * Number of compute bursts in the dataset; 0 for a null handle.
 *
 * # Safety
 * `dataset` must be null or a live handle.
 */
uint64_t bf_dataset_burst_count(const BfDataset *dataset);

/**
 * # Safety
 * `dataset` must be null or an unreleased handle from this library.
 */
void bf_dataset_free(BfDataset *dataset);

/**
 * Runs two-stage matching over `count` datasets.
 *
 * # Safety
 * `datasets` must point to `count` live handles; `out` must be valid.
 */
BfStatus bf_match(const BfDataset *const *datasets,
                  size_t count,
                  const char *config_json,
                  BfMatchSet **out);

/**
 * Serializes a match set; free the result with `bf_string_free`.
 *
 * # Safety
 * `match_set` must be a live handle.
 */
char *bf_match_set_to_json(const BfMatchSet *match_set);

/**
 * Parses a match-set JSON document.
 *
 * # Safety
 * `json` must be a valid string; `out` a valid pointer.
 */
BfStatus bf_match_set_from_json(const char *json, BfMatchSet **out);

/**
 * Number of match groups; 0 for a null handle.
 *
 * # Safety
 * `match_set` must be null or a live handle.
 */
uint64_t bf_match_set_group_count(const BfMatchSet *match_set);

/**
 * # Safety
 * `match_set` must be null or an unreleased handle from this library.
 */
void bf_match_set_free(BfMatchSet *match_set);

/**
 * Fuses the executions over the match set and writes the merged CSV plus
 * its column manifest (`<csv>.manifest.json` when `manifest_path` is null).
 * The base execution is chosen by lowest unmatched rate.
 *
 * # Safety
 * Handles and strings as above.
 */
BfStatus bf_fuse_to_csv(const BfDataset *const *datasets,
                        size_t count,
                        const BfMatchSet *match_set,
                        const char *config_json,
                        const char *csv_path,
                        const char *manifest_path);

/**
 * Validates executions with identical counter sets against the match set;
 * returns the report JSON through `out_json` (free with `bf_string_free`).
 *
 * # Safety
 * Handles and strings as above.
 */
BfStatus bf_validate_to_json(const BfDataset *const *datasets,
                             size_t count,
                             const BfMatchSet *match_set,
                             const char *config_json,
                             char **out_json);

/**
 * Generates a synthetic suite from a generator config (JSON text) and
 * writes `runN.prv`/`runN.pcf` plus `truth.json` into `outdir`.
 *
 * # Safety
 * Strings as above.
 */
BfStatus bf_synth_generate(const char *config_json, const char *outdir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BURSTFUSE_H */
