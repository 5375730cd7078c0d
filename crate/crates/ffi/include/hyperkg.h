#ifndef HYPERKG_H
#define HYPERKG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HkgStatus {
  HKG_STATUS_OK = 0,
  HKG_STATUS_NULL_POINTER = 1,
  HKG_STATUS_INVALID_UTF8 = 2,
  HKG_STATUS_INVALID_INPUT = 3,
  HKG_STATUS_CONFIG = 4,
  HKG_STATUS_PARSE = 5,
  HKG_STATUS_VALIDATION = 6,
  HKG_STATUS_GATEWAY = 7,
  HKG_STATUS_FIXTURE_MISS = 8,
  HKG_STATUS_EXTRACTION = 9,
  HKG_STATUS_UNKNOWN_SKILL = 10,
  HKG_STATUS_TRAINING = 11,
  HKG_STATUS_EVALUATION = 12,
  HKG_STATUS_IO = 13,
  HKG_STATUS_PANIC = 99,
} HkgStatus;

// Configured gateway, prompts and pipeline settings.
typedef struct HkgEngine HkgEngine;

// A skill library.
typedef struct HkgLibrary HkgLibrary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, static storage.
const char *hkg_version(void);

// The last error message on this thread, or NULL. Free with
// `hkg_string_free`.
char *hkg_last_error(void);

// # Safety
// `s` must be NULL or a string returned by this library, freed once.
void hkg_string_free(char *s);

// Build an engine from a TOML or JSON config file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` a valid pointer.
enum HkgStatus hkg_engine_from_file(const char *path, struct HkgEngine **out);

// Build an engine from TOML text. Relative paths resolve against
// `base_dir`, or the working directory when it is NULL.
//
// # Safety
// String arguments must be NUL-terminated (`base_dir` may be NULL);
// `out` a valid pointer.
enum HkgStatus hkg_engine_from_toml(const char *toml, const char *base_dir, struct HkgEngine **out);

// # Safety
// `engine` must be NULL or a handle from this library, freed once.
void hkg_engine_free(struct HkgEngine *engine);

// Backend calls issued so far, retries included.
//
// # Safety
// `engine` must be NULL or a live handle.
uint64_t hkg_engine_request_count(const struct HkgEngine *engine);

// Extract and consolidate a hypergraph; writes its JSON to `out_graph`.
// `library` may be NULL.
//
// # Safety
// Handles must be live; strings NUL-terminated; `out_graph` valid.
enum HkgStatus hkg_extract(const struct HkgEngine *engine,
                           const char *source_id,
                           const char *document,
                           const struct HkgLibrary *library,
                           char **out_graph);

// Score one predicted graph against a gold graph (both JSON) at the given
// thresholds; writes the report JSON to `out_report`.
//
// # Safety
// `thresholds` must point to `n_thresholds` doubles.
enum HkgStatus hkg_evaluate(const struct HkgEngine *engine,
                            const char *pred_json,
                            const char *gold_json,
                            const double *thresholds,
                            size_t n_thresholds,
                            char **out_report);

// Judge each non-empty line of `facts` against the graph; writes the
// report JSON to `out_report`.
//
// # Safety
// Handles must be live; strings NUL-terminated; `out_report` valid.
enum HkgStatus hkg_factcheck(const struct HkgEngine *engine,
                             const char *graph_json,
                             const char *facts,
                             char **out_report);

// Run one learning round over a manifest. Writes the updated library to
// `out_library` and, when `out_report` is not NULL, the round report.
//
// # Safety
// Handles must be live; strings NUL-terminated; `out_library` valid.
enum HkgStatus hkg_learn_round(const struct HkgEngine *engine,
                               const char *manifest_path,
                               const struct HkgLibrary *library,
                               struct HkgLibrary **out_library,
                               char **out_report);

// # Safety
// `out` must be a valid pointer.
enum HkgStatus hkg_library_new(struct HkgLibrary **out);

// Load a library file; a missing file yields an empty library.
//
// # Safety
// `path` NUL-terminated; `out` valid.
enum HkgStatus hkg_library_load(const char *path, struct HkgLibrary **out);

// # Safety
// `json` NUL-terminated; `out` valid.
enum HkgStatus hkg_library_from_json(const char *json, struct HkgLibrary **out);

// # Safety
// `library` live; `out_json` valid.
enum HkgStatus hkg_library_to_json(const struct HkgLibrary *library, char **out_json);

// Write the library atomically.
//
// # Safety
// `library` live; `path` NUL-terminated.
enum HkgStatus hkg_library_save(const struct HkgLibrary *library, const char *path);

// Number of skills; 0 for NULL.
//
// # Safety
// `library` must be NULL or live.
size_t hkg_library_len(const struct HkgLibrary *library);

// Round counter; 0 for NULL.
//
// # Safety
// `library` must be NULL or live.
uint32_t hkg_library_round(const struct HkgLibrary *library);

// Apply a JSON array of ADD/MERGE/SKIP/DELETE operations, all or nothing.
// The input library is left unchanged; the result goes to `out`.
//
// # Safety
// `library` live; `ops_json` NUL-terminated; `out` valid.
enum HkgStatus hkg_library_apply_ops(const struct HkgLibrary *library,
                                     const char *ops_json,
                                     struct HkgLibrary **out);

// # Safety
// `library` must be NULL or a handle from this library, freed once.
void hkg_library_free(struct HkgLibrary *library);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYPERKG_H */
