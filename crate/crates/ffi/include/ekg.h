#ifndef EKG_H
#define EKG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EkgFormat {
  EKG_FORMAT_TEXT = 0,
  EKG_FORMAT_CSV = 1,
} EkgFormat;

// Result code of every call.
typedef enum EkgStatus {
  EKG_STATUS_OK = 0,
  EKG_STATUS_NULL_POINTER = 1,
  EKG_STATUS_INVALID_UTF8 = 2,
  EKG_STATUS_IO = 3,
  // Malformed configuration, table, snapshot, or argument.
  EKG_STATUS_INPUT = 4,
  // Query parse or evaluation failure.
  EKG_STATUS_QUERY = 5,
  // A named entity, type, or class does not exist.
  EKG_STATUS_NOT_FOUND = 6,
  // The call panicked; the graph may be in an unspecified state.
  EKG_STATUS_INTERNAL = 7,
} EkgStatus;

// Opaque graph handle.
typedef struct EkgGraph EkgGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until
// the next call into the library on the same thread.
const char *ekg_last_error_message(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` is null or a string from this library not yet freed.
void ekg_string_free(char *s);

// An empty graph with the standard indexes.
struct EkgGraph *ekg_graph_new(void);

// # Safety
// `g` is null or a handle from this library not yet freed.
void ekg_graph_free(struct EkgGraph *g);

// Reads a snapshot written by [`ekg_graph_save`] or the CLI.
//
// # Safety
// `path` is a valid string; `out` is valid for writes.
enum EkgStatus ekg_graph_load(const char *path, struct EkgGraph **out);

// # Safety
// `g` is a live handle; `path` is a valid string.
enum EkgStatus ekg_graph_save(const struct EkgGraph *g, const char *path);

// Runs the full conversion. On success `*out` receives a new graph and
// `*violations` (if not null) the number of constraint violations.
//
// # Safety
// String arguments are valid; `out` is valid for writes; `violations` is
// null or valid for writes.
enum EkgStatus ekg_pipeline_run(const char *config_path,
                                const char *csv_path,
                                struct EkgGraph **out,
                                size_t *violations);

// # Safety
// `g` is a live handle; `out` is valid for writes.
enum EkgStatus ekg_graph_node_count(const struct EkgGraph *g, size_t *out);

// # Safety
// `g` is a live handle; `out` is valid for writes.
enum EkgStatus ekg_graph_relationship_count(const struct EkgGraph *g, size_t *out);

// Number of nodes carrying `label`.
//
// # Safety
// `g` is a live handle; `label` is a valid string; `out` is valid for writes.
enum EkgStatus ekg_graph_count_label(const struct EkgGraph *g, const char *label, size_t *out);

// Number of relationships of `rel_type`.
//
// # Safety
// `g` is a live handle; `rel_type` is a valid string; `out` is valid for writes.
enum EkgStatus ekg_graph_count_type(const struct EkgGraph *g, const char *rel_type, size_t *out);

// Validates the graph. `families` is a comma-separated list such as
// `"V1,V3"`, or null for all. `*report` receives one line per finding and
// `*count` the number of violations.
//
// # Safety
// `g` is a live handle; `families` is null or a valid string; `report`
// and `count` are valid for writes.
enum EkgStatus ekg_validate(const struct EkgGraph *g,
                            const char *families,
                            char **report,
                            size_t *count);

// Evaluates a pattern query; `*result` receives the table.
//
// # Safety
// `g` is a live handle; `text` is a valid string; `result` is valid for writes.
enum EkgStatus ekg_query(const struct EkgGraph *g,
                         const char *text,
                         enum EkgFormat format,
                         char **result);

// Aggregates DF edges of each listed entity type (comma-separated) into
// DF_C edges over classes of `class_type`, modifying the graph. `*csv`
// receives the edges with `count >= min_count`.
//
// # Safety
// `g` is a live handle; strings are valid; `csv` is valid for writes.
enum EkgStatus ekg_aggregate(struct EkgGraph *g,
                             const char *class_type,
                             const char *entity_types,
                             int64_t min_count,
                             char **csv);

// DOT text of the selection. `scope` uses the CLI syntax (`full`,
// `entity=UID`, `entityType=T1,T2`, `aggregated=CLASS:T1[:MIN]`); null
// means the whole graph.
//
// # Safety
// `g` is a live handle; `scope` is null or a valid string; `out` is valid
// for writes.
enum EkgStatus ekg_export_dot(const struct EkgGraph *g, const char *scope, char **out);

// GraphML text of the selection; `scope` as for [`ekg_export_dot`].
//
// # Safety
// `g` is a live handle; `scope` is null or a valid string; `out` is valid
// for writes.
enum EkgStatus ekg_export_graphml(const struct EkgGraph *g, const char *scope, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EKG_H */
