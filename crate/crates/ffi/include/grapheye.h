#ifndef GRAPHEYE_H
#define GRAPHEYE_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible function.
 */
typedef enum GeStatus {
  GE_STATUS_OK = 0,
  GE_STATUS_NULL_ARGUMENT = 1,
  GE_STATUS_INVALID_UTF8 = 2,
  GE_STATUS_IO = 3,
  GE_STATUS_PARSE = 4,
  GE_STATUS_GRAPH = 5,
  GE_STATUS_MODEL = 6,
  GE_STATUS_NOT_FOUND = 7,
  GE_STATUS_JSON = 8,
  GE_STATUS_PANIC = 9,
} GeStatus;

/**
 * Code property graph of one function.
 */
typedef struct GeGraph GeGraph;

/**
 * Trained classifier.
 */
typedef struct GeModel GeModel;

/**
 * Function vocabulary used for vectorization.
 */
typedef struct GeVocab GeVocab;

/**
 * Classification result. `label` is 0 for good and 1 for bad.
 */
typedef struct GePrediction {
  int label;
  double prob_bad;
} GePrediction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call into this library on the same thread.
 */
const char *ge_last_error(void);

/**
 * Library version as a static string.
 */
const char *ge_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and must not be used afterwards.
 */
void ge_string_free(char *s);

/**
 * Loads a model saved as JSON.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum GeStatus ge_model_load(const char *path, struct GeModel **out);

/**
 * Builds a model from its JSON text.
 *
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum GeStatus ge_model_from_json(const char *json, struct GeModel **out);

/**
 * # Safety
 * `model` must come from `ge_model_load`/`ge_model_from_json` or be null.
 */
void ge_model_free(struct GeModel *model);

/**
 * Classifies a graph.
 *
 * # Safety
 * `model` and `graph` must be live handles; `out` must be writable.
 */
enum GeStatus ge_model_predict(const struct GeModel *model,
                               const struct GeGraph *graph,
                               struct GePrediction *out);

/**
 * Parses C source text and builds the graph of one function. With a null
 * `function`, the source must define exactly one function.
 *
 * # Safety
 * `source` must be a nul-terminated string, `function` null or
 * nul-terminated; `out` must be writable.
 */
enum GeStatus ge_graph_from_source(const char *source, const char *function, struct GeGraph **out);

/**
 * # Safety
 * `graph` must come from `ge_graph_from_source` or be null.
 */
void ge_graph_free(struct GeGraph *graph);

/**
 * Number of nodes in the graph, or 0 for a null handle.
 *
 * # Safety
 * `graph` must be a live handle or null.
 */
size_t ge_graph_num_nodes(const struct GeGraph *graph);

/**
 * Serializes the graph as JSON.
 *
 * # Safety
 * `graph` must be a live handle; `out` must be writable.
 */
enum GeStatus ge_graph_to_json(const struct GeGraph *graph, char **out);

/**
 * Renders the graph in Graphviz DOT.
 *
 * # Safety
 * `graph` must be a live handle; `out` must be writable.
 */
enum GeStatus ge_graph_to_dot(const struct GeGraph *graph, char **out);

/**
 * Loads a function vocabulary from its JSON text.
 *
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum GeStatus ge_vocab_from_json(const char *json, struct GeVocab **out);

/**
 * Vocabulary stored inside a model. The caller owns the result.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum GeStatus ge_model_vocab(const struct GeModel *model, struct GeVocab **out);

/**
 * # Safety
 * `vocab` must come from this library or be null.
 */
void ge_vocab_free(struct GeVocab *vocab);

/**
 * Vectorizes a graph into `{"x": [...], "a": [...]}` JSON.
 *
 * # Safety
 * `graph` and `vocab` must be live handles; `out` must be writable.
 */
enum GeStatus ge_graph_vectorize_json(const struct GeGraph *graph,
                                      const struct GeVocab *vocab,
                                      char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRAPHEYE_H */
