#ifndef ONSET_H
#define ONSET_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum OnsetStatus {
  ONSET_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  ONSET_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  ONSET_STATUS_INVALID_UTF8 = 2,
  /**
   * Input text (Turtle, count table, graph JSON) could not be parsed.
   */
  ONSET_STATUS_PARSE_ERROR = 3,
  /**
   * A class or link iri is not part of the ontology.
   */
  ONSET_STATUS_UNKNOWN_TERM = 4,
  /**
   * A graph is structurally invalid (dangling edge, duplicate id, ...).
   */
  ONSET_STATUS_INVALID_GRAPH = 5,
  /**
   * A graph is too large for exact edit distance.
   */
  ONSET_STATUS_TOO_LARGE = 6,
  /**
   * A bug: the call panicked.
   */
  ONSET_STATUS_INTERNAL = 99,
} OnsetStatus;

/**
 * A prototype graph.
 */
typedef struct OnsetGraph OnsetGraph;

/**
 * A loaded ontology.
 */
typedef struct OnsetOntology OnsetOntology;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Owned by the
 * library and valid until the next call on the same thread.
 */
const char *onset_last_error(void);

/**
 * Library version, a static string.
 */
const char *onset_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void onset_string_free(char *s);

/**
 * Loads an ontology from Turtle text. `counts_tsv` (iri, tab, count per
 * line) may be null.
 *
 * # Safety
 * String arguments must be null or nul-terminated; `out` must be writable.
 */
enum OnsetStatus onset_ontology_load(const char *turtle,
                                     const char *counts_tsv,
                                     struct OnsetOntology **out);

/**
 * Loads a bundled ontology: `"dbpedia_excerpt"` or `"toy"`.
 *
 * # Safety
 * `name` must be null or nul-terminated; `out` must be writable.
 */
enum OnsetStatus onset_ontology_builtin(const char *name, struct OnsetOntology **out);

/**
 * # Safety
 * `o` must be null or a live handle from this library.
 */
void onset_ontology_free(struct OnsetOntology *o);

/**
 * Number of classes and links in the ontology.
 *
 * # Safety
 * `o` must be a live handle; out pointers must be writable.
 */
enum OnsetStatus onset_ontology_counts(const struct OnsetOntology *o,
                                       size_t *classes,
                                       size_t *links);

/**
 * Whether `candidate` equals `ancestor` or is a (transitive) subclass of it.
 *
 * # Safety
 * `o` must be a live handle; strings nul-terminated; `out` writable.
 */
enum OnsetStatus onset_subtypeof(const struct OnsetOntology *o,
                                 const char *candidate,
                                 const char *ancestor,
                                 bool *out);

/**
 * Parses a graph from its JSON form
 * (`{"nodes":[{"id","class"}],"edges":[{"from","link","to"}],"stage"?}`).
 *
 * # Safety
 * `json` must be nul-terminated; `out` writable.
 */
enum OnsetStatus onset_graph_from_json(const char *json, struct OnsetGraph **out);

/**
 * # Safety
 * `g` must be null or a live handle from this library.
 */
void onset_graph_free(struct OnsetGraph *g);

/**
 * Serializes a graph to JSON; release with [`onset_string_free`].
 *
 * # Safety
 * `g` must be a live handle; `out` writable.
 */
enum OnsetStatus onset_graph_to_json(const struct OnsetGraph *g, char **out);

/**
 * Validation report as JSON (`{"violations":[...]}`) and whether it is
 * empty. Either out pointer may be null when not wanted.
 *
 * # Safety
 * Handles must be live; non-null out pointers writable.
 */
enum OnsetStatus onset_validate(const struct OnsetOntology *o,
                                const struct OnsetGraph *g,
                                bool *valid,
                                char **report_json);

/**
 * Reverses flipped edges and drops invalid ones into a new graph handle.
 *
 * # Safety
 * Handles must be live; `out` writable.
 */
enum OnsetStatus onset_correct(const struct OnsetOntology *o,
                               const struct OnsetGraph *g,
                               struct OnsetGraph **out);

/**
 * SELECT query for a corrected or sampled graph.
 *
 * # Safety
 * `g` must be a live handle; `out` writable.
 */
enum OnsetStatus onset_to_sparql(const struct OnsetGraph *g, char **out);

/**
 * GBNF grammar for open-vocabulary graph extraction.
 *
 * # Safety
 * `out` must be writable.
 */
enum OnsetStatus onset_static_grammar(char **out);

/**
 * Normalized graph edit distance similarity in [0, 1].
 *
 * # Safety
 * Handles must be live; `out` writable.
 */
enum OnsetStatus onset_ged_score(const struct OnsetGraph *a,
                                 const struct OnsetGraph *b,
                                 double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ONSET_H */
