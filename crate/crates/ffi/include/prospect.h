/* C interface to the prospect corpus-mining pipeline. */

#pragma once

/* Generated with cbindgen:0.29.4 */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum ProspectStatus {
  PROSPECT_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL or a string was not UTF-8.
   */
  PROSPECT_STATUS_INVALID_ARGUMENT = 1,
  PROSPECT_STATUS_IO_ERROR = 2,
  PROSPECT_STATUS_PARSE_ERROR = 3,
  PROSPECT_STATUS_SCHEMA_ERROR = 4,
  PROSPECT_STATUS_CONTRACT_ERROR = 5,
  PROSPECT_STATUS_TRANSPORT_ERROR = 6,
  PROSPECT_STATUS_VALIDATION_ERROR = 7,
  PROSPECT_STATUS_NO_TOPICS = 8,
  /**
   * A panic was caught at the boundary; see prospect_last_error().
   */
  PROSPECT_STATUS_INTERNAL_ERROR = 9,
} ProspectStatus;

typedef enum ProspectMode {
  PROSPECT_MODE_UTTERANCES = 0,
  PROSPECT_MODE_FILTERED_CLAUSES = 1,
} ProspectMode;

typedef enum ProspectEmbedder {
  PROSPECT_EMBEDDER_LEXICAL = 0,
  PROSPECT_EMBEDDER_SERVICE = 1,
} ProspectEmbedder;

typedef enum ProspectTableFormat {
  PROSPECT_TABLE_FORMAT_MARKDOWN = 0,
  PROSPECT_TABLE_FORMAT_CSV = 1,
} ProspectTableFormat;

/**
 * Opaque handle to a loaded corpus.
 */
typedef struct ProspectCorpus ProspectCorpus;

/**
 * Opaque handle to query results.
 */
typedef struct ProspectHits ProspectHits;

/**
 * Opaque handle to a fitted topic model.
 */
typedef struct ProspectModel ProspectModel;

/**
 * Everything `prospect_model_build` needs beyond the corpus itself.
 * Obtain a defaulted value from `prospect_build_options_default` and
 * override fields as needed.
 */
typedef struct ProspectBuildOptions {
  enum ProspectMode mode;
  enum ProspectEmbedder embedder;
  /**
   * Lexical embedding dimensionality.
   */
  uint32_t dim;
  uint64_t seed;
  uint32_t n_components;
  uint32_t min_cluster_size;
  uint32_t min_samples;
  double merge_threshold;
  /**
   * Required for the service embedder; ignored otherwise. May be NULL.
   */
  const char *service_url;
  /**
   * Optional stopword list file; NULL selects the built-in list.
   */
  const char *stopwords_path;
} ProspectBuildOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent error on this thread, or NULL.
 * Valid until the next failing call on the same thread.
 */
const char *prospect_last_error(void);

/**
 * Load an SGD-shaped corpus from a JSON file or a directory of them.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string; `out` must be valid for
 * writes.
 */
enum ProspectStatus prospect_corpus_load_sgd(const char *path, struct ProspectCorpus **out);

/**
 * Load a MultiWOZ-shaped corpus from a JSON file.
 *
 * # Safety
 * See `prospect_corpus_load_sgd`.
 */
enum ProspectStatus prospect_corpus_load_multiwoz(const char *path, struct ProspectCorpus **out);

/**
 * Load a normalized JSON-lines corpus written by
 * `prospect_corpus_write_normalized` (or the CLI's `ingest`).
 *
 * # Safety
 * See `prospect_corpus_load_sgd`.
 */
enum ProspectStatus prospect_corpus_read_normalized(const char *path, struct ProspectCorpus **out);

/**
 * Write a corpus as normalized JSON-lines.
 *
 * # Safety
 * `corpus` must be a live handle; `path` a valid NUL-terminated string.
 */
enum ProspectStatus prospect_corpus_write_normalized(const struct ProspectCorpus *corpus,
                                                     const char *path);

/**
 * Number of dialogues in the corpus; 0 for a NULL handle.
 *
 * # Safety
 * `corpus` must be NULL or a live handle.
 */
size_t prospect_corpus_dialogue_count(const struct ProspectCorpus *corpus);

/**
 * # Safety
 * `corpus` must be NULL or an owned handle not used afterwards.
 */
void prospect_corpus_free(struct ProspectCorpus *corpus);

/**
 * Defaults matching the CLI: utterance mode, lexical embedder, dim 64,
 * 5 components, min cluster size 10, min samples 5, merge threshold 0.915.
 */
struct ProspectBuildOptions prospect_build_options_default(void);

/**
 * Segment the corpus and fit the topic model.
 *
 * # Safety
 * `corpus` and `options` must be live pointers; `out` valid for writes;
 * strings inside `options` NULL or valid NUL-terminated strings.
 */
enum ProspectStatus prospect_model_build(const struct ProspectCorpus *corpus,
                                         const struct ProspectBuildOptions *options,
                                         struct ProspectModel **out);

/**
 * Write the model artifact directory.
 *
 * # Safety
 * `model` must be a live handle; `dir` a valid NUL-terminated string.
 */
enum ProspectStatus prospect_model_save(const struct ProspectModel *model, const char *dir);

/**
 * Load a model artifact directory; all invariants are re-validated.
 *
 * # Safety
 * `dir` must be a valid NUL-terminated string; `out` valid for writes.
 */
enum ProspectStatus prospect_model_load(const char *dir, struct ProspectModel **out);

/**
 * Number of topics; 0 for a NULL handle.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t prospect_model_topic_count(const struct ProspectModel *model);

/**
 * Number of documents; 0 for a NULL handle.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t prospect_model_document_count(const struct ProspectModel *model);

/**
 * # Safety
 * `model` must be NULL or an owned handle not used afterwards.
 */
void prospect_model_free(struct ProspectModel *model);

/**
 * Retrieve the `top_k` most similar topics per keyword. `keywords` is a
 * semicolon-separated list; NULL selects the built-in five phrases.
 *
 * # Safety
 * `model` must be a live handle; `keywords` NULL or a valid string; `out`
 * valid for writes.
 */
enum ProspectStatus prospect_query(const struct ProspectModel *model,
                                   const char *keywords,
                                   uint32_t top_k,
                                   struct ProspectHits **out);

/**
 * Number of hits; 0 for a NULL handle.
 *
 * # Safety
 * `hits` must be NULL or a live handle.
 */
size_t prospect_hits_len(const struct ProspectHits *hits);

/**
 * Serialize hits to a JSON string (caller frees with
 * `prospect_string_free`).
 *
 * # Safety
 * `hits` must be a live handle; `out` valid for writes.
 */
enum ProspectStatus prospect_hits_to_json(const struct ProspectHits *hits, char **out);

/**
 * Render hits as a Markdown or RFC-4180 CSV table (caller frees with
 * `prospect_string_free`).
 *
 * # Safety
 * `hits` must be a live handle; `out` valid for writes.
 */
enum ProspectStatus prospect_hits_table(const struct ProspectHits *hits,
                                        enum ProspectTableFormat format,
                                        char **out);

/**
 * # Safety
 * `hits` must be NULL or an owned handle not used afterwards.
 */
void prospect_hits_free(struct ProspectHits *hits);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must be NULL or a string returned by this library, freed once.
 */
void prospect_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
