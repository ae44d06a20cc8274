#ifndef LITKG_H
#define LITKG_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every fallible call.
 */
typedef enum LitkgStatus {
  LITKG_STATUS_OK = 0,
  LITKG_STATUS_NULL_POINTER = 1,
  LITKG_STATUS_INVALID_UTF8 = 2,
  LITKG_STATUS_INVALID_PARAMETER = 3,
  LITKG_STATUS_IO = 4,
  LITKG_STATUS_PARSE = 5,
  LITKG_STATUS_NETWORK = 6,
  LITKG_STATUS_EMPTY_INPUT = 7,
  LITKG_STATUS_UNKNOWN_CONCEPT = 8,
  LITKG_STATUS_NON_FINITE = 9,
  LITKG_STATUS_CONFLICT = 10,
  LITKG_STATUS_PANIC = 11,
} LitkgStatus;

typedef enum LitkgExportFormat {
  LITKG_EXPORT_FORMAT_GRAPH_JSON = 0,
  LITKG_EXPORT_FORMAT_GRAPH_ML = 1,
  LITKG_EXPORT_FORMAT_CYPHER = 2,
  LITKG_EXPORT_FORMAT_EDGES_CSV = 3,
} LitkgExportFormat;

typedef enum LitkgMetric {
  LITKG_METRIC_EUCLIDEAN = 0,
  LITKG_METRIC_COSINE = 1,
} LitkgMetric;

typedef struct LitkgCorpus LitkgCorpus;

typedef struct LitkgEmbedding LitkgEmbedding;

typedef struct LitkgGraph LitkgGraph;

typedef struct LitkgLayout LitkgLayout;

typedef struct LitkgNeighbors LitkgNeighbors;

/*
 Walk and skip-gram settings for [`litkg_embed`]. Start from
 [`litkg_embed_params_default`].
 */
typedef struct LitkgEmbedParams {
  size_t dims;
  size_t walk_length;
  size_t walks_per_node;
  double return_param;
  double inout_param;
  size_t window;
  size_t negatives;
  size_t epochs;
  double learning_rate;
  double unigram_power;
  uint64_t seed;
  size_t threads;
} LitkgEmbedParams;

typedef struct LitkgTsneParams {
  double perplexity;
  size_t max_iter;
  double learning_rate;
  uint64_t seed;
} LitkgTsneParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the most recent failed call on this thread, or null after a
 successful one. Valid until the next `litkg_*` call on the same thread.
 */
const char *litkg_last_error(void);

/*
 # Safety
 `s` must be null or a string returned by this library.
 */
void litkg_string_free(char *s);

/*
 Parses PubTator text. Damaged blocks are skipped, not reported as errors.

 # Safety
 `text` must be a NUL-terminated string; `out` must be writable.
 */
enum LitkgStatus litkg_corpus_parse_pubtator(const char *text, struct LitkgCorpus **out);

/*
 # Safety
 `text` must be a NUL-terminated string; `out` must be writable.
 */
enum LitkgStatus litkg_corpus_from_jsonl(const char *text, struct LitkgCorpus **out);

/*
 # Safety
 `corpus` must be a live handle; `out` must be writable.
 */
enum LitkgStatus litkg_corpus_to_jsonl(const struct LitkgCorpus *corpus, char **out);

/*
 # Safety
 `corpus` must be a live handle; `out` must be writable.
 */
enum LitkgStatus litkg_corpus_to_pubtator(const struct LitkgCorpus *corpus, char **out);

/*
 Number of abstracts, or 0 for a null handle.

 # Safety
 `corpus` must be null or a live handle.
 */
size_t litkg_corpus_len(const struct LitkgCorpus *corpus);

/*
 # Safety
 `corpus` must be null or a handle not yet freed.
 */
void litkg_corpus_free(struct LitkgCorpus *corpus);

/*
 # Safety
 `corpus` must be a live handle; `out` must be writable.
 */
enum LitkgStatus litkg_graph_build(const struct LitkgCorpus *corpus, struct LitkgGraph **out);

/*
 # Safety
 `text` must be a NUL-terminated string; `out` must be writable.
 */
enum LitkgStatus litkg_graph_from_json(const char *text, struct LitkgGraph **out);

/*
 Merges two graphs built from disjoint abstracts.

 # Safety
 `a` and `b` must be live handles; `out` must be writable.
 */
enum LitkgStatus litkg_graph_merge(const struct LitkgGraph *a,
                                   const struct LitkgGraph *b,
                                   struct LitkgGraph **out);

/*
 # Safety
 `graph` must be null or a live handle.
 */
size_t litkg_graph_node_count(const struct LitkgGraph *graph);

/*
 # Safety
 `graph` must be null or a live handle.
 */
size_t litkg_graph_edge_count(const struct LitkgGraph *graph);

/*
 Serializes the graph. `batch_size` applies to Cypher only.

 # Safety
 `graph` must be a live handle; `out` must be writable.
 */
enum LitkgStatus litkg_graph_export(const struct LitkgGraph *graph,
                                    enum LitkgExportFormat format,
                                    size_t batch_size,
                                    char **out);

/*
 # Safety
 `graph` must be null or a handle not yet freed.
 */
void litkg_graph_free(struct LitkgGraph *graph);

struct LitkgEmbedParams litkg_embed_params_default(void);

/*
 Samples node2vec walks over `graph` and trains skip-gram vectors on them.

 # Safety
 `graph` and `params` must be valid; `out` must be writable.
 */
enum LitkgStatus litkg_embed(const struct LitkgGraph *graph,
                             const struct LitkgEmbedParams *params,
                             struct LitkgEmbedding **out);

/*
 # Safety
 `text` must be a NUL-terminated string; `out` must be writable.
 */
enum LitkgStatus litkg_embedding_from_tsv(const char *text, struct LitkgEmbedding **out);

/*
 # Safety
 `emb` must be a live handle; `out` must be writable.
 */
enum LitkgStatus litkg_embedding_to_tsv(const struct LitkgEmbedding *emb, char **out);

/*
 # Safety
 `emb` must be null or a live handle.
 */
size_t litkg_embedding_len(const struct LitkgEmbedding *emb);

/*
 # Safety
 `emb` must be null or a live handle.
 */
size_t litkg_embedding_dims(const struct LitkgEmbedding *emb);

/*
 Concept id of `row`, borrowed from the handle; null when out of range.

 # Safety
 `emb` must be null or a live handle.
 */
const char *litkg_embedding_id(const struct LitkgEmbedding *emb, size_t row);

/*
 Copies the vector of `row` into `buf`, which must hold `len >= dims` values.

 # Safety
 `emb` must be a live handle; `buf` must point to `len` writable doubles.
 */
enum LitkgStatus litkg_embedding_copy_row(const struct LitkgEmbedding *emb,
                                          size_t row,
                                          double *buf,
                                          size_t len);

/*
 # Safety
 `emb` must be null or a handle not yet freed.
 */
void litkg_embedding_free(struct LitkgEmbedding *emb);

struct LitkgTsneParams litkg_tsne_params_default(void);

/*
 Exact t-SNE of the embedding rows into the plane.

 # Safety
 `emb` and `params` must be valid; `out` must be writable.
 */
enum LitkgStatus litkg_tsne(const struct LitkgEmbedding *emb,
                            const struct LitkgTsneParams *params,
                            struct LitkgLayout **out);

/*
 # Safety
 `layout` must be null or a live handle.
 */
size_t litkg_layout_len(const struct LitkgLayout *layout);

/*
 # Safety
 `layout` must be null or a live handle.
 */
const char *litkg_layout_id(const struct LitkgLayout *layout, size_t i);

/*
 # Safety
 `layout` must be a live handle; `x` and `y` must be writable.
 */
enum LitkgStatus litkg_layout_point(const struct LitkgLayout *layout,
                                    size_t i,
                                    double *x,
                                    double *y);

/*
 KL divergence of the final layout; NaN for a null handle.

 # Safety
 `layout` must be null or a live handle.
 */
double litkg_layout_final_kl(const struct LitkgLayout *layout);

/*
 # Safety
 `layout` must be null or a handle not yet freed.
 */
void litkg_layout_free(struct LitkgLayout *layout);

/*
 The `k` concepts closest to `query`. `graph` may be null; when given,
 `query` may also be a display name and results carry names.

 # Safety
 `emb` must be a live handle, `graph` null or live, `query` a
 NUL-terminated string, and `out` writable.
 */
enum LitkgStatus litkg_nearest(const struct LitkgEmbedding *emb,
                               const struct LitkgGraph *graph,
                               const char *query,
                               size_t k,
                               enum LitkgMetric metric,
                               struct LitkgNeighbors **out);

/*
 # Safety
 `nn` must be null or a live handle.
 */
size_t litkg_neighbors_len(const struct LitkgNeighbors *nn);

/*
 # Safety
 `nn` must be null or a live handle.
 */
const char *litkg_neighbors_id(const struct LitkgNeighbors *nn, size_t i);

/*
 # Safety
 `nn` must be null or a live handle.
 */
const char *litkg_neighbors_name(const struct LitkgNeighbors *nn, size_t i);

/*
 Distance of neighbour `i`; NaN when out of range.

 # Safety
 `nn` must be null or a live handle.
 */
double litkg_neighbors_distance(const struct LitkgNeighbors *nn, size_t i);

/*
 # Safety
 `nn` must be null or a handle not yet freed.
 */
void litkg_neighbors_free(struct LitkgNeighbors *nn);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LITKG_H */
