#ifndef AUTOWNET_H
#define AUTOWNET_H

/* Generated with cbindgen:0.29.4 */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result codes.
 */
typedef enum AwStatus {
  AW_STATUS_OK = 0,
  AW_STATUS_NULL_POINTER = 1,
  AW_STATUS_INVALID_UTF8 = 2,
  AW_STATUS_IO = 3,
  AW_STATUS_PARSE = 4,
  AW_STATUS_VALIDATION = 5,
  AW_STATUS_OUT_OF_RANGE = 6,
  AW_STATUS_BUFFER_TOO_SMALL = 7,
  AW_STATUS_INTERNAL = 8,
} AwStatus;

/**
 * Loaded, unit-normalized word vectors.
 */
typedef struct AwEmbeddings AwEmbeddings;

/**
 * A fitted sparse-coding sense model with the vocabulary it was fitted on.
 */
typedef struct AwWsiModel AwWsiModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next autownet call on the same thread.
 */
const char *aw_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *aw_version(void);

/**
 * Loads a word-vector text file. `expect_dim` of 0 infers the dimension.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum AwStatus aw_embeddings_load(const char *path, size_t expect_dim, struct AwEmbeddings **out);

/**
 * # Safety
 * `emb` must be NULL or a handle from `aw_embeddings_load` not yet freed.
 */
void aw_embeddings_free(struct AwEmbeddings *emb);

/**
 * Vocabulary size; 0 for NULL.
 *
 * # Safety
 * `emb` must be NULL or a live handle.
 */
size_t aw_embeddings_len(const struct AwEmbeddings *emb);

/**
 * Vector dimension; 0 for NULL.
 *
 * # Safety
 * `emb` must be NULL or a live handle.
 */
size_t aw_embeddings_dim(const struct AwEmbeddings *emb);

/**
 * Id of a token; `AW_STATUS_OUT_OF_RANGE` when it is not in the vocabulary.
 *
 * # Safety
 * `emb` must be a live handle, `token` NUL-terminated, `out_id` writable.
 */
enum AwStatus aw_embeddings_lookup(const struct AwEmbeddings *emb,
                                   const char *token,
                                   size_t *out_id);

/**
 * Copies the unit vector of word `id` into `out` (`dim` elements).
 *
 * # Safety
 * `emb` must be a live handle and `out` must hold `capacity` doubles.
 */
enum AwStatus aw_embeddings_vector(const struct AwEmbeddings *emb,
                                   size_t id,
                                   double *out,
                                   size_t capacity,
                                   size_t *out_len);

/**
 * Cosine similarity of two words.
 *
 * # Safety
 * `emb` must be a live handle and `out` writable.
 */
enum AwStatus aw_embeddings_cosine(const struct AwEmbeddings *emb, size_t a, size_t b, double *out);

/**
 * Fits a sense model with K-SVD. `reinit_threshold` of 0 means 1.
 *
 * # Safety
 * `emb` must be a live handle and `out` writable.
 */
enum AwStatus aw_wsi_fit(const struct AwEmbeddings *emb,
                         size_t k,
                         size_t s,
                         size_t iterations,
                         uint64_t seed,
                         size_t reinit_threshold,
                         struct AwWsiModel **out);

/**
 * Loads a model file (JSON or binary, detected from the content).
 *
 * # Safety
 * `path` must be NUL-terminated and `out` writable.
 */
enum AwStatus aw_wsi_load(const char *path, struct AwWsiModel **out);

/**
 * Saves a model; binary when the path ends in `.bin`, JSON otherwise.
 *
 * # Safety
 * `model` must be a live handle and `path` NUL-terminated.
 */
enum AwStatus aw_wsi_save(const struct AwWsiModel *model, const char *path);

/**
 * # Safety
 * `model` must be NULL or a live handle.
 */
void aw_wsi_free(struct AwWsiModel *model);

/**
 * Number of atoms; 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t aw_wsi_num_atoms(const struct AwWsiModel *model);

/**
 * Atoms with a positive coefficient for word `id`, by descending coefficient.
 *
 * # Safety
 * `model` must be a live handle; `out` must hold `capacity` elements.
 */
enum AwStatus aw_wsi_word_atoms(const struct AwWsiModel *model,
                                size_t id,
                                size_t *out,
                                size_t capacity,
                                size_t *out_len);

/**
 * Orthogonal matching pursuit of `v` (`dim` doubles) over `k` row-major
 * unit atoms with at most `s` terms. Atom indices and coefficients are
 * written to parallel buffers of `capacity` elements.
 *
 * # Safety
 * `v` must hold `dim` doubles, `atoms` `k * dim` doubles, and the output
 * buffers `capacity` elements each.
 */
enum AwStatus aw_omp_encode(const double *v,
                            size_t dim,
                            const double *atoms,
                            size_t k,
                            size_t s,
                            size_t *out_atoms,
                            double *out_coefs,
                            size_t capacity,
                            size_t *out_len,
                            double *out_residual);

/**
 * Sense purification of word `word` on atom `atom` over a search space of
 * word ids. Cluster ids (seed word first) go to `out_words`.
 *
 * # Safety
 * Handles must be live and fitted on the same vocabulary; `search` must
 * hold `search_len` ids and `out_words` `capacity` elements.
 */
enum AwStatus aw_purify(const struct AwEmbeddings *emb,
                        const struct AwWsiModel *model,
                        size_t word,
                        size_t atom,
                        const size_t *search,
                        size_t search_len,
                        size_t n,
                        double min_cos,
                        size_t *out_words,
                        size_t capacity,
                        size_t *out_len,
                        double *out_gamma);

/**
 * `1.25 p r / (0.25 p + r)`; 0 when both are 0.
 */
double aw_f05(double precision, double recall);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AUTOWNET_H */
