#ifndef WEBZSL_H
#define WEBZSL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WebzslStatus {
  WEBZSL_STATUS_OK = 0,
  WEBZSL_STATUS_NULL_POINTER = 1,
  WEBZSL_STATUS_IO = 2,
  WEBZSL_STATUS_PARSE = 3,
  WEBZSL_STATUS_INVALID_ARGUMENT = 4,
  WEBZSL_STATUS_SHAPE = 5,
  // A linear system could not be solved.
  WEBZSL_STATUS_NUMERIC = 6,
  WEBZSL_STATUS_NOT_FOUND = 7,
  WEBZSL_STATUS_PANIC = 8,
} WebzslStatus;

// Word vectors, optionally with subword tables.
typedef struct WebzslEmbeddings WebzslEmbeddings;

// A fitted zero-shot model.
typedef struct WebzslModel WebzslModel;

// Class prototypes with their ids.
typedef struct WebzslPrototypes WebzslPrototypes;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty if none. The
// pointer stays valid until the next failing call on the same thread.
const char *webzsl_last_error(void);

// Library version as a static string.
const char *webzsl_version(void);

// Loads word2vec text or a binary model file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum WebzslStatus webzsl_embeddings_load(const char *path, struct WebzslEmbeddings **out);

// # Safety
// `handle` must come from [`webzsl_embeddings_load`] or be null.
void webzsl_embeddings_free(struct WebzslEmbeddings *handle);

// Vector dimension and vocabulary size.
//
// # Safety
// `handle` must be a live handle; `dim` and `words` writable.
enum WebzslStatus webzsl_embeddings_shape(const struct WebzslEmbeddings *handle,
                                          size_t *dim,
                                          size_t *words);

// Copies the vector of `word` into `out` (`len` must equal the dimension).
// Subword models compose vectors for unknown words; otherwise an unknown
// word gives `NotFound`.
//
// # Safety
// `out` must point to `len` writable floats.
enum WebzslStatus webzsl_embeddings_lookup(const struct WebzslEmbeddings *handle,
                                           const char *word,
                                           float *out,
                                           size_t len);

// Loads a prototype file (class id then vector on each row).
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum WebzslStatus webzsl_prototypes_load(const char *path, struct WebzslPrototypes **out);

// Builds prototypes from a class-name file, l2-normalized when
// `normalize_rows` is nonzero.
//
// # Safety
// `class_names` must be a NUL-terminated string, `embeddings` a live
// handle and `out` a writable pointer.
enum WebzslStatus webzsl_prototypes_build(const char *class_names,
                                          const struct WebzslEmbeddings *embeddings,
                                          int32_t normalize_rows,
                                          struct WebzslPrototypes **out);

// # Safety
// `handle` must be a live handle or null.
void webzsl_prototypes_free(struct WebzslPrototypes *handle);

// Number of classes and prototype dimension.
//
// # Safety
// `handle` must be a live handle; `classes` and `dim` writable.
enum WebzslStatus webzsl_prototypes_shape(const struct WebzslPrototypes *handle,
                                          size_t *classes,
                                          size_t *dim);

// Id of class `index`, owned by the handle; null when out of range.
//
// # Safety
// `handle` must be a live handle or null.
const char *webzsl_prototypes_class_id(const struct WebzslPrototypes *handle, size_t index);

// # Safety
// `handle` must be a live handle and `path` a NUL-terminated string.
enum WebzslStatus webzsl_prototypes_save(const struct WebzslPrototypes *handle, const char *path);

// Loads a model written by `webzsl zsl-fit`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum WebzslStatus webzsl_model_load(const char *path, struct WebzslModel **out);

// # Safety
// `handle` must be a live handle or null.
void webzsl_model_free(struct WebzslModel *handle);

// Visual and semantic dimensions the model expects.
//
// # Safety
// `handle` must be a live handle; `visual_dim` and `semantic_dim` writable.
enum WebzslStatus webzsl_model_dims(const struct WebzslModel *handle,
                                    size_t *visual_dim,
                                    size_t *semantic_dim);

// Ranks every prototype class for one feature vector. The best
// `min(capacity, classes)` class indices and scores are written to
// `indices` and `scores` (which may be null) and their number to
// `written`.
//
// # Safety
// `features` must point to `feature_len` doubles; `indices` and `scores`
// to `capacity` writable elements unless null.
enum WebzslStatus webzsl_model_rank(const struct WebzslModel *model,
                                    const struct WebzslPrototypes *prototypes,
                                    const double *features,
                                    size_t feature_len,
                                    size_t *indices,
                                    double *scores,
                                    size_t capacity,
                                    size_t *written);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WEBZSL_H */
