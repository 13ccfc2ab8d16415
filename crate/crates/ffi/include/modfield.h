#ifndef MODFIELD_H
#define MODFIELD_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. Values 2 to 4 match the command-line exit codes.
typedef enum MfStatus {
  MF_STATUS_OK = 0,
  // A required pointer argument was null.
  MF_STATUS_NULL_POINTER = 1,
  // File missing, unreadable or malformed.
  MF_STATUS_IO = 2,
  // Incompatible dimensions, lengths or settings.
  MF_STATUS_INVALID_ARGUMENT = 3,
  // A computation produced a non-finite value.
  MF_STATUS_NUMERIC = 4,
  // Internal error; the library caught a panic.
  MF_STATUS_INTERNAL = 5,
} MfStatus;

// Per-tile latent codes loaded from a codebook file.
typedef struct MfCodebook MfCodebook;

// A trained network loaded from a checkpoint file.
typedef struct MfModel MfModel;

typedef struct MfModelDims {
  // Coordinate dimension.
  size_t input_dim;
  // Output channels.
  size_t output_dim;
  size_t latent_dim;
  size_t hidden_layers;
  size_t width;
} MfModelDims;

typedef struct MfCodebookDims {
  size_t dim;
  size_t latent_dim;
  size_t tile_count;
} MfCodebookDims;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null if none. The
// string stays valid until the next failing call on the same thread.
const char *mf_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *mf_version(void);

// Loads a checkpoint file into `*out`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum MfStatus mf_model_load(const char *path, struct MfModel **out);

// Releases a model. Null is ignored.
//
// # Safety
// `model` must come from [`mf_model_load`] and not be used afterwards.
void mf_model_free(struct MfModel *model);

// # Safety
// `model` must be a live handle and `out` writable.
enum MfStatus mf_model_dims(const struct MfModel *model, struct MfModelDims *out);

// Evaluates the network at local coordinate `x` (`x_len == input_dim`,
// entries in `[0, 1]`) with latent `z` (`z_len == latent_dim`), writing
// `output_dim` values to `out`.
//
// # Safety
// Each pointer must reference at least its stated number of elements.
enum MfStatus mf_model_forward(const struct MfModel *model,
                               const float *x,
                               size_t x_len,
                               const float *z,
                               size_t z_len,
                               float *out,
                               size_t out_len);

// Loads a codebook file into `*out`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum MfStatus mf_codebook_load(const char *path, struct MfCodebook **out);

// Releases a codebook. Null is ignored.
//
// # Safety
// `codebook` must come from [`mf_codebook_load`] and not be used afterwards.
void mf_codebook_free(struct MfCodebook *codebook);

// # Safety
// `codebook` must be a live handle and `out` writable.
enum MfStatus mf_codebook_dims(const struct MfCodebook *codebook, struct MfCodebookDims *out);

// Blended decode at global point `p` (`p_len == input_dim`, inside the
// codebook's extent), writing `output_dim` values to `out`.
//
// # Safety
// Handles must be live; each pointer must reference at least its stated
// number of elements.
enum MfStatus mf_decode_point(const struct MfModel *model,
                              const struct MfCodebook *codebook,
                              const double *p,
                              size_t p_len,
                              double *out,
                              size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MODFIELD_H */
