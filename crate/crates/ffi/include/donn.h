#ifndef DONN_H
#define DONN_H

#include <stddef.h>
#include <stdint.h>

typedef enum DonnStatus {
  DONN_STATUS_OK = 0,
  DONN_STATUS_NULL_POINTER = 1,
  DONN_STATUS_INVALID_ARGUMENT = 2,
  DONN_STATUS_IO = 3,
  DONN_STATUS_MALFORMED = 4,
  DONN_STATUS_BUFFER_TOO_SMALL = 5,
  DONN_STATUS_PANIC = 6,
} DonnStatus;

// Opaque model handle.
typedef struct DonnModelHandle DonnModelHandle;

// Copies the calling thread's last error into `buf` (NUL-terminated, truncated
// to `len`). Returns the full message length in bytes, excluding the NUL.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t donn_last_error_message(char *buf, size_t len);

// Loads a model file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum DonnStatus donn_model_load(const char *path, struct DonnModelHandle **out);

// # Safety
// `model` must be a live handle and `path` a NUL-terminated string.
enum DonnStatus donn_model_save(const struct DonnModelHandle *model, const char *path);

// Random phase masks with evenly spaced planes and default detector regions.
// Lengths are in metres.
//
// # Safety
// `out` must be a writable pointer.
enum DonnStatus donn_model_new_random(double wavelength,
                                      double pitch,
                                      size_t grid_n,
                                      size_t active_n,
                                      size_t class_count,
                                      size_t layer_count,
                                      double distance,
                                      uint64_t seed,
                                      struct DonnModelHandle **out);

// # Safety
// `model` must be null or a handle not yet freed.
void donn_model_free(struct DonnModelHandle *model);

// # Safety
// `model` must be a live handle and `out` writable.
enum DonnStatus donn_model_class_count(const struct DonnModelHandle *model, size_t *out);

// Side length of the input bit image the model expects.
//
// # Safety
// `model` must be a live handle and `out` writable.
enum DonnStatus donn_model_input_side(const struct DonnModelHandle *model, size_t *out);

// Runs one input (`side * side` bytes, each 0 or 1) through the model.
// Writes `class_count` detector sums to `region_sums` and the winning class
// to `predicted`.
//
// # Safety
// `bits` must point to `bits_len` bytes and `region_sums` to `sums_len`
// writable doubles; `predicted` must be writable.
enum DonnStatus donn_model_forward(const struct DonnModelHandle *model,
                                   const uint8_t *bits,
                                   size_t bits_len,
                                   double *region_sums,
                                   size_t sums_len,
                                   size_t *predicted);

// New handle with phases rounded to `levels` evenly spaced values.
//
// # Safety
// `model` must be a live handle and `out` writable.
enum DonnStatus donn_model_quantize(const struct DonnModelHandle *model,
                                    size_t levels,
                                    struct DonnModelHandle **out);

// Cart-pole state as a `side * side` bit image.
//
// # Safety
// `out_bits` must point to `len` writable bytes.
enum DonnStatus donn_cartpole_state_to_image(double x,
                                             double theta,
                                             double x_dot,
                                             double theta_dot,
                                             size_t side,
                                             uint8_t *out_bits,
                                             size_t len);

#endif  /* DONN_H */
