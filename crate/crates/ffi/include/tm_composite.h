#ifndef TM_COMPOSITE_H
#define TM_COMPOSITE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TmcStatus {
  TMC_STATUS_OK = 0,
  TMC_STATUS_NULL_POINTER = 1,
  TMC_STATUS_INVALID_ARGUMENT = 2,
  TMC_STATUS_IO = 3,
  TMC_STATUS_FORMAT = 4,
  TMC_STATUS_INTEGRITY = 5,
  TMC_STATUS_VERSION = 6,
  TMC_STATUS_CONSISTENCY = 7,
  TMC_STATUS_COMPOSITION = 8,
  TMC_STATUS_PANIC = 9,
} TmcStatus;

// A composite under construction or ready to predict.
typedef struct TmcComposite TmcComposite;

// A loaded model.
typedef struct TmcModel TmcModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// The pointer stays valid until the next `tmc_*` call on the same thread.
const char *tmc_last_error(void);

// Loads a `.tmmodel` file. On success `*out` owns a new handle.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum TmcStatus tmc_model_load(const char *path, struct TmcModel **out);

// Releases a model handle. Null is ignored.
//
// # Safety
// `model` must come from `tmc_model_load` and not be freed twice.
void tmc_model_free(struct TmcModel *model);

// # Safety
// `model` must be a live handle; the out pointers must be writable.
enum TmcStatus tmc_model_num_classes(const struct TmcModel *model, size_t *out);

// Input image shape expected by the model.
//
// # Safety
// `model` must be a live handle; the out pointers must be writable.
enum TmcStatus tmc_model_input_shape(const struct TmcModel *model,
                                     size_t *height,
                                     size_t *width,
                                     size_t *channels);

// Writes the class sums of one image into `sums[0..sums_len]`;
// `sums_len` must equal the class count.
//
// # Safety
// `pixels` must hold `pixels_len` bytes and `sums` `sums_len` integers.
enum TmcStatus tmc_model_class_sums(const struct TmcModel *model,
                                    const uint8_t *pixels,
                                    size_t pixels_len,
                                    int32_t *sums,
                                    size_t sums_len);

// Predicted label and its class sum for one image.
//
// # Safety
// `pixels` must hold `pixels_len` bytes; `label` and `confidence` must be
// writable.
enum TmcStatus tmc_model_classify(const struct TmcModel *model,
                                  const uint8_t *pixels,
                                  size_t pixels_len,
                                  size_t *label,
                                  int32_t *confidence);

// Creates an empty composite using batch normalization.
//
// # Safety
// `out` must be writable.
enum TmcStatus tmc_composite_new(struct TmcComposite **out);

// Releases a composite handle. Null is ignored.
//
// # Safety
// `composite` must come from `tmc_composite_new` and not be freed twice.
void tmc_composite_free(struct TmcComposite *composite);

// Adds a member. The composite keeps its own reference, so the model handle
// may be freed afterwards. Clears any frozen alphas.
//
// # Safety
// Both handles must be live.
enum TmcStatus tmc_composite_add(struct TmcComposite *composite, const struct TmcModel *model);

// Freezes the per-member alphas (one per member, each > 0). Passing null
// returns to batch normalization.
//
// # Safety
// `alphas` must hold `len` doubles unless null.
enum TmcStatus tmc_composite_set_alphas(struct TmcComposite *composite,
                                        const double *alphas,
                                        size_t len);

// Classifies `count` images. With batch normalization the alphas come from
// this batch. `scores` may be null; otherwise it receives `count * classes`
// fused scores, row-major.
//
// # Safety
// `pixels` must hold `pixels_len` bytes, `labels` `count` entries and
// `scores` (if non-null) `count * classes` doubles.
enum TmcStatus tmc_composite_predict(const struct TmcComposite *composite,
                                     const uint8_t *pixels,
                                     size_t pixels_len,
                                     size_t count,
                                     size_t *labels,
                                     double *scores);

// Fuses precomputed class sums laid out as `[member][input][class]` with
// batch normalization. `alphas` may be null; otherwise it receives one
// alpha per member.
//
// # Safety
// `sums` must hold `members * inputs * classes` integers, `labels` `inputs`
// entries and `alphas` (if non-null) `members` doubles.
enum TmcStatus tmc_fuse_class_sums(const int32_t *sums,
                                   size_t members,
                                   size_t inputs,
                                   size_t classes,
                                   size_t *labels,
                                   double *alphas);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TM_COMPOSITE_H */
