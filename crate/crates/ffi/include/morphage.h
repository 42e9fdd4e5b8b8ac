#ifndef MORPHAGE_H
#define MORPHAGE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MorphageStatus {
  MORPHAGE_STATUS_OK = 0,
  MORPHAGE_STATUS_NULL_POINTER = 1,
  MORPHAGE_STATUS_INVALID_ARGUMENT = 2,
  MORPHAGE_STATUS_PARSE = 3,
  MORPHAGE_STATUS_INTEGRITY = 4,
  MORPHAGE_STATUS_CONTRACT = 5,
  MORPHAGE_STATUS_GEOMETRY = 6,
  MORPHAGE_STATUS_CONFIG = 7,
  MORPHAGE_STATUS_SIZING = 8,
  MORPHAGE_STATUS_RANK = 9,
  MORPHAGE_STATUS_TRAINING = 10,
  MORPHAGE_STATUS_PROTOCOL = 11,
  MORPHAGE_STATUS_IMAGE = 12,
  MORPHAGE_STATUS_IO = 13,
  MORPHAGE_STATUS_PANIC = 14,
} MorphageStatus;

// Opaque raster image (row-major, interleaved 8-bit channels).
typedef struct MorphageImage MorphageImage;

// Opaque trained morphing attack detector.
typedef struct MorphageMadModel MorphageMadModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next call into the library from the same thread.
const char *morphage_last_error_message(void);

// Copies `len` samples (`width * height * channels`) into a new image.
//
// # Safety
// `samples` must point to `len` readable bytes; `out` must be writable.
enum MorphageStatus morphage_image_new(size_t width,
                                       size_t height,
                                       size_t channels,
                                       const uint8_t *samples,
                                       size_t len,
                                       struct MorphageImage **out_image);

// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum MorphageStatus morphage_image_load(const char *path, struct MorphageImage **out_image);

// # Safety
// `image` must be a live handle; `path` a NUL-terminated string.
enum MorphageStatus morphage_image_save(const struct MorphageImage *image, const char *path);

// # Safety
// `image` must be null or a handle not yet freed.
void morphage_image_free(struct MorphageImage *image);

// Writes width, height and channel count; any out-pointer may be null.
//
// # Safety
// `image` must be a live handle.
enum MorphageStatus morphage_image_shape(const struct MorphageImage *image,
                                         size_t *width,
                                         size_t *height,
                                         size_t *channels);

// Borrowed view of the samples, valid while the handle lives.
//
// # Safety
// `image` must be a live handle; `data` and `len` must be writable.
enum MorphageStatus morphage_image_data(const struct MorphageImage *image,
                                        const uint8_t **data,
                                        size_t *len);

// Morphs two equally shaped images. Landmarks are `n_points` interleaved
// `x, y` pairs; `alpha` is the weight of image b.
//
// # Safety
// Handles must be live; each landmark array must hold `2 * n_points` values.
enum MorphageStatus morphage_morph_pair(const struct MorphageImage *image_a,
                                        const double *landmarks_a,
                                        const struct MorphageImage *image_b,
                                        const double *landmarks_b,
                                        size_t n_points,
                                        double alpha,
                                        struct MorphageImage **out_image);

// FMMPMR in percent over a dense `[morph][attempt][subject]` score array.
//
// # Safety
// `scores` must hold `n_morphs * n_attempts * k` values; `out` writable.
enum MorphageStatus morphage_fmmpmr(const double *scores,
                                    size_t n_morphs,
                                    size_t n_attempts,
                                    size_t k,
                                    double tau,
                                    double *out_percent);

// MMPMR in percent over the same layout as [`morphage_fmmpmr`].
//
// # Safety
// As for [`morphage_fmmpmr`].
enum MorphageStatus morphage_mmpmr(const double *scores,
                                   size_t n_morphs,
                                   size_t n_attempts,
                                   size_t k,
                                   double tau,
                                   double *out_percent);

// Verification threshold at `far_target` (a fraction) from impostor scores.
//
// # Safety
// `scores` must hold `n` values; `out_tau` writable.
enum MorphageStatus morphage_calibrate_threshold(const double *scores,
                                                 size_t n,
                                                 double far_target,
                                                 double *out_tau);

// APCER and BPCER in percent at `threshold`; scores at or above it are
// classified as attacks.
//
// # Safety
// Arrays must hold the stated counts; out-pointers writable.
enum MorphageStatus morphage_error_rates(const double *bona_fide,
                                         size_t n_bona_fide,
                                         const double *attack,
                                         size_t n_attack,
                                         double threshold,
                                         double *out_apcer,
                                         double *out_bpcer);

// D-EER in percent.
//
// # Safety
// Arrays must hold the stated counts; `out_eer` writable.
enum MorphageStatus morphage_equal_error_rate(const double *bona_fide,
                                              size_t n_bona_fide,
                                              const double *attack,
                                              size_t n_attack,
                                              double *out_eer);

// BPCER in percent at an APCER target in percent. A NaN `dev_threshold`
// selects the threshold on these scores; otherwise it is used as given.
//
// # Safety
// Arrays must hold the stated counts; `out_bpcer` writable.
enum MorphageStatus morphage_bpcer_at_apcer(const double *bona_fide,
                                            size_t n_bona_fide,
                                            const double *attack,
                                            size_t n_attack,
                                            double apcer_target,
                                            double dev_threshold,
                                            double *out_bpcer);

// # Safety
// `path` must be a NUL-terminated string; `out_model` writable.
enum MorphageStatus morphage_mad_model_load(const char *path, struct MorphageMadModel **out_model);

// # Safety
// `model` must be null or a handle not yet freed.
void morphage_mad_model_free(struct MorphageMadModel *model);

// Attack score of one image; higher means more likely a morph.
//
// # Safety
// Handles must be live; `out_score` writable.
enum MorphageStatus morphage_mad_model_score_image(const struct MorphageMadModel *model,
                                                   const struct MorphageImage *image,
                                                   double *out_score);

// Development threshold stored for `apcer_target` (percent).
//
// # Safety
// `model` must be live; `out_threshold` writable.
enum MorphageStatus morphage_mad_model_threshold(const struct MorphageMadModel *model,
                                                 double apcer_target,
                                                 double *out_threshold);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MORPHAGE_H */
