#ifndef HSI_HQS_H
#define HSI_HQS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Denoiser used for the Z-update.
 */
typedef enum HsiDenoiser {
  HSI_DENOISER_GAUSSIAN = 0,
  HSI_DENOISER_PROX_QUADRATIC = 1,
  HSI_DENOISER_ULNSA = 2,
  HSI_DENOISER_IDENTITY = 3,
} HsiDenoiser;

/**
 * Result code of every fallible call.
 */
typedef enum HsiStatus {
  HSI_STATUS_OK = 0,
  HSI_STATUS_NULL_POINTER = 1,
  HSI_STATUS_INVALID_ARGUMENT = 2,
  HSI_STATUS_SHAPE_MISMATCH = 3,
  HSI_STATUS_DEGENERATE = 4,
  HSI_STATUS_MALFORMED_FILE = 5,
  HSI_STATUS_IO = 6,
  HSI_STATUS_NON_FINITE = 7,
  HSI_STATUS_DIVERGENCE = 8,
  HSI_STATUS_CONFIG = 9,
  HSI_STATUS_MISSING_WEIGHT = 10,
  HSI_STATUS_ASSERTION = 11,
  HSI_STATUS_PANIC = 12,
} HsiStatus;

/**
 * Opaque hyperspectral cube.
 */
typedef struct HsiCube HsiCube;

/**
 * Opaque weight store.
 */
typedef struct HsiWeights HsiWeights;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` as a
 * NUL-terminated string, truncating if needed. Returns the full message
 * length excluding the terminator, so a caller can size a retry.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t hsi_last_error_message(char *buf, size_t len);

/**
 * Creates a cube from `height * width * bands` band-sequential values, or
 * a zero cube when `data` is null.
 *
 * # Safety
 * `data` must be null or point to `height * width * bands` floats; `out`
 * must be a valid pointer.
 */
enum HsiStatus hsi_cube_new(size_t height,
                            size_t width,
                            size_t bands,
                            const float *data,
                            struct HsiCube **out);

/**
 * Reads a cube file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HsiStatus hsi_cube_read(const char *path, struct HsiCube **out);

/**
 * Writes a cube file.
 *
 * # Safety
 * `cube` must be a live handle and `path` a NUL-terminated string.
 */
enum HsiStatus hsi_cube_write(const struct HsiCube *cube, const char *path);

/**
 * Releases a cube. Null is ignored.
 *
 * # Safety
 * `cube` must be null or a handle not yet freed.
 */
void hsi_cube_free(struct HsiCube *cube);

/**
 * Reports the cube dimensions.
 *
 * # Safety
 * All pointers must be valid.
 */
enum HsiStatus hsi_cube_dims(const struct HsiCube *cube,
                             size_t *height,
                             size_t *width,
                             size_t *bands);

/**
 * Copies the band-sequential values into `buf`, which must hold exactly
 * `height * width * bands` floats.
 *
 * # Safety
 * `cube` must be a live handle and `buf` must point to `len` writable floats.
 */
enum HsiStatus hsi_cube_copy_data(const struct HsiCube *cube, float *buf, size_t len);

/**
 * Mean per-band PSNR in dB; infinite for identical cubes.
 *
 * # Safety
 * Handles must be live and `out` valid.
 */
enum HsiStatus hsi_psnr(const struct HsiCube *reference,
                        const struct HsiCube *test,
                        double peak,
                        double *out);

/**
 * Mean per-band SSIM.
 *
 * # Safety
 * Handles must be live and `out` valid.
 */
enum HsiStatus hsi_ssim(const struct HsiCube *reference,
                        const struct HsiCube *test,
                        double peak,
                        double *out);

/**
 * ERGAS with the given resolution ratio.
 *
 * # Safety
 * Handles must be live and `out` valid.
 */
enum HsiStatus hsi_ergas(const struct HsiCube *reference,
                         const struct HsiCube *test,
                         double scale_ratio,
                         double *out);

/**
 * Applies one of the four predefined noise cases (1..=4).
 *
 * # Safety
 * `clean` must be a live handle and `out` valid.
 */
enum HsiStatus hsi_synthesize_case(const struct HsiCube *clean,
                                   uint8_t case_id,
                                   uint64_t seed,
                                   struct HsiCube **out);

/**
 * Reads a weight file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid.
 */
enum HsiStatus hsi_weights_read(const char *path, struct HsiWeights **out);

/**
 * Releases a weight store. Null is ignored.
 *
 * # Safety
 * `weights` must be null or a handle not yet freed.
 */
void hsi_weights_free(struct HsiWeights *weights);

/**
 * Runs `iters` solver iterations on `observation`.
 *
 * Parameters come from the four arrays of length `iters` when all are
 * non-null, or from the estimator when all are null. `weights` may be null;
 * missing estimator or network tensors are then generated from `seed`.
 * `denoiser` is an [`HsiDenoiser`] code. `final_energy` may be null.
 *
 * # Safety
 * Handles must be live, each non-null array must hold `iters` values and
 * `out` must be valid.
 */
enum HsiStatus hsi_denoise(const struct HsiCube *observation,
                           size_t iters,
                           const double *alpha,
                           const double *beta,
                           const double *gamma,
                           const double *lambda,
                           int32_t denoiser,
                           const struct HsiWeights *weights,
                           uint64_t seed,
                           struct HsiCube **out,
                           double *final_energy);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HSI_HQS_H */
