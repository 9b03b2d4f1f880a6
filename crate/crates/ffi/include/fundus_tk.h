#ifndef FUNDUS_TK_H
#define FUNDUS_TK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FtkStatus {
  FTK_STATUS_OK = 0,
  FTK_STATUS_NULL_POINTER = 1,
  FTK_STATUS_INVALID_PARAMETER = 2,
  FTK_STATUS_INTEGRITY = 3,
  FTK_STATUS_CONFIG = 4,
  FTK_STATUS_UNDEFINED_METRIC = 5,
  FTK_STATUS_IO = 6,
  FTK_STATUS_FORMAT = 7,
  FTK_STATUS_BUFFER_TOO_SMALL = 8,
  FTK_STATUS_PANIC = 9,
} FtkStatus;

typedef enum FtkPolarity {
  /**
   * Black (0) pixels are foreground.
   */
  FTK_POLARITY_ZERO_FOREGROUND = 0,
  FTK_POLARITY_NONZERO_FOREGROUND = 1,
} FtkPolarity;

typedef enum FtkFoveaSource {
  FTK_FOVEA_SOURCE_PREDICTION = 0,
  FTK_FOVEA_SOURCE_DISC_FALLBACK = 1,
  FTK_FOVEA_SOURCE_CENTER_FALLBACK = 2,
} FtkFoveaSource;

/**
 * Per-resolution fovea offset statistics.
 */
typedef struct FtkFoveaStats FtkFoveaStats;

/**
 * Binary mask handle.
 */
typedef struct FtkMask FtkMask;

/**
 * Probability map handle.
 */
typedef struct FtkProbMap FtkProbMap;

typedef struct FtkPoint {
  double x;
  double y;
} FtkPoint;

typedef struct FtkScheduleConfig {
  double f_orig;
  double decay;
  uint32_t period;
  uint64_t seed;
  size_t batch;
} FtkScheduleConfig;

typedef struct FtkDraw {
  /**
   * 1 for the minority class, 0 for the majority class.
   */
  uint8_t minority;
  size_t index;
} FtkDraw;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or an empty string.
 * Valid until the next call into this library from the same thread.
 */
const char *ftk_last_error(void);

/**
 * Copies `width * height` row-major values in `[0, 1]` into a new map.
 */
enum FtkStatus ftk_probmap_new(size_t width,
                               size_t height,
                               const double *values,
                               struct FtkProbMap **map);

/**
 * Reads a single-channel PMAP file.
 */
enum FtkStatus ftk_probmap_read(const char *path, struct FtkProbMap **map);

enum FtkStatus ftk_probmap_write(const struct FtkProbMap *map, const char *path);

enum FtkStatus ftk_probmap_size(const struct FtkProbMap *map, size_t *width, size_t *height);

/**
 * Copies the values into `buf`, which must hold `width * height` doubles.
 */
enum FtkStatus ftk_probmap_copy_values(const struct FtkProbMap *map, double *buf, size_t len);

void ftk_probmap_free(struct FtkProbMap *map);

/**
 * Pixel-wise mean of `count` equally sized maps.
 */
enum FtkStatus ftk_ensemble_average(const struct FtkProbMap *const *maps,
                                    size_t count,
                                    struct FtkProbMap **result);

/**
 * Copies `width * height` row-major bytes (nonzero = foreground).
 */
enum FtkStatus ftk_mask_new(size_t width,
                            size_t height,
                            const uint8_t *bits,
                            struct FtkMask **mask);

enum FtkStatus ftk_mask_read(const char *path, enum FtkPolarity polarity_, struct FtkMask **mask);

enum FtkStatus ftk_mask_write(const struct FtkMask *mask,
                              const char *path,
                              enum FtkPolarity polarity_);

enum FtkStatus ftk_mask_size(const struct FtkMask *mask, size_t *width, size_t *height);

enum FtkStatus ftk_mask_count(const struct FtkMask *mask, size_t *count);

/**
 * Writes 1/0 per pixel into `buf`, which must hold `width * height` bytes.
 */
enum FtkStatus ftk_mask_copy_bits(const struct FtkMask *mask, uint8_t *buf, size_t len);

void ftk_mask_free(struct FtkMask *mask);

enum FtkStatus ftk_threshold(const struct FtkProbMap *map, double t, struct FtkMask **mask);

enum FtkStatus ftk_area_fraction(const struct FtkMask *mask, double *fraction);

/**
 * `found` is set to 0 for an empty mask, in which case `centroid` is untouched.
 */
enum FtkStatus ftk_centroid(const struct FtkMask *mask, struct FtkPoint *centroid, uint8_t *found);

/**
 * Illumination correction of an interleaved 8-bit image into `dst`
 * (same size as `src`). `sigma <= 0` selects `width / 30`.
 */
enum FtkStatus ftk_illumination_correct(const uint8_t *src,
                                        size_t width,
                                        size_t height,
                                        size_t channels,
                                        double sigma,
                                        double gain,
                                        uint8_t offset,
                                        uint8_t *dst);

enum FtkStatus ftk_fuse_disc_atrophy(const struct FtkProbMap *disc_p,
                                     const struct FtkProbMap *atrophy_p,
                                     double t,
                                     struct FtkMask **disc,
                                     struct FtkMask **atrophy);

enum FtkStatus ftk_detachment_fix(const struct FtkMask *mask,
                                  double fraction,
                                  struct FtkMask **fixed);

enum FtkStatus ftk_rasterize_fovea(struct FtkPoint center,
                                   double radius,
                                   size_t width,
                                   size_t height,
                                   struct FtkMask **mask);

/**
 * Centroid of the largest blob at threshold `t`; `found` is 0 when there is none.
 */
enum FtkStatus ftk_extract_fovea(const struct FtkProbMap *map,
                                 double t,
                                 struct FtkPoint *fovea,
                                 uint8_t *found);

/**
 * Parses statistics from TOML text with `[WxH]` sections.
 */
enum FtkStatus ftk_fovea_stats_parse(const char *toml, struct FtkFoveaStats **stats);

enum FtkStatus ftk_fovea_stats_read(const char *path, struct FtkFoveaStats **stats);

void ftk_fovea_stats_free(struct FtkFoveaStats *stats);

/**
 * Fovea from a segmentation map with disc-based sanity check and
 * fallbacks. `source` may be null.
 */
enum FtkStatus ftk_localize_fovea(const struct FtkProbMap *map,
                                  const struct FtkMask *disc,
                                  const struct FtkFoveaStats *stats,
                                  double t,
                                  struct FtkPoint *fovea,
                                  enum FtkFoveaSource *source);

enum FtkStatus ftk_auc(const double *scores, const uint8_t *labels, size_t len, double *auc);

/**
 * `defined` is 0 when the ground truth is empty; `dice` is untouched then.
 */
enum FtkStatus ftk_dice(const struct FtkMask *pred,
                        const struct FtkMask *gt,
                        double *dice,
                        uint8_t *defined);

enum FtkStatus ftk_detection_f1(const uint8_t *pred_present,
                                const uint8_t *gt_present,
                                size_t len,
                                double *f1);

double ftk_euclidean(struct FtkPoint p, struct FtkPoint q);

enum FtkStatus ftk_bce(const double *p, const uint8_t *y, size_t len, double *loss);

enum FtkStatus ftk_dice_loss(const double *p,
                             const uint8_t *y,
                             size_t len,
                             double smooth,
                             double *loss);

enum FtkStatus ftk_lovasz_binary(const double *scores, const uint8_t *y, size_t len, double *loss);

enum FtkStatus ftk_minority_fraction(uint64_t epoch,
                                     const struct FtkScheduleConfig *config,
                                     double *fraction);

/**
 * Draws for one epoch. `len` always receives the required length; when
 * `draws` is null or `capacity` is smaller, nothing else is written and
 * `FTK_STATUS_BUFFER_TOO_SMALL` is returned (unless `draws` is null).
 */
enum FtkStatus ftk_epoch_draws(size_t n_minority,
                               size_t n_majority,
                               uint64_t epoch,
                               const struct FtkScheduleConfig *config,
                               struct FtkDraw *draws,
                               size_t capacity,
                               size_t *len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FUNDUS_TK_H */
