#ifndef TSOM_H
#define TSOM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TsomStatus {
  TSOM_STATUS_OK = 0,
  TSOM_STATUS_NULL_POINTER = 1,
  TSOM_STATUS_INVALID_ARGUMENT = 2,
  TSOM_STATUS_IO = 3,
  TSOM_STATUS_VALIDATION = 4,
  TSOM_STATUS_PROPERTY_VIOLATION = 5,
  TSOM_STATUS_OUT_OF_RANGE = 6,
  TSOM_STATUS_PANIC = 7,
} TsomStatus;

typedef struct TsomDetections TsomDetections;

typedef struct TsomDetector TsomDetector;

typedef struct TsomSequence TsomSequence;

/**
 * One detection: pixel position, frame index and score.
 */
typedef struct TsomDetection {
  size_t x;
  size_t y;
  size_t frame;
  double score;
} TsomDetection;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next call into the library on the same thread.
 */
const char *tsom_last_error(void);

/**
 * Library version as a static string.
 */
const char *tsom_version(void);

/**
 * Default pipeline configuration as JSON. Free with [`tsom_string_free`].
 */
char *tsom_default_config_json(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void tsom_string_free(char *s);

/**
 * Creates a detector for `width` x `height` frames. `config_json` may be
 * NULL for defaults; missing fields take defaults.
 *
 * # Safety
 * `config_json` must be NULL or a nul-terminated string; `out` must be
 * writable.
 */
enum TsomStatus tsom_detector_new(const char *config_json,
                                  size_t width,
                                  size_t height,
                                  struct TsomDetector **out);

/**
 * # Safety
 * `detector` must be NULL or a live handle from [`tsom_detector_new`].
 */
void tsom_detector_free(struct TsomDetector *detector);

/**
 * Creates an empty sequence of `width` x `height` frames.
 *
 * # Safety
 * `out` must be writable.
 */
enum TsomStatus tsom_sequence_new(size_t width,
                                  size_t height,
                                  double fps,
                                  struct TsomSequence **out);

/**
 * Loads a frame directory or (animated) PNG.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum TsomStatus tsom_sequence_load(const char *path, double fps, struct TsomSequence **out);

/**
 * Appends a row-major frame of `len == width * height` luminances in
 * `[0, 1]`.
 *
 * # Safety
 * `data` must point to `len` readable doubles.
 */
enum TsomStatus tsom_sequence_push_frame(struct TsomSequence *seq, const double *data, size_t len);

/**
 * Appends a row-major 8-bit frame; values map to `v / 255`.
 *
 * # Safety
 * `data` must point to `len` readable bytes.
 */
enum TsomStatus tsom_sequence_push_frame_u8(struct TsomSequence *seq,
                                            const uint8_t *data,
                                            size_t len);

/**
 * Number of frames, or 0 for NULL.
 *
 * # Safety
 * `seq` must be NULL or a live handle.
 */
size_t tsom_sequence_len(const struct TsomSequence *seq);

/**
 * # Safety
 * `seq` must be NULL or a live handle.
 */
void tsom_sequence_free(struct TsomSequence *seq);

/**
 * Runs the detector over the whole sequence.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum TsomStatus tsom_detect(const struct TsomDetector *detector,
                            const struct TsomSequence *seq,
                            struct TsomDetections **out);

/**
 * # Safety
 * `dets` must be NULL or a live handle.
 */
size_t tsom_detections_len(const struct TsomDetections *dets);

/**
 * Copies detection `index` into `out`.
 *
 * # Safety
 * `dets` must be a live handle; `out` must be writable.
 */
enum TsomStatus tsom_detections_get(const struct TsomDetections *dets,
                                    size_t index,
                                    struct TsomDetection *out);

/**
 * # Safety
 * `dets` must be NULL or a live handle.
 */
void tsom_detections_free(struct TsomDetections *dets);

/**
 * Monte Carlo check of the two-stage accumulation bound. Writes the number
 * of violating instances to `violations` (may be NULL) and returns
 * `PropertyViolation` when there is at least one.
 *
 * # Safety
 * `violations` must be NULL or writable.
 */
enum TsomStatus tsom_circuit_verify(uint64_t trials,
                                    size_t min_subsets,
                                    size_t max_subsets,
                                    uint64_t seed,
                                    uint64_t *violations);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TSOM_H */
