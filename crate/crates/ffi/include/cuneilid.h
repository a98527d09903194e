#ifndef CUNEILID_H
#define CUNEILID_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum CuneilidStatus {
  CUNEILID_STATUS_OK = 0,
  CUNEILID_STATUS_NULL_ARGUMENT = 1,
  CUNEILID_STATUS_INVALID_UTF8 = 2,
  CUNEILID_STATUS_IO = 3,
  CUNEILID_STATUS_FORMAT = 4,
  CUNEILID_STATUS_UNKNOWN_READING = 5,
  CUNEILID_STATUS_RANGE_MISMATCH = 6,
  CUNEILID_STATUS_INVALID_ARGUMENT = 7,
  CUNEILID_STATUS_PANIC = 8,
} CuneilidStatus;

/**
 * A trained set of per-language models.
 */
typedef struct CuneilidModelSet CuneilidModelSet;

/**
 * A reading-to-sign list.
 */
typedef struct CuneilidSignList CuneilidSignList;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL after a
 * success. The pointer stays valid until the next library call on the thread.
 */
const char *cuneilid_last_error(void);

/**
 * Frees a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void cuneilid_string_free(char *s);

/**
 * Loads a model set from a JSON model file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CuneilidStatus cuneilid_models_load(const char *path, struct CuneilidModelSet **out);

/**
 * Trains a model set from a `<text>\t<label>` file. `range` is written
 * `L-H` or `L-H+lines`.
 *
 * # Safety
 * `path` and `range` must be NUL-terminated strings; `out` must be writable.
 */
enum CuneilidStatus cuneilid_models_train_tsv(const char *path,
                                              const char *range,
                                              struct CuneilidModelSet **out);

/**
 * Writes a model set as JSON.
 *
 * # Safety
 * `models` must be a live handle; `path` a NUL-terminated string.
 */
enum CuneilidStatus cuneilid_models_save(const struct CuneilidModelSet *models, const char *path);

/**
 * Releases a model set. NULL is ignored.
 *
 * # Safety
 * `models` must come from this library and not have been freed.
 */
void cuneilid_models_free(struct CuneilidModelSet *models);

/**
 * Number of languages in the set, or 0 for NULL.
 *
 * # Safety
 * `models` must be NULL or a live handle.
 */
size_t cuneilid_models_label_count(const struct CuneilidModelSet *models);

/**
 * Label at `index` in sorted order, as a newly allocated string.
 *
 * # Safety
 * `models` must be a live handle; `out_label` must be writable.
 */
enum CuneilidStatus cuneilid_models_label(const struct CuneilidModelSet *models,
                                          size_t index,
                                          char **out_label);

/**
 * Identifies the language of one line of cuneiform text.
 *
 * `method` is one of `simple`, `sum`, `product`, `heli`, `ensemble`.
 * A `penalty` of 0 selects the method default. `range` may be NULL to use
 * the model range (or the standard ensemble ranges). The label is written
 * to `out_label` as a newly allocated string.
 *
 * # Safety
 * `models` must be a live handle; `line` and `method` NUL-terminated
 * strings; `range` NULL or a NUL-terminated string; `out_label` writable.
 */
enum CuneilidStatus cuneilid_identify(const struct CuneilidModelSet *models,
                                      const char *line,
                                      const char *method,
                                      double penalty,
                                      const char *range,
                                      char **out_label);

/**
 * Loads a `<reading>\t<signs>` sign list.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CuneilidStatus cuneilid_signs_load(const char *path, struct CuneilidSignList **out);

/**
 * Releases a sign list. NULL is ignored.
 *
 * # Safety
 * `signs` must come from this library and not have been freed.
 */
void cuneilid_signs_free(struct CuneilidSignList *signs);

/**
 * Converts one ATF transliteration line to cuneiform.
 *
 * With `strict` non-zero an unknown reading fails with
 * `CUNEILID_STATUS_UNKNOWN_READING`; otherwise it is dropped and counted in
 * `out_dropped`, which may be NULL.
 *
 * # Safety
 * `signs` must be a live handle; `atf` a NUL-terminated string; `out`
 * writable; `out_dropped` NULL or writable.
 */
enum CuneilidStatus cuneilid_convert(const struct CuneilidSignList *signs,
                                     const char *atf,
                                     int32_t strict,
                                     char **out,
                                     size_t *out_dropped);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CUNEILID_H */
