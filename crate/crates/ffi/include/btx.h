#ifndef BTX_H
#define BTX_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BtxStatus {
  BTX_STATUS_OK = 0,
  BTX_STATUS_NULL_POINTER = 1,
  BTX_STATUS_INVALID_UTF8 = 2,
  BTX_STATUS_IO = 3,
  BTX_STATUS_DATA = 4,
  BTX_STATUS_INVALID_ARGUMENT = 5,
  BTX_STATUS_PANIC = 6,
} BtxStatus;

/**
 * A loaded BPE model.
 */
typedef struct BtxBpe BtxBpe;

/**
 * A loaded translation checkpoint.
 */
typedef struct BtxModel BtxModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *btx_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *btx_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void btx_string_free(char *s);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum BtxStatus btx_bpe_load(const char *path, struct BtxBpe **out);

/**
 * Segments a tokenized line into space-separated units.
 *
 * # Safety
 * `bpe` must come from [`btx_bpe_load`]; `line` must be NUL-terminated.
 */
enum BtxStatus btx_bpe_apply(const struct BtxBpe *bpe, const char *line, char **out);

/**
 * # Safety
 * `bpe` must be null or a handle from [`btx_bpe_load`], freed once.
 */
void btx_bpe_free(struct BtxBpe *bpe);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum BtxStatus btx_model_load(const char *path, struct BtxModel **out);

/**
 * Translates one line. `beam == 0` selects greedy search.
 *
 * # Safety
 * `model` must come from [`btx_model_load`]; `line` must be
 * NUL-terminated and `out` writable.
 */
enum BtxStatus btx_model_translate(const struct BtxModel *model,
                                   const char *line,
                                   uint32_t beam,
                                   char **out);

/**
 * # Safety
 * `model` must be null or a handle from [`btx_model_load`], freed once.
 */
void btx_model_free(struct BtxModel *model);

/**
 * Case-sensitive corpus BLEU (0-100) over `n` tokenized line pairs.
 *
 * # Safety
 * `hyps` and `refs` must each point to `n` NUL-terminated strings.
 */
enum BtxStatus btx_bleu(const char *const *hyps, const char *const *refs, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BTX_H */
