#ifndef SBMF_H
#define SBMF_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code of every fallible call.
 */
typedef enum SbmfStatus {
  /**
   * Success.
   */
  SBMF_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SBMF_STATUS_NULL_ARGUMENT = 1,
  /**
   * The input could not be parsed as a Matrix Market file.
   */
  SBMF_STATUS_PARSE_ERROR = 2,
  /**
   * A scheme, block size or precision argument is out of range.
   */
  SBMF_STATUS_INVALID_ARGUMENT = 3,
  /**
   * The operation failed; see `sbmf_last_error_message`.
   */
  SBMF_STATUS_FAILED = 4,
} SbmfStatus;

/**
 * Opaque parsed matrix handle.
 */
typedef struct SbmfMatrix SbmfMatrix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses a Matrix Market file held in memory.
 *
 * On success writes a freshly allocated handle to `out`; release it
 * with `sbmf_matrix_free`.
 *
 * # Safety
 * `data` must point to `len` readable bytes and `out` must be a valid
 * pointer.
 */
enum SbmfStatus sbmf_matrix_parse(const char *data, uintptr_t len, struct SbmfMatrix **out);

/**
 * Releases a handle returned by `sbmf_matrix_parse`. Null is ignored.
 *
 * # Safety
 * `matrix` must be a handle from `sbmf_matrix_parse` not yet freed.
 */
void sbmf_matrix_free(struct SbmfMatrix *matrix);

/**
 * Number of matrix rows; 0 on a null handle.
 *
 * # Safety
 * `matrix` must be a live handle or null.
 */
uint32_t sbmf_matrix_rows(const struct SbmfMatrix *matrix);

/**
 * Number of matrix columns; 0 on a null handle.
 *
 * # Safety
 * `matrix` must be a live handle or null.
 */
uint32_t sbmf_matrix_cols(const struct SbmfMatrix *matrix);

/**
 * Number of stored elements; 0 on a null handle.
 *
 * # Safety
 * `matrix` must be a live handle or null.
 */
uint64_t sbmf_matrix_nnz_stored(const struct SbmfMatrix *matrix);

/**
 * Number of logical nonzeros (symmetric mirroring included); 0 on a
 * null handle.
 *
 * # Safety
 * `matrix` must be a live handle or null.
 */
uint64_t sbmf_matrix_nnz_all(const struct SbmfMatrix *matrix);

/**
 * CSR32 reference footprint in bits for 32- or 64-bit values.
 *
 * # Safety
 * `matrix` must be a live handle and `out` a valid pointer.
 */
enum SbmfStatus sbmf_matrix_csr32_bits(const struct SbmfMatrix *matrix,
                                       uint32_t value_bits,
                                       uint64_t *out);

/**
 * Footprint lower bound (value bits only).
 *
 * # Safety
 * `matrix` must be a live handle and `out` a valid pointer.
 */
enum SbmfStatus sbmf_matrix_lower_bound(const struct SbmfMatrix *matrix,
                                        uint32_t value_bits,
                                        uint64_t *out);

/**
 * Memory footprint of one (scheme, block size) configuration. `k` and
 * `l` are the block dimension exponents: blocks are 2^k rows by 2^l
 * columns, with both exponents in 1..=8.
 *
 * # Safety
 * `matrix` must be a live handle and `out` a valid pointer.
 */
enum SbmfStatus sbmf_matrix_footprint(const struct SbmfMatrix *matrix,
                                      uint32_t scheme,
                                      uint32_t k,
                                      uint32_t l,
                                      uint32_t value_bits,
                                      uint64_t *out);

/**
 * Finds the optimal configuration over all six schemes and all 64
 * block sizes. Any of the out pointers may be null to skip that field.
 *
 * # Safety
 * `matrix` must be a live handle; non-null out pointers must be valid.
 */
enum SbmfStatus sbmf_matrix_optimal(const struct SbmfMatrix *matrix,
                                    uint32_t value_bits,
                                    uint32_t *out_scheme,
                                    uint32_t *out_k,
                                    uint32_t *out_l,
                                    uint64_t *out_bits);

/**
 * Copies the current thread's last error message into `buf` (NUL
 * terminated, truncated to `len` bytes). Returns the full message
 * length in bytes, not counting the terminator.
 *
 * # Safety
 * `buf` must point to `len` writable bytes, or be null (query mode).
 */
uintptr_t sbmf_last_error_message(char *buf, uintptr_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SBMF_H */
