#ifndef MBLAB_H
#define MBLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MblabStatus {
  MBLAB_STATUS_OK = 0,
  MBLAB_STATUS_NULL_POINTER = 1,
  MBLAB_STATUS_INVALID_ARGUMENT = 2,
  MBLAB_STATUS_DOMAIN = 3,
  MBLAB_STATUS_PRECONDITION = 4,
  MBLAB_STATUS_SINGULAR = 5,
  MBLAB_STATUS_TOO_LARGE = 6,
  MBLAB_STATUS_IO = 7,
  /**
   * The run completed but a checked bound failed; the report is still
   * returned.
   */
  MBLAB_STATUS_ASSERTION_FAILED = 8,
  MBLAB_STATUS_PANIC = 9,
} MblabStatus;

/**
 * An almost-Auerbach block.
 */
typedef struct MblabBlock MblabBlock;

/**
 * A square system of vectors (the columns of an invertible matrix).
 */
typedef struct MblabSystem MblabSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread. Valid until the next
 * failing call on the same thread; never null.
 */
const char *mblab_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mblab_version(void);

/**
 * Builds a block from `len` epsilon values (each in `[0, 1]`, summing to
 * at least 1).
 *
 * # Safety
 * `eps` must point to `len` readable doubles and `out` must be writable.
 */
enum MblabStatus mblab_block_new(const double *eps, size_t len, struct MblabBlock **out);

/**
 * # Safety
 * `block` must come from `mblab_block_new` and not be freed twice.
 */
void mblab_block_free(struct MblabBlock *block);

/**
 * # Safety
 * `block` must be a live handle and `out` writable.
 */
enum MblabStatus mblab_block_dim(const struct MblabBlock *block, size_t *out);

/**
 * Closed-form Gram entry `<x_i, x_j>`, 1-based local indices.
 *
 * # Safety
 * `block` must be a live handle and `out` writable.
 */
enum MblabStatus mblab_block_gram(const struct MblabBlock *block, size_t i, size_t j, double *out);

/**
 * Distance to the orthonormal basis, `sqrt(sum eps)`.
 *
 * # Safety
 * `block` must be a live handle and `out` writable.
 */
enum MblabStatus mblab_block_distance(const struct MblabBlock *block, double *out);

/**
 * System from an `n x n` row-major matrix whose columns are the vectors.
 *
 * # Safety
 * `data` must point to `n * n` readable doubles and `out` must be writable.
 */
enum MblabStatus mblab_system_from_rows(const double *data, size_t n, struct MblabSystem **out);

/**
 * Explicit vectors of a block.
 *
 * # Safety
 * `block` must be a live handle and `out` writable.
 */
enum MblabStatus mblab_system_from_block(const struct MblabBlock *block, struct MblabSystem **out);

/**
 * # Safety
 * `system` must come from this library and not be freed twice.
 */
void mblab_system_free(struct MblabSystem *system);

/**
 * `|A| |A^{-1}|`.
 *
 * # Safety
 * `system` must be a live handle and `out` writable.
 */
enum MblabStatus mblab_system_riesz_distance(const struct MblabSystem *system, double *out);

/**
 * Largest prefix-projection norm in the system's order (dimension <= 64).
 *
 * # Safety
 * `system` must be a live handle and `out` writable.
 */
enum MblabStatus mblab_system_basis_constant(const struct MblabSystem *system, double *out);

/**
 * Runs a JSON configuration (the same schema as the `--config` file; `mode`
 * is required) and returns the JSON report in `*out`, to be released with
 * `mblab_string_free`. Returns `MBLAB_STATUS_ASSERTION_FAILED` with a
 * report when a checked bound fails.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string and `out` writable.
 */
enum MblabStatus mblab_run_json(const char *config_json, char **out);

/**
 * # Safety
 * `s` must come from `mblab_run_json` and not be freed twice.
 */
void mblab_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MBLAB_H */
