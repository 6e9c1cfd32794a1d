#ifndef SEQRANK_H
#define SEQRANK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  SRK_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SRK_STATUS_NULL_ARGUMENT = 1,
  /**
   * An argument was out of range or inconsistent.
   */
  SRK_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The file could not be opened, read or written.
   */
  SRK_STATUS_IO = 3,
  /**
   * The file is not a well-formed container.
   */
  SRK_STATUS_FORMAT = 4,
  /**
   * The result is undefined for this input, e.g. an all-zero matrix.
   */
  SRK_STATUS_DEGENERATE = 5,
  /**
   * A bug in the library.
   */
  SRK_STATUS_INTERNAL = 6,
} SrkStatus;

typedef enum {
  SRK_P_METHOD_EXACT = 0,
  SRK_P_METHOD_NORMAL = 1,
  SRK_P_METHOD_UNDEFINED = 2,
} SrkPMethod;

typedef enum {
  SRK_POOLING_SUM = 0,
  SRK_POOLING_MEAN = 1,
} SrkPooling;

/**
 * A ragged set of embedding sequences sharing one dimension.
 */
typedef struct SrkSequenceSet SrkSequenceSet;

typedef struct {
  double value;
  /**
   * Singular values that survived the relative zero cutoff.
   */
  size_t retained;
} SrkRank;

typedef struct {
  /**
   * NaN when `has_tau` is 0.
   */
  double tau;
  /**
   * NaN when `has_tau` is 0.
   */
  double p_value;
  uint8_t has_tau;
  SrkPMethod p_method;
  uint64_t n;
  uint64_t concordant;
  uint64_t discordant;
  uint64_t ties_x;
  uint64_t ties_y;
  uint64_t ties_xy;
} SrkKendall;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or an empty string.
 * The pointer stays valid until the next call into this library on the
 * same thread.
 */
const char *srk_last_error(void);

/**
 * Reads an RKMT container file.
 */
SrkStatus srk_read_container(const char *path, SrkSequenceSet **out);

/**
 * Writes `set` as an RKMT container; `dtype` is 0 for f32, 1 for f64.
 */
SrkStatus srk_write_container(const SrkSequenceSet *set, const char *path, uint8_t dtype);

/**
 * Builds a set from `n` sequences. Sequence `i` has `lengths[i]` frames of
 * `dim` values; `frames` holds all of them back to back, row-major.
 */
SrkStatus srk_sequence_set_new(size_t dim,
                               const size_t *lengths,
                               size_t n,
                               const double *frames,
                               SrkSequenceSet **out);

/**
 * Releases a set. Null is ignored.
 */
void srk_sequence_set_free(SrkSequenceSet *set);

/**
 * Number of sequences, or 0 for null.
 */
size_t srk_sequence_set_len(const SrkSequenceSet *set);

/**
 * Embedding dimension, or 0 for null.
 */
size_t srk_sequence_set_dim(const SrkSequenceSet *set);

/**
 * Draws `k` sequences without replacement with the seeded sampler. The
 * chosen positions depend only on `(len, k, seed)`.
 */
SrkStatus srk_sequence_set_sample(const SrkSequenceSet *set,
                                  size_t k,
                                  uint64_t seed,
                                  SrkSequenceSet **out);

/**
 * Effective rank of the set after pooling each sequence to one row.
 * `pooling` is an [`SrkPooling`] value.
 */
SrkStatus srk_rankme_t(const SrkSequenceSet *set, uint32_t pooling, SrkRank *out);

/**
 * Effective rank of a row-major `rows × cols` matrix.
 */
SrkStatus srk_rankme(const double *data, size_t rows, size_t cols, SrkRank *out);

/**
 * Effective rank of a list of singular values, in any order.
 */
SrkStatus srk_effective_rank(const double *sigmas, size_t len, SrkRank *out);

/**
 * Kendall τ-b of `n` paired observations. A constant side is not an error:
 * the result has `has_tau = 0`.
 */
SrkStatus srk_kendall_tau(const double *x, const double *y, size_t n, SrkKendall *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEQRANK_H */
