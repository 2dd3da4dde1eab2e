#ifndef CRVX_H
#define CRVX_H

/* Generated with cbindgen:0.27.0 */

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum CrvxBackend {
  CRVX_BACKEND_SCAN = 0,
  CRVX_BACKEND_GRID = 1,
} CrvxBackend;

typedef enum CrvxMetric {
  /**
   * The metric the index was built for.
   */
  CRVX_METRIC_NATIVE = 0,
  CRVX_METRIC_DFD = 1,
  CRVX_METRIC_DTW = 2,
} CrvxMetric;

typedef enum CrvxStatus {
  CRVX_STATUS_OK = 0,
  /**
   * Null pointer, bad UTF-8 or an out-of-range parameter.
   */
  CRVX_STATUS_INVALID_ARGUMENT = 1,
  /**
   * The curves themselves are unusable (empty, non-finite, mismatched
   * dimensions, duplicate ids, query too long).
   */
  CRVX_STATUS_DATA_ERROR = 2,
  CRVX_STATUS_IO_ERROR = 3,
  CRVX_STATUS_CORRUPT_INDEX = 4,
  CRVX_STATUS_VERSION_MISMATCH = 5,
  /**
   * A size cap was hit (target dimension, build budget, grid dimension).
   */
  CRVX_STATUS_LIMIT_EXCEEDED = 6,
  CRVX_STATUS_INTERNAL = 7,
} CrvxStatus;

/**
 * Opaque index handle.
 */
typedef struct CrvxIndex CrvxIndex;

/**
 * Build parameters. `p = INFINITY` selects the discrete Frechet distance;
 * `k_override = 0` derives the projection dimension from `p`, `epsilon`
 * and `k_scale`.
 */
typedef struct CrvxParams {
  double p;
  double epsilon;
  uint32_t repetitions;
  enum CrvxBackend backend;
  uint64_t seed;
  uint32_t k_override;
  double k_scale;
} CrvxParams;

typedef struct CrvxQueryResult {
  /**
   * Position of the answer in the indexed dataset.
   */
  uintptr_t curve_index;
  /**
   * Exact distance from the query to the answer.
   */
  double distance;
  uintptr_t candidates;
  uintptr_t probes;
  /**
   * True when no probe returned a candidate and the answer came from an
   * exact scan.
   */
  bool fallback;
} CrvxQueryResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parameters with the library defaults: scan backend, seed 0,
 * `ceil(4 / epsilon)` repetitions and a derived projection dimension.
 */
struct CrvxParams crvx_params_default(double p, double epsilon);

/**
 * Message describing the last failure on this thread; empty after a
 * success. Valid until the next `crvx_*` call on the same thread.
 */
const char *crvx_last_error(void);

/**
 * Builds an index over `n_curves` curves. Curve `i` has id `ids[i]` and
 * `lengths[i]` points; `coords` holds all points of all curves back to
 * back, `dim` values per point.
 *
 * # Safety
 * `ids` and `lengths` must point to `n_curves` readable entries, every id
 * must be a NUL-terminated string, `coords` must hold
 * `sum(lengths) * dim` doubles, `params` must be readable and `out`
 * writable.
 */
enum CrvxStatus crvx_index_build(const char *const *ids,
                                 const uintptr_t *lengths,
                                 uintptr_t n_curves,
                                 uintptr_t dim,
                                 const double *coords,
                                 const struct CrvxParams *params,
                                 struct CrvxIndex **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum CrvxStatus crvx_index_load(const char *path, struct CrvxIndex **out);

/**
 * # Safety
 * `index` must be a live handle and `path` a NUL-terminated string.
 */
enum CrvxStatus crvx_index_save(const struct CrvxIndex *index, const char *path);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `index` must be null or a handle from this library not yet freed.
 */
void crvx_index_free(struct CrvxIndex *index);

/**
 * Number of indexed curves; 0 for a null handle.
 *
 * # Safety
 * `index` must be null or a live handle.
 */
uintptr_t crvx_index_len(const struct CrvxIndex *index);

/**
 * Point dimension of the indexed curves; 0 for a null handle.
 *
 * # Safety
 * `index` must be null or a live handle.
 */
uintptr_t crvx_index_dim(const struct CrvxIndex *index);

/**
 * Longest indexed curve, which is also the longest accepted query.
 *
 * # Safety
 * `index` must be null or a live handle.
 */
uintptr_t crvx_index_max_len(const struct CrvxIndex *index);

/**
 * Id of curve `i`, owned by the handle; null when out of range.
 *
 * # Safety
 * `index` must be null or a live handle.
 */
const char *crvx_index_curve_id(const struct CrvxIndex *index, uintptr_t i);

/**
 * Approximate nearest curve to the query of `len` points.
 *
 * # Safety
 * `index` must be a live handle, `coords` must hold `len * dim` doubles and
 * `out` must be writable.
 */
enum CrvxStatus crvx_index_query(const struct CrvxIndex *index,
                                 const double *coords,
                                 uintptr_t len,
                                 uintptr_t dim,
                                 enum CrvxMetric metric,
                                 struct CrvxQueryResult *out);

/**
 * Exact lp-distance of two curves; `p = INFINITY` gives the discrete
 * Frechet distance and `p = 1` dynamic time warping.
 *
 * # Safety
 * `a` and `b` must hold `len_a * dim` and `len_b * dim` doubles and `out`
 * must be writable.
 */
enum CrvxStatus crvx_curve_distance(const double *a,
                                    uintptr_t len_a,
                                    const double *b,
                                    uintptr_t len_b,
                                    uintptr_t dim,
                                    double p,
                                    double *out);

/**
 * Library version, a static string.
 */
const char *crvx_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CRVX_H */
