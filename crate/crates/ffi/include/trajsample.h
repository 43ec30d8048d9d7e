/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef TRAJSAMPLE_H
#define TRAJSAMPLE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define TS_LOSS_MIN_ADE 0

#define TS_LOSS_MIN_FDE 1

#define TS_SAMPLER_UNIFORM 0

#define TS_SAMPLER_CATEGORICAL 1

#define TS_SAMPLER_TOPK 2

#define TS_SAMPLER_KMEANS 3

#define TS_SAMPLER_NMS 4

#define TS_SAMPLER_NMS_KMEANS 5

#define TS_SAMPLER_OURS 6

// Result of every fallible call.
typedef enum TsStatus {
  TS_STATUS_OK = 0,
  // A required pointer argument was null.
  TS_STATUS_NULL_POINTER = 1,
  // A size, code or count was out of range.
  TS_STATUS_INVALID_ARGUMENT = 2,
  // The numeric data were rejected (negative weights, non-finite
  // coordinates, all-zero model weights and the like).
  TS_STATUS_INVALID_DATA = 3,
  // An internal panic was caught.
  TS_STATUS_PANIC = 4,
} TsStatus;

// Pooled, normalized proposals of an ensemble.
typedef struct TsMixture TsMixture;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null after a success.
// The pointer stays valid until the next call on the same thread.
const char *ts_last_error_message(void);

// Builds a mixture from `num_models` models. Model `m` owns the next
// `model_sizes[m]` entries of `weights` and trajectories of `coords`
// (`horizon` points each). Weights are normalized per model.
//
// # Safety
// Every pointer must be valid for the lengths implied by the sizes, and
// `out` must be writable. The handle written to `*out` must be released with
// [`ts_mixture_free`].
enum TsStatus ts_mixture_new(const size_t *model_sizes,
                             size_t num_models,
                             const double *weights,
                             const double *coords,
                             size_t horizon,
                             struct TsMixture **out);

// Releases a handle from [`ts_mixture_new`]. Null is ignored.
//
// # Safety
// `mixture` must be null or a live handle; it must not be used afterwards.
void ts_mixture_free(struct TsMixture *mixture);

// Number of pooled proposals and their horizon.
//
// # Safety
// `mixture` must be a live handle; `len` and `horizon` must be writable.
enum TsStatus ts_mixture_shape(const struct TsMixture *mixture, size_t *len, size_t *horizon);

// Effective weight of every pooled proposal (model weight over model count).
//
// # Safety
// `mixture` must be a live handle and `out` writable for `len` values.
enum TsStatus ts_mixture_weights(const struct TsMixture *mixture, double *out, size_t len);

// Expected minADE_k (or minFDE_k) of `count` candidates under the mixture.
//
// # Safety
// `candidates` must hold `count * horizon * 2` values and `out` be writable.
enum TsStatus ts_risk(const struct TsMixture *mixture,
                      const double *candidates,
                      size_t count,
                      uint32_t loss,
                      size_t k,
                      double *out);

// Optimizes `count` candidates with the default settings and `seed`, writes
// them ranked into `out_candidates` and their risk into `out_risk`.
//
// # Safety
// `out_candidates` must be writable for `count * horizon * 2` values;
// `out_risk` may be null.
enum TsStatus ts_optimize(const struct TsMixture *mixture,
                          size_t count,
                          uint32_t loss,
                          size_t k,
                          uint64_t seed,
                          double *out_candidates,
                          double *out_risk);

// Runs one sampler (a `TS_SAMPLER_*` code) with default settings. The
// optimizing sampler minimizes minADE over all `count` candidates.
//
// # Safety
// `out_candidates` must be writable for `count * horizon * 2` values.
enum TsStatus ts_sample(const struct TsMixture *mixture,
                        uint32_t sampler,
                        size_t count,
                        uint64_t seed,
                        double *out_candidates);

// Smallest ADE between `reference` and the first `k` of `count` candidates.
//
// # Safety
// `reference` must hold `horizon * 2` values, `candidates`
// `count * horizon * 2`, and `out` must be writable.
enum TsStatus ts_min_ade_k(const double *reference,
                           const double *candidates,
                           size_t count,
                           size_t horizon,
                           size_t k,
                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRAJSAMPLE_H */
