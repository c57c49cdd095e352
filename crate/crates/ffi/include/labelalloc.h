#ifndef LABELALLOC_H
#define LABELALLOC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible call.
 */
typedef enum LabelallocStatus {
  LabelallocStatus_Ok = 0,
  /**
   * A required pointer argument was null.
   */
  LabelallocStatus_NullPointer = 1,
  /**
   * An argument was out of domain (non-finite value, bad lambda, ...).
   */
  LabelallocStatus_InvalidArgument = 2,
  /**
   * The statistic is undefined at the current sample size.
   */
  LabelallocStatus_Undefined = 3,
} LabelallocStatus;

/**
 * Opaque accumulator of paired (human, LLM) observations for one question.
 */
typedef struct LabelallocStats LabelallocStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Create an empty paired-statistics handle. Free with
 * `labelalloc_stats_free`.
 */
struct LabelallocStats *labelalloc_stats_new(void);

/**
 * Destroy a handle created by `labelalloc_stats_new`. A null pointer is a
 * no-op.
 */
void labelalloc_stats_free(struct LabelallocStats *stats);

/**
 * Record one paired observation (human response `y`, LLM prediction `s`).
 */
enum LabelallocStatus labelalloc_stats_push(struct LabelallocStats *stats, double y, double s);

/**
 * Number of observations recorded so far.
 */
uint64_t labelalloc_stats_len(const struct LabelallocStats *stats);

/**
 * Fitted tuning coefficient: the clipped regression coefficient of the
 * human response on the LLM prediction.
 */
enum LabelallocStatus labelalloc_stats_lambda(const struct LabelallocStats *stats, double *out);

/**
 * Tuned rectification difficulty: the unbiased sample variance of
 * `y - lambda * s`.
 */
enum LabelallocStatus labelalloc_stats_difficulty(const struct LabelallocStats *stats,
                                                  double lambda,
                                                  double *out);

/**
 * Rectified mean estimate combining the labeled sample with the mean of a
 * large LLM-prediction pool, with prediction term scaled by `lambda`.
 */
enum LabelallocStatus labelalloc_stats_estimate(const struct LabelallocStats *stats,
                                                double synthetic_mean,
                                                double lambda,
                                                double *out);

/**
 * Variance-minimizing fractional label counts for `len` questions with
 * difficulties `a`, importance weights `w`, per-label costs `c`, and total
 * budget `budget`. Writes `len` values to `out`.
 */
enum LabelallocStatus labelalloc_neyman_allocation(const double *a,
                                                   const double *w,
                                                   const double *c,
                                                   uintptr_t len,
                                                   double budget,
                                                   double *out);

/**
 * Best achievable weighted expected MSE at `budget` under the allocation of
 * `labelalloc_neyman_allocation`.
 */
enum LabelallocStatus labelalloc_oracle_mse(const double *a,
                                            const double *w,
                                            const double *c,
                                            uintptr_t len,
                                            double budget,
                                            double *out);

/**
 * Marginal efficiency index: variance reduction per unit cost of one more
 * label at the current count `n`.
 */
enum LabelallocStatus labelalloc_marginal_efficiency(double w,
                                                     double a,
                                                     double c,
                                                     uint64_t n,
                                                     double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LABELALLOC_H */
