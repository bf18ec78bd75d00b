#ifndef STALESGD_H
#define STALESGD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum StalesgdStatus {
  STALESGD_STATUS_OK = 0,
  STALESGD_STATUS_NULL_POINTER = 1,
  STALESGD_STATUS_INVALID_ARGUMENT = 2,
  STALESGD_STATUS_UNSUPPORTED = 3,
  STALESGD_STATUS_PRECONDITION = 4,
  STALESGD_STATUS_INSUFFICIENT_DATA = 5,
  STALESGD_STATUS_IO = 6,
  STALESGD_STATUS_OUT_OF_RANGE = 7,
  STALESGD_STATUS_PANIC = 8,
} StalesgdStatus;

// Aggregation protocol.
typedef enum StalesgdProtocol {
  STALESGD_PROTOCOL_K_SYNC = 0,
  STALESGD_PROTOCOL_K_BATCH_SYNC = 1,
  STALESGD_PROTOCOL_K_ASYNC = 2,
  STALESGD_PROTOCOL_K_BATCH_ASYNC = 3,
} StalesgdProtocol;

// Runtime distribution handle.
typedef struct StalesgdDistribution StalesgdDistribution;

// Objective handle.
typedef struct StalesgdObjective StalesgdObjective;

// Simulation trace handle.
typedef struct StalesgdTrace StalesgdTrace;

// Symbols of the error bounds.
typedef struct StalesgdBoundParams {
  double eta;
  double smoothness;
  double strong_convexity;
  double noise_variance;
  double multiplicative_variance;
  size_t batch_size;
  size_t wait_for;
  double gamma;
  double p0;
  double schedule_c;
  double eta_max;
  size_t horizon;
} StalesgdBoundParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// Valid until the next call on the same thread.
const char *stalesgd_last_error_message(void);

enum StalesgdStatus stalesgd_distribution_exponential(double rate,
                                                      struct StalesgdDistribution **out);

enum StalesgdStatus stalesgd_distribution_shifted_exponential(double shift,
                                                              double rate,
                                                              struct StalesgdDistribution **out);

enum StalesgdStatus stalesgd_distribution_pareto(double shape,
                                                 double scale,
                                                 struct StalesgdDistribution **out);

enum StalesgdStatus stalesgd_distribution_deterministic(double value,
                                                        struct StalesgdDistribution **out);

// Mixture of `n` exponentials with the given weights and rates.
enum StalesgdStatus stalesgd_distribution_hyper_exponential(const double *weights,
                                                            const double *rates,
                                                            size_t n,
                                                            struct StalesgdDistribution **out);

void stalesgd_distribution_free(struct StalesgdDistribution *d);

enum StalesgdStatus stalesgd_distribution_mean(const struct StalesgdDistribution *d, double *out);

// `E[X_{k:p}]`. `samples = 0` asks for the closed form; otherwise a
// Monte-Carlo estimate with that many draws and its standard error.
enum StalesgdStatus stalesgd_expected_order_statistic(const struct StalesgdDistribution *d,
                                                      size_t k,
                                                      size_t p,
                                                      size_t samples,
                                                      uint64_t seed,
                                                      double *out_value,
                                                      double *out_stderr);

// `P · E[X_{P:P}] / E[X]`; `samples` as for the order statistic.
enum StalesgdStatus stalesgd_speedup_sync_over_async(const struct StalesgdDistribution *d,
                                                     size_t p,
                                                     size_t samples,
                                                     uint64_t seed,
                                                     double *out_value,
                                                     double *out_stderr);

// `½ Σ λ_i w_i²` with additive gradient noise of total variance `sigma²/m`.
enum StalesgdStatus stalesgd_objective_quadratic(const double *eigenvalues,
                                                 size_t dim,
                                                 double sigma,
                                                 struct StalesgdObjective **out);

// L2-regularized logistic regression on two synthetic Gaussian clusters.
enum StalesgdStatus stalesgd_objective_logistic_synthetic(size_t n_samples,
                                                          size_t dim,
                                                          double lambda,
                                                          uint64_t data_seed,
                                                          struct StalesgdObjective **out);

void stalesgd_objective_free(struct StalesgdObjective *o);

enum StalesgdStatus stalesgd_objective_dim(const struct StalesgdObjective *o, size_t *out);

enum StalesgdStatus stalesgd_objective_loss(const struct StalesgdObjective *o,
                                            const double *w,
                                            size_t len,
                                            double *out);

// Smoothness, strong convexity, noise variance, multiplicative noise and
// optimal value, in that order, into `out[0..5]`.
enum StalesgdStatus stalesgd_objective_constants(const struct StalesgdObjective *o, double *out);

// Runs one replication. `schedule_c > 0` selects the staleness-compensated
// schedule with ceiling `eta`; otherwise the rate is fixed at `eta`.
enum StalesgdStatus stalesgd_simulate(const struct StalesgdObjective *objective,
                                      const struct StalesgdDistribution *distribution,
                                      enum StalesgdProtocol protocol,
                                      size_t learners,
                                      size_t wait_for,
                                      size_t batch_size,
                                      double eta,
                                      double schedule_c,
                                      size_t iterations,
                                      uint64_t master_seed,
                                      uint64_t replication,
                                      struct StalesgdTrace **out);

void stalesgd_trace_free(struct StalesgdTrace *t);

enum StalesgdStatus stalesgd_trace_len(const struct StalesgdTrace *t, size_t *out);

// `out_diverged` is 1 when the run diverged, with the iteration in
// `out_iteration`; 0 otherwise.
enum StalesgdStatus stalesgd_trace_diverged(const struct StalesgdTrace *t,
                                            int32_t *out_diverged,
                                            size_t *out_iteration);

// Fields of record `index` (0-based). Any out pointer may be null.
enum StalesgdStatus stalesgd_trace_record(const struct StalesgdTrace *t,
                                          size_t index,
                                          double *out_wallclock,
                                          double *out_loss,
                                          double *out_eta,
                                          size_t *out_max_staleness);

enum StalesgdStatus stalesgd_trace_measure_runtime(const struct StalesgdTrace *t,
                                                   size_t burn_in,
                                                   double *out_mean,
                                                   double *out_stderr);

// Fraction of applied gradients with zero staleness.
enum StalesgdStatus stalesgd_trace_estimate_p0(const struct StalesgdTrace *t, double *out);

enum StalesgdStatus stalesgd_trace_write_csv(const struct StalesgdTrace *t, const char *path);

// K-sync bound `b_0..b_horizon` into `out` (capacity at least `horizon + 1`).
enum StalesgdStatus stalesgd_bound_ksync(const struct StalesgdBoundParams *params,
                                         double f0_gap,
                                         double *out,
                                         size_t capacity);

// K-async bound `b_0..b_horizon` into `out` (capacity at least `horizon + 1`).
enum StalesgdStatus stalesgd_bound_kasync(const struct StalesgdBoundParams *params,
                                          double f0_gap,
                                          double *out,
                                          size_t capacity);

// Variable-rate bound for the rates `etas[0..n]` into `out` (capacity at least `n + 1`).
enum StalesgdStatus stalesgd_bound_variable_lr(const double *etas,
                                               size_t n,
                                               const struct StalesgdBoundParams *params,
                                               double f0_gap,
                                               double *out,
                                               size_t capacity);

// Non-convex ergodic bound on the mean squared gradient norm.
enum StalesgdStatus stalesgd_bound_nonconvex(const struct StalesgdBoundParams *params,
                                             double f0_gap,
                                             size_t horizon,
                                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STALESGD_H */
