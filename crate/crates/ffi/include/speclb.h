#ifndef SPECLB_H
#define SPECLB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SpeclbStatus {
  SPECLB_STATUS_OK = 0,
  SPECLB_STATUS_NULL_POINTER = 1,
  SPECLB_STATUS_INVALID_UTF8 = 2,
  SPECLB_STATUS_INVALID_INPUT = 3,
  SPECLB_STATUS_UNSTABLE = 4,
  SPECLB_STATUS_NUMERICAL = 5,
  SPECLB_STATUS_PANIC = 6,
} SpeclbStatus;

/*
 Opaque job model (size and slowdown laws plus restart mode).
 */
typedef struct SpeclbModel SpeclbModel;

typedef struct SpeclbTimeout {
  double tau_star;
  /*
   Load per unit arrival rate at `tau_star`.
   */
  double rho_per_lambda;
  /*
   Load relative to the no-timeout load.
   */
  double load_ratio;
  int32_t method;
  /*
   Nonzero when the hazard-rule monotonicity assumptions held on the grid.
   */
  int32_t assumption_held;
} SpeclbTimeout;

typedef struct SpeclbResponse {
  double waiting;
  double second_moment;
  double response;
  double rho;
} SpeclbResponse;

typedef struct SpeclbSimSummary {
  double mean_response;
  double ci95_halfwidth;
  double mean_service;
  double timeout_fraction;
  double messages_per_job;
  uint64_t jobs_completed;
  int32_t diverged;
} SpeclbSimSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or NULL.
 The pointer stays valid until the next failing call on the same thread.
 */
const char *speclb_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *speclb_version(void);

/*
 Parse a model from JSON5. Accepts a full `{S, X, mode}` object or a bare
 slowdown law (unit sizes, restart mode). Free with [`speclb_model_free`].

 # Safety
 `json5` must be a NUL-terminated string; `out` must be writable.
 */
enum SpeclbStatus speclb_model_from_json5(const char *json5, struct SpeclbModel **out);

/*
 # Safety
 `model` must come from [`speclb_model_from_json5`] and not be freed twice. NULL is ignored.
 */
void speclb_model_free(struct SpeclbModel *model);

/*
 Mean first-visit work `E[eta1]`.

 # Safety
 Pointers must be valid.
 */
enum SpeclbStatus speclb_eta1_mean(const struct SpeclbModel *model, double *out);

/*
 Load per unit arrival rate with timeout `tau` (pass `INFINITY` for none).

 # Safety
 Pointers must be valid.
 */
enum SpeclbStatus speclb_load_per_rate(const struct SpeclbModel *model, double tau, double *out);

/*
 Load with timeout `tau` divided by the load without timeouts.

 # Safety
 Pointers must be valid.
 */
enum SpeclbStatus speclb_load_reduction(const struct SpeclbModel *model, double tau, double *out);

/*
 Writes 1 to `out` when speculating with timeout `tau` lowers the load, else 0.

 # Safety
 Pointers must be valid.
 */
enum SpeclbStatus speclb_speculation_helps(const struct SpeclbModel *model,
                                           double tau,
                                           int32_t *out);

/*
 Load-minimising timeout. Pass `lo = hi = 0` for the default search interval.

 # Safety
 Pointers must be valid.
 */
enum SpeclbStatus speclb_optimal_timeout(const struct SpeclbModel *model,
                                         double lo,
                                         double hi,
                                         struct SpeclbTimeout *out);

/*
 Large-system mean response time at arrival rate `lambda` per queue.

 # Safety
 Pointers must be valid.
 */
enum SpeclbStatus speclb_mean_field_response(const struct SpeclbModel *model,
                                             double lambda,
                                             double tau,
                                             struct SpeclbResponse *out);

/*
 Simulate `n_queues` symmetric FCFS queues under `scheme` ("slb", "rnd",
 "coc-2", "cos-2", "riq-2", ...). `tau` applies to SLB only. The first
 10% of jobs are discarded as warmup.

 # Safety
 Pointers must be valid; `scheme` is NUL-terminated.
 */
enum SpeclbStatus speclb_simulate(const struct SpeclbModel *model,
                                  uint32_t n_queues,
                                  double lambda,
                                  double tau,
                                  const char *scheme,
                                  uint64_t n_jobs,
                                  uint64_t seed,
                                  struct SpeclbSimSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPECLB_H */
