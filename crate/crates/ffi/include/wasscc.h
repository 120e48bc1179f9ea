#ifndef WASSCC_H
#define WASSCC_H

/* Generated by cbindgen from crates/ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WassccStatus {
  WASSCC_STATUS_OK = 0,
  WASSCC_STATUS_NULL_POINTER = 1,
  WASSCC_STATUS_INVALID_ARGUMENT = 2,
  WASSCC_STATUS_DIMENSION = 3,
  WASSCC_STATUS_NOT_POSITIVE_DEFINITE = 4,
  WASSCC_STATUS_INFEASIBLE = 5,
  WASSCC_STATUS_NO_CONVERGENCE = 6,
  WASSCC_STATUS_NON_CONVEX = 7,
  WASSCC_STATUS_UNREACHABLE = 8,
  WASSCC_STATUS_UNSUPPORTED = 9,
  WASSCC_STATUS_PANIC = 10,
} WassccStatus;

typedef enum WassccMode {
  WASSCC_MODE_PESSIMISTIC = 0,
  WASSCC_MODE_OPTIMISTIC = 1,
} WassccMode;

typedef enum WassccVerdict {
  WASSCC_VERDICT_PASS = 0,
  WASSCC_VERDICT_FAIL = 1,
  WASSCC_VERDICT_INDETERMINATE = 2,
} WassccVerdict;

/**
 * Opaque portfolio instance.
 */
typedef struct WassccPortfolio WassccPortfolio;

/**
 * Opaque production planning instance.
 */
typedef struct WassccProduction WassccProduction;

typedef struct WassccCertificate {
  double statistic;
  double std_error;
  uint64_t n_samples;
  enum WassccVerdict verdict;
  uint64_t seed;
} WassccCertificate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *wasscc_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *wasscc_version(void);

double wasscc_std_cdf(double z);

/**
 * # Safety
 * `out` must be null or point to writable memory for one `double`.
 */
enum WassccStatus wasscc_std_quantile(double p, double *out);

/**
 * # Safety
 * `out` must be null or point to writable memory for one `double`.
 */
enum WassccStatus wasscc_gaussian_cvar(double tail, double *out);

/**
 * SOC coefficient for risk level `eps` and radius `delta`.
 *
 * # Safety
 * `out` must be null or point to writable memory for one `double`.
 */
enum WassccStatus wasscc_coefficient(enum WassccMode m, double eps, double delta, double *out);

/**
 * Radius at which the optimistic coefficient vanishes.
 *
 * # Safety
 * `out` must be null or point to writable memory for one `double`.
 */
enum WassccStatus wasscc_watershed(double eps, double *out);

/**
 * Portfolio over `n` risky assets with mean returns `mean[n]` and
 * covariance `cov[n*n]`, plus a deposit paying `riskless_rate` when
 * `has_deposit` is nonzero.
 *
 * # Safety
 * `mean` and `cov` must point to `n` and `n*n` readable doubles; `out` must
 * be null or writable.
 */
enum WassccStatus wasscc_portfolio_new(size_t n,
                                       const double *mean,
                                       const double *cov,
                                       bool has_deposit,
                                       double riskless_rate,
                                       double target_return,
                                       double eps,
                                       double delta,
                                       struct WassccPortfolio **out);

/**
 * The eleven-asset reference portfolio (deposit plus ten stocks).
 *
 * # Safety
 * `out` must be null or writable.
 */
enum WassccStatus wasscc_portfolio_paper(double eps, double delta, struct WassccPortfolio **out);

/**
 * # Safety
 * `p` must be null or a handle from `wasscc_portfolio_*` not yet freed.
 */
void wasscc_portfolio_free(struct WassccPortfolio *p);

/**
 * Length of an allocation vector, deposit included; 0 for a null handle.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
size_t wasscc_portfolio_n_assets(const struct WassccPortfolio *p);

/**
 * Solve for the return-maximizing allocation; writes `len` weights.
 *
 * # Safety
 * `p` must be a live handle; `alloc` must hold `len` writable doubles and
 * `objective` must be null or writable.
 */
enum WassccStatus wasscc_portfolio_solve(const struct WassccPortfolio *p,
                                         enum WassccMode m,
                                         double *alloc,
                                         size_t len,
                                         double *objective);

/**
 * Sample-based certificate for allocation `x[len]`.
 *
 * # Safety
 * `p` must be a live handle, `x` must hold `len` readable doubles and `out`
 * must be writable.
 */
enum WassccStatus wasscc_portfolio_certify(const struct WassccPortfolio *p,
                                           enum WassccMode m,
                                           const double *x,
                                           size_t len,
                                           uint64_t n_samples,
                                           uint64_t seed,
                                           struct WassccCertificate *out);

/**
 * Production planning instance: coverage `t[m*n]`, costs `cost[n]`,
 * capacity bound `upper`, demand means `mean[m]` and deviations `std[m]`.
 *
 * # Safety
 * Array arguments must hold the stated number of readable doubles; `out`
 * must be null or writable.
 */
enum WassccStatus wasscc_production_new(size_t n,
                                        size_t m,
                                        const double *t,
                                        const double *cost,
                                        double upper,
                                        const double *mean,
                                        const double *std,
                                        double eps,
                                        double delta,
                                        struct WassccProduction **out);

/**
 * Random instance with `n` products and `m` demands.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum WassccStatus wasscc_production_random(uint64_t seed,
                                           size_t n,
                                           size_t m,
                                           double upper,
                                           double eps,
                                           double delta,
                                           struct WassccProduction **out);

/**
 * # Safety
 * `p` must be null or a handle from `wasscc_production_*` not yet freed.
 */
void wasscc_production_free(struct WassccProduction *p);

/**
 * Number of products; 0 for a null handle.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
size_t wasscc_production_n(const struct WassccProduction *p);

/**
 * Largest radius reachable with budget `budget`; the plan is written to
 * `x[len]` when `x` is non-null (left untouched if no plan exists).
 *
 * # Safety
 * `p` must be a live handle, `rho` writable, `x` null or `len` writable
 * doubles.
 */
enum WassccStatus wasscc_production_rho(const struct WassccProduction *p,
                                        double budget,
                                        double *rho,
                                        double *x,
                                        size_t len);

/**
 * Cheapest budget whose radius reaches the instance's `delta`.
 *
 * # Safety
 * `p` must be a live handle, `budget` writable, `x` null or `len` writable
 * doubles.
 */
enum WassccStatus wasscc_production_min_cost(const struct WassccProduction *p,
                                             double *budget,
                                             double *x,
                                             size_t len);

/**
 * Sample-based certificate for plan `x[len]`.
 *
 * # Safety
 * `p` must be a live handle, `x` must hold `len` readable doubles and `out`
 * must be writable.
 */
enum WassccStatus wasscc_production_certify(const struct WassccProduction *p,
                                            enum WassccMode m,
                                            const double *x,
                                            size_t len,
                                            uint64_t n_samples,
                                            uint64_t seed,
                                            struct WassccCertificate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WASSCC_H */
