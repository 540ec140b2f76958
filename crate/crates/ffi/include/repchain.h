/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef REPCHAIN_H
#define REPCHAIN_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum RepchainStatus {
  REPCHAIN_STATUS_OK = 0,
  REPCHAIN_STATUS_INVALID_ARGUMENT = 1,
  REPCHAIN_STATUS_NULL_POINTER = 2,
  REPCHAIN_STATUS_UNSUPPORTED = 3,
  REPCHAIN_STATUS_BUFFER_TOO_SMALL = 4,
  REPCHAIN_STATUS_OUT_OF_RANGE = 5,
  REPCHAIN_STATUS_PANIC = 6,
} RepchainStatus;

/**
 * Monte Carlo campaign result.
 */
typedef struct RepchainCampaign RepchainCampaign;

/**
 * Per-level waiting-time distributions.
 */
typedef struct RepchainDistributions RepchainDistributions;

/**
 * Protocol parameters.
 */
typedef struct RepchainParams RepchainParams;

/**
 * Per-level time-conditioned Werner parameters.
 */
typedef struct RepchainWernerProfile RepchainWernerProfile;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; empty if none. The pointer
 * stays valid until the next failing call on this thread.
 */
const char *repchain_last_error_message(void);

/**
 * New SWAP-ONLY parameters with perfect links and memories and `t_trunc = 1`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum RepchainStatus repchain_params_new(double p_gen,
                                        double p_swap,
                                        uint32_t n,
                                        struct RepchainParams **out);

/**
 * # Safety
 * `params` must come from [`repchain_params_new`] and not be used afterwards.
 */
void repchain_params_free(struct RepchainParams *params);

/**
 * # Safety
 * `params` must be a valid handle.
 */
enum RepchainStatus repchain_params_set_w0(struct RepchainParams *params, double w0);

/**
 * Coherence time; pass `INFINITY` for perfect memories.
 *
 * # Safety
 * `params` must be a valid handle.
 */
enum RepchainStatus repchain_params_set_t_coh(struct RepchainParams *params, double t_coh);

/**
 * # Safety
 * `params` must be a valid handle.
 */
enum RepchainStatus repchain_params_set_distillation(struct RepchainParams *params, uint32_t d);

/**
 * # Safety
 * `params` must be a valid handle.
 */
enum RepchainStatus repchain_params_set_comm_time(struct RepchainParams *params, bool include);

/**
 * # Safety
 * `params` must be a valid handle.
 */
enum RepchainStatus repchain_params_set_t_trunc(struct RepchainParams *params, size_t t_trunc);

/**
 * Truncation time guaranteeing captured mass `coverage`.
 *
 * # Safety
 * `params` must be a valid handle and `out` a valid pointer.
 */
enum RepchainStatus repchain_choose_truncation(const struct RepchainParams *params,
                                               double coverage,
                                               size_t *out);

/**
 * # Safety
 * `params` must be a valid handle; `lower` and `upper` valid pointers.
 */
enum RepchainStatus repchain_mean_bounds(const struct RepchainParams *params,
                                         double *lower,
                                         double *upper);

/**
 * # Safety
 * `params` must be a valid handle and `out` a valid pointer.
 */
enum RepchainStatus repchain_waiting_time(const struct RepchainParams *params,
                                          struct RepchainDistributions **out);

/**
 * # Safety
 * `dists` must be a valid handle or null.
 */
void repchain_distributions_free(struct RepchainDistributions *dists);

/**
 * Number of levels, `n + 1`; zero for a null handle.
 *
 * # Safety
 * `dists` must be a valid handle or null.
 */
size_t repchain_distributions_levels(const struct RepchainDistributions *dists);

/**
 * Length of every per-level array, `t_trunc + 1`; zero for a null handle.
 *
 * # Safety
 * `dists` must be a valid handle or null.
 */
size_t repchain_distributions_len(const struct RepchainDistributions *dists);

/**
 * # Safety
 * `dists` must be a valid handle and `buf` point to `len` writable doubles.
 */
enum RepchainStatus repchain_distributions_pmf(const struct RepchainDistributions *dists,
                                               size_t level,
                                               double *buf,
                                               size_t len);

/**
 * # Safety
 * `dists` must be a valid handle and `buf` point to `len` writable doubles.
 */
enum RepchainStatus repchain_distributions_cdf(const struct RepchainDistributions *dists,
                                               size_t level,
                                               double *buf,
                                               size_t len);

/**
 * # Safety
 * `params` and `dists` must be valid handles and `out` a valid pointer.
 */
enum RepchainStatus repchain_werner_profile(const struct RepchainParams *params,
                                            const struct RepchainDistributions *dists,
                                            struct RepchainWernerProfile **out);

/**
 * # Safety
 * `profile` must be a valid handle or null.
 */
void repchain_werner_profile_free(struct RepchainWernerProfile *profile);

/**
 * Werner parameters of one level; NaN where no link is delivered.
 *
 * # Safety
 * `profile` must be a valid handle and `buf` point to `len` writable doubles.
 */
enum RepchainStatus repchain_werner_profile_level(const struct RepchainWernerProfile *profile,
                                                  size_t level,
                                                  double *buf,
                                                  size_t len);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum RepchainStatus repchain_required_samples(double eps, double z, uint64_t *out);

/**
 * `m` samples with DKW bands at the default confidence parameter.
 *
 * # Safety
 * `params` must be a valid handle and `out` a valid pointer.
 */
enum RepchainStatus repchain_run_campaign(const struct RepchainParams *params,
                                          uint64_t m,
                                          uint64_t seed,
                                          struct RepchainCampaign **out);

/**
 * # Safety
 * `campaign` must be a valid handle or null.
 */
void repchain_campaign_free(struct RepchainCampaign *campaign);

/**
 * Number of samples; zero for a null handle.
 *
 * # Safety
 * `campaign` must be a valid handle or null.
 */
size_t repchain_campaign_len(const struct RepchainCampaign *campaign);

/**
 * Copies the delivery times and Werner parameters of every sample.
 *
 * # Safety
 * `campaign` must be a valid handle; `times` and `werner` must each point to
 * `len` writable elements.
 */
enum RepchainStatus repchain_campaign_samples(const struct RepchainCampaign *campaign,
                                              uint64_t *times,
                                              double *werner,
                                              size_t len);

/**
 * Sample mean and standard error of the delivery time, and the DKW band half-width.
 *
 * # Safety
 * `campaign` must be a valid handle; the outputs valid pointers.
 */
enum RepchainStatus repchain_campaign_summary(const struct RepchainCampaign *campaign,
                                              double *mean_time,
                                              double *standard_error,
                                              double *dkw_eps);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REPCHAIN_H */
