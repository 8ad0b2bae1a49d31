#ifndef PCS_SIM_H
#define PCS_SIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum PcsStatus {
  PCS_STATUS_OK = 0,
  PCS_STATUS_NULL_POINTER = 1,
  PCS_STATUS_INVALID_ARGUMENT = 2,
  PCS_STATUS_INVALID_TRUNCATION = 3,
  PCS_STATUS_NUMERICAL_FAILURE = 4,
  PCS_STATUS_NO_CONVERGENCE = 5,
  PCS_STATUS_EMPTY_SUPPORT = 6,
  PCS_STATUS_ILL_CONDITIONED_RATIO = 7,
  PCS_STATUS_INSUFFICIENT_DATA = 8,
  PCS_STATUS_BUFFER_TOO_SMALL = 9,
  PCS_STATUS_PANIC = 10,
} PcsStatus;

/**
 * Window convention of a two-photon rate.
 */
typedef enum PcsWindow {
  PCS_WINDOW_CONDITIONAL = 0,
  PCS_WINDOW_UNCONDITIONAL = 1,
} PcsWindow;

/**
 * Opaque coupling distribution.
 */
typedef struct PcsDistribution PcsDistribution;

/**
 * Opaque peak-to-valley evaluator at the best two-photon peak.
 */
typedef struct PcsPvr PcsPvr;

/**
 * Physical parameters in units of κ plus truncation orders.
 */
typedef struct PcsParams {
  double g_f;
  double g;
  double kappa;
  double gamma;
  double drive1;
  double drive2;
  double delta_tilde;
  uint32_t n_max;
  uint32_t m_max;
} PcsParams;

/**
 * A predicted three-photon resonance.
 */
typedef struct PcsResonance {
  uint8_t pump_photons;
  uint8_t scan_photons;
  int8_t branch;
  double delta_tilde;
} PcsResonance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none. The
 * string stays valid until the next failing call on the same thread.
 */
const char *pcs_last_error(void);

/**
 * Static description of a status code.
 */
const char *pcs_status_name(enum PcsStatus status);

/**
 * Writes the default parameters: g = g_f = 9, κ = 1, γ = 2,
 * E1 = E2 = 0.5, δ̃ = 0 and the default truncations.
 *
 * # Safety
 * `out` must be null or point to writable memory for one `PcsParams`.
 */
enum PcsStatus pcs_params_default(struct PcsParams *out);

/**
 * Cycle-averaged multi-photon rate of order `ell` at one coupling.
 *
 * # Safety
 * `params` must point to a valid `PcsParams` and `out` to a writable double.
 */
enum PcsStatus pcs_w_multi(const struct PcsParams *params, uint32_t ell, double *out);

/**
 * Background-subtracted multi-photon rate of order `ell`.
 *
 * # Safety
 * `params` must point to a valid `PcsParams` and `out` to a writable double.
 */
enum PcsStatus pcs_difference_rate(const struct PcsParams *params, uint32_t ell, double *out);

/**
 * Windowed two-photon rate for a window of length `tau_w`.
 *
 * # Safety
 * `params` must point to a valid `PcsParams` and `out` to a writable double.
 */
enum PcsStatus pcs_windowed_rate(const struct PcsParams *params,
                                 double tau_w,
                                 enum PcsWindow window,
                                 double *out);

/**
 * Three-photon resonance detunings for couplings `g` and `g_f`.
 *
 * Writes the number of lines to `len` and, if `capacity` suffices, the
 * lines to `lines`. Pass `lines = NULL` to query the length only.
 * `pump_only` may be null.
 *
 * # Safety
 * `lines` must be null or point to `capacity` writable elements; `len`
 * must point to a writable size; `pump_only` must be null or writable.
 */
enum PcsStatus pcs_resonance_lines(double g,
                                   double g_f,
                                   struct PcsResonance *lines,
                                   size_t capacity,
                                   size_t *len,
                                   bool *pump_only);

/**
 * Coupling distribution of the default mask geometry with `g_max`, built
 * from `samples` positions drawn with `seed` and binned into `nodes`.
 *
 * # Safety
 * `out` must point to a writable handle slot.
 */
enum PcsStatus pcs_distribution_mask(double g_max,
                                     uint32_t nodes,
                                     uint64_t samples,
                                     uint64_t seed,
                                     struct PcsDistribution **out);

/**
 * Distribution from `len` nodes and weights; weights must sum to one.
 *
 * # Safety
 * `nodes` and `weights` must point to `len` readable doubles and `out` to
 * a writable handle slot.
 */
enum PcsStatus pcs_distribution_from_nodes(const double *nodes,
                                           const double *weights,
                                           size_t len,
                                           struct PcsDistribution **out);

/**
 * Number of nodes of a distribution.
 *
 * # Safety
 * `dist` must be a live handle and `len` writable.
 */
enum PcsStatus pcs_distribution_len(const struct PcsDistribution *dist, size_t *len);

/**
 * Copies nodes and weights into caller buffers of `capacity` elements.
 *
 * # Safety
 * `dist` must be a live handle; `nodes` and `weights` must point to
 * `capacity` writable doubles.
 */
enum PcsStatus pcs_distribution_get(const struct PcsDistribution *dist,
                                    double *nodes,
                                    double *weights,
                                    size_t capacity);

/**
 * Releases a distribution; null is ignored.
 *
 * # Safety
 * `dist` must be null or a handle not yet freed.
 */
void pcs_distribution_free(struct PcsDistribution *dist);

/**
 * Precomputes the peak-to-valley ratio at δ̃ = 1 + √2 for `params`
 * averaged over `dist`; `params.delta_tilde` and `params.g` are ignored.
 *
 * # Safety
 * `params` and `dist` must be valid and `out` a writable handle slot.
 */
enum PcsStatus pcs_pvr_new(const struct PcsParams *params,
                           const struct PcsDistribution *dist,
                           struct PcsPvr **out);

/**
 * Peak-to-valley ratio for window length `tau_w`.
 *
 * # Safety
 * `pvr` must be a live handle and `out` writable.
 */
enum PcsStatus pcs_pvr_ratio(const struct PcsPvr *pvr,
                             double tau_w,
                             enum PcsWindow window,
                             double *out);

/**
 * Window length maximizing the ratio over κτ_w ∈ [1e−3, 10].
 * `at_boundary` may be null.
 *
 * # Safety
 * `pvr` must be a live handle; `tau_opt` and `pvr_max` writable.
 */
enum PcsStatus pcs_pvr_optimize(const struct PcsPvr *pvr,
                                enum PcsWindow window,
                                double *tau_opt,
                                double *pvr_max,
                                bool *at_boundary);

/**
 * Releases an evaluator; null is ignored.
 *
 * # Safety
 * `pvr` must be null or a handle not yet freed.
 */
void pcs_pvr_free(struct PcsPvr *pvr);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PCS_SIM_H */
