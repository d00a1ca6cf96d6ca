#ifndef SICFLOW_H
#define SICFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum SicflowStatus {
  SICFLOW_STATUS_OK = 0,
  SICFLOW_STATUS_NULL_POINTER = 1,
  SICFLOW_STATUS_INVALID_ARGUMENT = 2,
  SICFLOW_STATUS_PARSE = 3,
  SICFLOW_STATUS_VALIDATION = 4,
  SICFLOW_STATUS_NUMERIC = 5,
  SICFLOW_STATUS_IO = 6,
  SICFLOW_STATUS_PANIC = 7,
} SicflowStatus;

typedef enum SicflowPolicy {
  SICFLOW_POLICY_IAN = 0,
  SICFLOW_POLICY_SIC_R = 1,
  SICFLOW_POLICY_SIC_RD = 2,
} SicflowPolicy;

typedef enum SicflowScheme {
  SICFLOW_SCHEME_TOFRA = 0,
  SICFLOW_SCHEME_FMP = 1,
  SICFLOW_SCHEME_BP_E2E = 2,
  SICFLOW_SCHEME_BP_WB = 3,
} SicflowScheme;

/**
 * Opaque scenario handle.
 */
typedef struct SicflowScenario SicflowScenario;

typedef struct SicflowTransmitter {
  double power;
  double sinr_threshold;
  double x;
  double y;
} SicflowTransmitter;

typedef struct SicflowChannel {
  double path_loss_exponent;
  double noise_power;
} SicflowChannel;

/**
 * Aggregate results of one simulation run.
 */
typedef struct SicflowSimSummary {
  double aat;
  uint64_t injected;
  uint64_t delivered;
  uint64_t dropped;
} SicflowSimSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; empty if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *sicflow_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sicflow_version(void);

/**
 * Creates builtin topology `index` (1 to 3) with every node at threshold
 * `gamma`. `policy` is a `SicflowPolicy` value.
 *
 * # Safety
 * `out` must be null or valid for writing a pointer.
 */
enum SicflowStatus sicflow_scenario_builtin(uint8_t index,
                                            double gamma,
                                            uint32_t policy,
                                            struct SicflowScenario **out_scenario);

/**
 * Parses a scenario from NUL-terminated TOML text.
 *
 * # Safety
 * `toml` must be null or a valid C string; `out_scenario` must be null or
 * valid for writing a pointer.
 */
enum SicflowStatus sicflow_scenario_from_toml(const char *toml,
                                              struct SicflowScenario **out_scenario);

/**
 * Releases a scenario. Null is ignored.
 *
 * # Safety
 * `scenario` must be null or a handle from this library not yet freed.
 */
void sicflow_scenario_free(struct SicflowScenario *scenario);

/**
 * Number of flows (paths) in the scenario.
 *
 * # Safety
 * Pointers must be null or valid.
 */
enum SicflowStatus sicflow_scenario_flow_count(const struct SicflowScenario *scenario,
                                               size_t *out_count);

/**
 * Interference-free success probability of `tx` at receiver `(rx_x, rx_y)`.
 *
 * # Safety
 * Pointers must be null or valid.
 */
enum SicflowStatus sicflow_success_prob_solo(const struct SicflowTransmitter *tx,
                                             double rx_x,
                                             double rx_y,
                                             const struct SicflowChannel *ch,
                                             double *out_prob);

/**
 * Success probability with one interferer treated as noise.
 *
 * # Safety
 * Pointers must be null or valid.
 */
enum SicflowStatus sicflow_success_prob_ian(const struct SicflowTransmitter *tx,
                                            const struct SicflowTransmitter *interferer,
                                            double rx_x,
                                            double rx_y,
                                            const struct SicflowChannel *ch,
                                            double *out_prob);

/**
 * Success probability when the receiver first cancels `interferer`.
 *
 * # Safety
 * Pointers must be null or valid.
 */
enum SicflowStatus sicflow_success_prob_sic(const struct SicflowTransmitter *tx,
                                            const struct SicflowTransmitter *interferer,
                                            double rx_x,
                                            double rx_y,
                                            const struct SicflowChannel *ch,
                                            double *out_prob);

/**
 * Predicted throughput of link `from -> to` (node indices).
 *
 * # Safety
 * `rates` must point to `n_rates` values; other pointers null or valid.
 */
enum SicflowStatus sicflow_link_throughput(const struct SicflowScenario *scenario,
                                           const double *rates,
                                           size_t n_rates,
                                           size_t from,
                                           size_t to,
                                           double *out_throughput);

/**
 * Predicted aggregate throughput of the given source rates.
 *
 * # Safety
 * `rates` must point to `n_rates` values; other pointers null or valid.
 */
enum SicflowStatus sicflow_aggregate_throughput(const struct SicflowScenario *scenario,
                                                const double *rates,
                                                size_t n_rates,
                                                double *out_aat);

/**
 * Runs an allocation scheme (a `SicflowScheme` value). `out_rates` receives one rate per flow and
 * must hold `n_rates` = flow count entries.
 *
 * # Safety
 * `out_rates` must be valid for `n_rates` writes; other pointers null or
 * valid.
 */
enum SicflowStatus sicflow_optimize(const struct SicflowScenario *scenario,
                                    uint32_t scheme,
                                    uint64_t seed,
                                    double *out_rates,
                                    size_t n_rates,
                                    double *out_aat);

/**
 * Simulates `n_slots` slots. A negative `max_retransmits` retries forever.
 *
 * # Safety
 * `rates` must point to `n_rates` values; other pointers null or valid.
 */
enum SicflowStatus sicflow_simulate(const struct SicflowScenario *scenario,
                                    const double *rates,
                                    size_t n_rates,
                                    uint64_t n_slots,
                                    int32_t max_retransmits,
                                    uint64_t seed,
                                    struct SicflowSimSummary *out_summary);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SICFLOW_H */
