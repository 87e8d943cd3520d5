/* C interface to the relay incentive simulator. */

#pragma once

/* Generated with cbindgen:0.26.0 */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Drop reasons, mirroring the simulator's counters.
 */
typedef enum FasterDropReason {
  FASTER_DROP_REASON_NO_ROUTE = 0,
  FASTER_DROP_REASON_CANNOT_AFFORD = 1,
  FASTER_DROP_REASON_RELAY_REFUSED = 2,
  FASTER_DROP_REASON_NEGATIVE_PAYOFF = 3,
  FASTER_DROP_REASON_NODE_DIED = 4,
} FasterDropReason;

/**
 * Result code of a C-ABI call.
 */
typedef enum FasterStatus {
  FASTER_STATUS_OK = 0,
  FASTER_STATUS_NULL_ARGUMENT = 1,
  FASTER_STATUS_INVALID_UTF8 = 2,
  FASTER_STATUS_CONFIG_ERROR = 3,
  FASTER_STATUS_RUN_ERROR = 4,
  FASTER_STATUS_IO_ERROR = 5,
  FASTER_STATUS_OUT_OF_RANGE = 6,
} FasterStatus;

/**
 * Opaque simulation configuration handle.
 */
typedef struct FasterConfig FasterConfig;

/**
 * Opaque finished-run handle.
 */
typedef struct FasterResult FasterResult;

/**
 * One time-series record: a node's state at the end of a tick.
 */
typedef struct FasterTimeSeriesRow {
  uint64_t tick;
  uint32_t node_id;
  double battery_j;
  uint64_t richness;
  /**
   * 1 while the node is alive, 0 once its battery is exhausted.
   */
  uint8_t alive;
} FasterTimeSeriesRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len` bytes) and returns the full message
 * length in bytes excluding the terminator. Returns 0 when no error has
 * been recorded. `buf` may be null to query the length.
 *
 * # Safety
 * `buf` must point to at least `len` writable bytes, or be null.
 */
size_t faster_last_error(char *buf, size_t len);

/**
 * A fresh configuration with the reference defaults. Free with
 * [`faster_config_free`].
 */
struct FasterConfig *faster_config_new(void);

/**
 * Loads a `key = value` config file. Returns null and records the error
 * when the file is missing or malformed.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string or null.
 */
struct FasterConfig *faster_config_load(const char *path);

/**
 * Sets one configuration key, using the same grammar as the config file
 * (e.g. `faster_config_set(cfg, "mode", "baseline")`).
 *
 * # Safety
 * `config` must be a live handle; `key`/`value` must be valid C strings.
 */
enum FasterStatus faster_config_set(struct FasterConfig *config,
                                    const char *key,
                                    const char *value);

/**
 * # Safety
 * `config` must be a handle from this library, not yet freed; null is a
 * no-op.
 */
void faster_config_free(struct FasterConfig *config);

/**
 * Runs the configured simulation to completion. Returns null and records
 * the error if the configuration is invalid. Free the result with
 * [`faster_result_free`].
 *
 * # Safety
 * `config` must be a live handle or null.
 */
struct FasterResult *faster_simulate(const struct FasterConfig *config);

/**
 * Runs the simulation and writes the CSV outputs (timeseries, summary,
 * plot matrices, optionally the packet log) into `out_dir`.
 *
 * # Safety
 * `config` must be a live handle; `out_dir` a valid C string.
 */
enum FasterStatus faster_run_experiment(const struct FasterConfig *config,
                                        const char *out_dir,
                                        bool packet_log);

/**
 * # Safety
 * `result` must be a handle from this library, not yet freed; null is a
 * no-op.
 */
void faster_result_free(struct FasterResult *result);

/**
 * Number of time-series rows in the result.
 *
 * # Safety
 * `result` must be a live handle or null.
 */
uint64_t faster_result_rows(const struct FasterResult *result);

/**
 * Copies time-series row `index` into `out`.
 *
 * # Safety
 * `result` must be a live handle; `out` must point to a writable row.
 */
enum FasterStatus faster_result_row(const struct FasterResult *result,
                                    uint64_t index,
                                    struct FasterTimeSeriesRow *out);

/**
 * # Safety
 * `result` must be a live handle or null.
 */
uint64_t faster_result_sent(const struct FasterResult *result);

/**
 * # Safety
 * `result` must be a live handle or null.
 */
uint64_t faster_result_delivered(const struct FasterResult *result);

/**
 * # Safety
 * `result` must be a live handle or null.
 */
uint64_t faster_result_dropped(const struct FasterResult *result);

/**
 * Count of drops with the given reason.
 *
 * # Safety
 * `result` must be a live handle or null.
 */
uint64_t faster_result_drop_count(const struct FasterResult *result, enum FasterDropReason reason);

/**
 * Delivered fraction of send attempts (0 when nothing was sent).
 *
 * # Safety
 * `result` must be a live handle or null.
 */
double faster_result_delivery_rate(const struct FasterResult *result);

/**
 * Population standard deviation of final node richness.
 *
 * # Safety
 * `result` must be a live handle or null.
 */
double faster_result_richness_stddev(const struct FasterResult *result);

/**
 * Mean node lifetime in ticks (survivors count as ticks + 1).
 *
 * # Safety
 * `result` must be a live handle or null.
 */
double faster_result_mean_lifetime(const struct FasterResult *result);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus
