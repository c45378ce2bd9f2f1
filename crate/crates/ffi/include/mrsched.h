#ifndef MRSCHED_H
#define MRSCHED_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MrsStatus {
  MRS_STATUS_OK = 0,
  MRS_STATUS_NULL_POINTER = 1,
  MRS_STATUS_INVALID_ARGUMENT = 2,
  MRS_STATUS_PARSE = 3,
  MRS_STATUS_IO = 4,
  MRS_STATUS_OUT_OF_RANGE = 5,
  MRS_STATUS_PANIC = 6,
} MrsStatus;

/**
 * Opaque set of non-dominated selections.
 */
typedef struct MrsFront MrsFront;

/**
 * Opaque finished simulation.
 */
typedef struct MrsResult MrsResult;

/**
 * Opaque single-window selection problem.
 */
typedef struct MrsWindow MrsWindow;

/**
 * Opaque job trace.
 */
typedef struct MrsWorkload MrsWorkload;

typedef struct MrsSimConfig {
  uint32_t total_nodes;
  uint64_t total_bb_gb;
  uint64_t persistent_bb_gb;
  uint32_t window_size;
  uint32_t starvation_bound;
  /**
   * Nonzero enables EASY backfilling.
   */
  uint8_t backfill;
  uint32_t generations;
  uint32_t population;
  uint64_t seed;
} MrsSimConfig;

typedef struct MrsMetrics {
  double node_usage;
  double bb_usage;
  double avg_wait;
  double avg_slowdown;
  uint64_t rejected;
} MrsMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next call into the library from this thread.
 */
const char *mrs_last_error(void);

/**
 * Fills `cfg` with the library defaults for a machine of the given size.
 *
 * # Safety
 * `cfg` must point to writable memory for one `MrsSimConfig`.
 */
enum MrsStatus mrs_sim_config_default(uint32_t total_nodes,
                                      uint64_t total_bb_gb,
                                      struct MrsSimConfig *cfg);

/**
 * Loads a trace; `.csv` files are read as CSV, anything else as JSONL.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MrsStatus mrs_workload_load(const char *path, struct MrsWorkload **out);

/**
 * Parses a trace held in memory. `format` is `"csv"` or `"jsonl"`.
 *
 * # Safety
 * `text` and `format` must be NUL-terminated strings and `out` valid.
 */
enum MrsStatus mrs_workload_parse(const char *text, const char *format, struct MrsWorkload **out);

/**
 * Number of jobs, or 0 for a null handle.
 *
 * # Safety
 * `wl` must be null or a live handle.
 */
uintptr_t mrs_workload_len(const struct MrsWorkload *wl);

/**
 * # Safety
 * `wl` must be null or a handle not yet freed.
 */
void mrs_workload_free(struct MrsWorkload *wl);

/**
 * Creates an empty window against the given free capacity.
 */
struct MrsWindow *mrs_window_new(uint32_t free_nodes, uint64_t free_bb_gb);

/**
 * Appends a job demand to the window.
 *
 * # Safety
 * `w` must be a live handle.
 */
enum MrsStatus mrs_window_push(struct MrsWindow *w, uint32_t nodes, uint64_t bb_gb);

/**
 * Approximates the window's Pareto set with the genetic solver.
 *
 * # Safety
 * `w` must be a live handle and `out` a valid pointer.
 */
enum MrsStatus mrs_window_solve(const struct MrsWindow *w,
                                uint32_t generations,
                                uint32_t population,
                                uint64_t seed,
                                struct MrsFront **out);

/**
 * # Safety
 * `w` must be null or a handle not yet freed.
 */
void mrs_window_free(struct MrsWindow *w);

/**
 * # Safety
 * `f` must be null or a live handle.
 */
uintptr_t mrs_front_len(const struct MrsFront *f);

/**
 * Reads member `idx`: its objective values and, if `bits` is non-null,
 * its selection as `bits_len` bytes of 0/1.
 *
 * # Safety
 * `f` must be a live handle; `nodes`, `bb_gb` valid pointers; `bits` null
 * or writable for `bits_len` bytes.
 */
enum MrsStatus mrs_front_get(const struct MrsFront *f,
                             uintptr_t idx,
                             int64_t *nodes,
                             int64_t *bb_gb,
                             uint8_t *bits,
                             uintptr_t bits_len);

/**
 * # Safety
 * `f` must be null or a handle not yet freed.
 */
void mrs_front_free(struct MrsFront *f);

/**
 * Simulates `wl` under the named policy (`baseline`, `weighted`,
 * `weighted_cpu`, `weighted_bb`, `constrained_cpu`, `constrained_bb`,
 * `bin_packing` or `bbsched`). Metrics are taken over the whole run.
 *
 * # Safety
 * `wl` and `cfg` must be valid, `policy` NUL-terminated, `out` writable.
 */
enum MrsStatus mrs_simulate(const struct MrsWorkload *wl,
                            const struct MrsSimConfig *cfg,
                            const char *policy,
                            struct MrsResult **out);

/**
 * # Safety
 * `r` must be a live handle and `m` writable.
 */
enum MrsStatus mrs_result_metrics(const struct MrsResult *r, struct MrsMetrics *m);

/**
 * Number of events in the log, or 0 for a null handle.
 *
 * # Safety
 * `r` must be null or a live handle.
 */
uintptr_t mrs_result_event_count(const struct MrsResult *r);

/**
 * Writes the event log as JSON lines.
 *
 * # Safety
 * `r` must be a live handle and `path` NUL-terminated.
 */
enum MrsStatus mrs_result_write_log(const struct MrsResult *r, const char *path);

/**
 * # Safety
 * `r` must be null or a handle not yet freed.
 */
void mrs_result_free(struct MrsResult *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MRSCHED_H */
