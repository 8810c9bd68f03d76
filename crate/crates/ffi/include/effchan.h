#ifndef EFFCHAN_H
#define EFFCHAN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EffchanStatus {
  EFFCHAN_STATUS_OK = 0,
  EFFCHAN_STATUS_NULL_POINTER = 1,
  EFFCHAN_STATUS_INVALID_ARGUMENT = 2,
  EFFCHAN_STATUS_UNKNOWN_PROTOCOL = 3,
  EFFCHAN_STATUS_NUMERICAL = 4,
  EFFCHAN_STATUS_PANIC = 5,
} EffchanStatus;

typedef enum EffchanBound {
  /**
   * The protocol's registered default.
   */
  EFFCHAN_BOUND_DEFAULT = 0,
  EFFCHAN_BOUND_HASHING = 1,
  EFFCHAN_BOUND_CSS = 2,
} EffchanBound;

typedef enum EffchanCoefficient {
  EFFCHAN_COEFFICIENT_REGISTERED = 0,
  EFFCHAN_COEFFICIENT_COMPUTED = 1,
} EffchanCoefficient;

/**
 * Opaque analysis of one registered protocol.
 */
typedef struct EffchanAnalysis EffchanAnalysis;

typedef struct EffchanInspect {
  size_t n;
  size_t d;
  size_t r;
  size_t group_order;
  size_t aut_order;
  size_t t_size;
  size_t orbit_count;
  size_t key_orbit_count;
  size_t fixed_space_dim;
} EffchanInspect;

typedef struct EffchanThreshold {
  /**
   * 1 for hashing, 2 for css.
   */
  int32_t bound;
  double epsilon_star;
  double p_star;
  double fidelity_star;
  /**
   * Zero when the bound does not use one.
   */
  double css_coefficient;
  size_t binding_orbit;
} EffchanThreshold;

typedef struct EffchanSimStats {
  uint64_t rounds;
  uint64_t key_length;
  uint64_t mismatches;
  double epsilon;
  double epsilon_stderr;
  double success_probability;
  double analytic_epsilon;
} EffchanSimStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds the analysis of a registered protocol.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer. The handle written
 * to `out` must be released with [`effchan_analysis_free`].
 */
enum EffchanStatus effchan_analysis_open(const char *name, struct EffchanAnalysis **out);

/**
 * # Safety
 * `handle` must come from [`effchan_analysis_open`] and not be used afterwards. Null is
 * ignored.
 */
void effchan_analysis_free(struct EffchanAnalysis *handle);

/**
 * # Safety
 * `handle` and `out` must be valid pointers.
 */
enum EffchanStatus effchan_analysis_inspect(const struct EffchanAnalysis *handle,
                                            struct EffchanInspect *out);

/**
 * # Safety
 * `handle` and `out` must be valid pointers.
 */
enum EffchanStatus effchan_analysis_threshold(const struct EffchanAnalysis *handle,
                                              enum EffchanBound bound,
                                              enum EffchanCoefficient coefficient,
                                              struct EffchanThreshold *out);

/**
 * Monte Carlo run under depolarizing noise with parameter `p`.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EffchanStatus effchan_simulate(const char *name,
                                    double p,
                                    uint64_t rounds,
                                    uint64_t seed,
                                    bool shuffle,
                                    struct EffchanSimStats *out);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to fit) and returns the full message length without the terminator.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t effchan_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *effchan_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EFFCHAN_H */
