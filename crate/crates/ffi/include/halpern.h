#ifndef HALPERN_H
#define HALPERN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HalpernStatus {
  HALPERN_STATUS_OK = 0,
  HALPERN_STATUS_NULL_POINTER = 1,
  HALPERN_STATUS_INVALID_UTF8 = 2,
  HALPERN_STATUS_PARSE = 3,
  HALPERN_STATUS_INVALID_PARAMETER = 4,
  HALPERN_STATUS_NUMERIC = 5,
  HALPERN_STATUS_MODULUS_REQUIRED = 6,
  HALPERN_STATUS_BUDGET = 7,
  HALPERN_STATUS_OUT_OF_RANGE = 8,
  HALPERN_STATUS_PANIC = 9,
} HalpernStatus;

typedef enum HalpernCertificate {
  HALPERN_CERTIFICATE_PSI = 0,
  HALPERN_CERTIFICATE_PSI_CLOSED = 1,
  HALPERN_CERTIFICATE_PHI = 2,
  HALPERN_CERTIFICATE_K = 3,
  HALPERN_CERTIFICATE_SIGMA = 4,
} HalpernCertificate;

/**
 * A parsed experiment config.
 */
typedef struct HalpernConfig HalpernConfig;

/**
 * An exact certificate or a budget-exhausted lower bound.
 */
typedef struct HalpernRate HalpernRate;

/**
 * A computed Halpern orbit.
 */
typedef struct HalpernTrace HalpernTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the next failing call.
 */
const char *halpern_last_error(void);

/**
 * Library version as a static string.
 */
const char *halpern_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library that has not been freed.
 */
void halpern_string_free(char *s);

/**
 * Parses config text (the same format the command-line tool reads).
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum HalpernStatus halpern_config_parse(const char *text, struct HalpernConfig **out);

/**
 * # Safety
 * `cfg` must be null or a handle from [`halpern_config_parse`] that has not been freed.
 */
void halpern_config_free(struct HalpernConfig *cfg);

/**
 * Number of instances in the config, or 0 for a null handle.
 *
 * # Safety
 * `cfg` must be null or a live config handle.
 */
size_t halpern_config_instance_count(const struct HalpernConfig *cfg);

/**
 * Runs `steps` Halpern steps for instance `index` of the config.
 *
 * # Safety
 * `cfg` must be a live config handle; `out` must be writable.
 */
enum HalpernStatus halpern_orbit_run(const struct HalpernConfig *cfg,
                                     size_t index,
                                     uint64_t steps,
                                     struct HalpernTrace **out);

/**
 * # Safety
 * `trace` must be null or a handle from [`halpern_orbit_run`] that has not been freed.
 */
void halpern_trace_free(struct HalpernTrace *trace);

/**
 * Number of stored points, or 0 for a null handle.
 *
 * # Safety
 * `trace` must be null or a live trace handle.
 */
size_t halpern_trace_len(const struct HalpernTrace *trace);

/**
 * Index of the first stored point.
 *
 * # Safety
 * `trace` must be null or a live trace handle.
 */
uint64_t halpern_trace_start_index(const struct HalpernTrace *trace);

/**
 * Dimension of the stored points.
 *
 * # Safety
 * `trace` must be null or a live trace handle.
 */
size_t halpern_trace_dim(const struct HalpernTrace *trace);

/**
 * Residual ‖x_n − S x_n‖ at absolute index `n`.
 *
 * # Safety
 * `trace` must be a live trace handle; `out` must be writable.
 */
enum HalpernStatus halpern_trace_residual(const struct HalpernTrace *trace,
                                          uint64_t n,
                                          double *out);

/**
 * Copies x_n into `buf`, which must hold `len` ≥ dimension doubles.
 *
 * # Safety
 * `trace` must be a live trace handle; `buf` must point to `len` writable doubles.
 */
enum HalpernStatus halpern_trace_point(const struct HalpernTrace *trace,
                                       uint64_t n,
                                       double *buf,
                                       size_t len);

/**
 * Computes a rate certificate. `eps` and `m` are rationals written `p/q`; `schedule` and
 * `g` use the config syntax (`g` may be null for the identity). A zero `max_steps` or
 * `max_bits` selects the default budget. `sigma` uses the identity modulus.
 *
 * # Safety
 * String arguments must be NUL-terminated (or null where allowed); `out` must be writable.
 */
enum HalpernStatus halpern_rate(enum HalpernCertificate which,
                                const char *eps,
                                const char *m,
                                const char *schedule,
                                const char *g,
                                uint64_t max_steps,
                                uint64_t max_bits,
                                struct HalpernRate **out);

/**
 * # Safety
 * `rate` must be null or a handle from [`halpern_rate`] that has not been freed.
 */
void halpern_rate_free(struct HalpernRate *rate);

/**
 * Whether the certificate is exact (false for null).
 *
 * # Safety
 * `rate` must be null or a live rate handle.
 */
bool halpern_rate_is_exact(const struct HalpernRate *rate);

/**
 * The exact value or the lower bound, in decimal. Free with [`halpern_string_free`].
 *
 * # Safety
 * `rate` must be null or a live rate handle.
 */
char *halpern_rate_value(const struct HalpernRate *rate);

/**
 * The certificate as the command-line tool prints it. Free with [`halpern_string_free`].
 *
 * # Safety
 * `rate` must be null or a live rate handle.
 */
char *halpern_rate_display(const struct HalpernRate *rate);

/**
 * Runs the verification suite and returns the JSON report through `report` (free with
 * [`halpern_string_free`]). `failures` receives the number of checks that failed or errored.
 *
 * # Safety
 * `cfg` must be a live config handle; `report` and `failures` must be writable.
 */
enum HalpernStatus halpern_verify(const struct HalpernConfig *cfg, char **report, size_t *failures);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HALPERN_H */
