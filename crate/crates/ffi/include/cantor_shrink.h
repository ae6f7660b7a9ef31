#ifndef CANTOR_SHRINK_H
#define CANTOR_SHRINK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Diagnostic attached to a dimension estimate.
typedef enum CsFlag {
  CS_FLAG_NONE = 0,
  CS_FLAG_NO_LIMIT = 1,
  CS_FLAG_DIVERGENT = 2,
} CsFlag;

// Result of every fallible call.
typedef enum CsStatus {
  CS_STATUS_OK = 0,
  CS_STATUS_NULL_POINTER = 1,
  CS_STATUS_INVALID_UTF8 = 2,
  CS_STATUS_PARSE = 3,
  CS_STATUS_INVALID_ARGUMENT = 4,
  CS_STATUS_DOMAIN = 5,
  CS_STATUS_CAP_EXCEEDED = 6,
  CS_STATUS_NOT_Q_ADIC = 7,
  CS_STATUS_PRECONDITION_UNMET = 8,
  CS_STATUS_WRONG_TARGET = 9,
  CS_STATUS_OTHER = 10,
  CS_STATUS_PANIC = 11,
} CsStatus;

// Which role a sequence plays.
typedef enum CsTarget {
  // Integer bases q_n ≥ 2.
  CS_TARGET_BASE = 0,
  // Nonnegative real weights α(n).
  CS_TARGET_WEIGHT = 1,
} CsTarget;

// Three-valued verdict of a hit test.
typedef enum CsVerdict {
  CS_VERDICT_MISS = 0,
  CS_VERDICT_HIT = 1,
  CS_VERDICT_UNCERTAIN = 2,
} CsVerdict;

// A parsed sequence with its cache of partial sums.
typedef struct CsSequence CsSequence;

// A dimension estimate over the window [window_lo, window_hi].
typedef struct CsEstimate {
  double value;
  double residual;
  size_t window_lo;
  size_t window_hi;
  enum CsFlag flag;
} CsEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null if none.
// The pointer stays valid until the next failing call on this thread.
const char *cs_last_error_message(void);

// Releases a string returned by this library. Null is accepted.
//
// # Safety
// `s` is null or a string returned by this library and not yet freed.
void cs_string_free(char *s);

// Parses a sequence such as `periodic:2,3` or `expr:log(n)`.
//
// # Safety
// `text` is a NUL-terminated string; `out` is valid for writes.
enum CsStatus cs_sequence_new(const char *text, enum CsTarget target, struct CsSequence **out);

// Releases a sequence. Null is accepted.
//
// # Safety
// `seq` is null or a handle from [`cs_sequence_new`] not yet freed.
void cs_sequence_free(struct CsSequence *seq);

// Σ_{k≤n} log q_k for a base sequence, Σ_{k≤n} α(k) for a weight sequence.
//
// # Safety
// `seq` is a live handle; `out` is valid for writes.
enum CsStatus cs_sequence_partial_sum(struct CsSequence *seq, size_t n, double *out);

// Windowed limsup of log Q_n / (log Q_n + α(n)) over [⌈window·n_max⌉, n_max].
//
// # Safety
// `q`, `alpha` are distinct live handles; `out` is valid for writes.
enum CsStatus cs_dimension_limsup(struct CsSequence *q,
                                  struct CsSequence *alpha,
                                  size_t n_max,
                                  double window,
                                  struct CsEstimate *out);

// Zero of the windowed pressure, found by bisection to `tol`.
//
// # Safety
// `q`, `alpha` are distinct live handles; `out` is valid for writes.
enum CsStatus cs_bowen_parameter(struct CsSequence *q,
                                 struct CsSequence *alpha,
                                 size_t n_max,
                                 double tol,
                                 double window,
                                 struct CsEstimate *out);

// Decides ‖T_Q^n x‖ ≤ e^{−α(n)} for x given as `p/q` or a decimal.
//
// # Safety
// `q`, `alpha` are distinct live handles; `x` is a NUL-terminated string;
// `out` is valid for writes.
enum CsStatus cs_hit_test(struct CsSequence *q,
                          struct CsSequence *alpha,
                          const char *x,
                          size_t n,
                          uint32_t precision,
                          enum CsVerdict *out);

// T_Q^n x as an exact fraction `p/q`; release with [`cs_string_free`].
//
// # Safety
// `q` is a live handle; `x` is a NUL-terminated string; `out` is valid for
// writes.
enum CsStatus cs_iterate(struct CsSequence *q, const char *x, size_t n, char **out);

// Closed-form dimension of a family such as `periodic:2,3;c=1` or
// `poly:k=1/6;c=1`, evaluated at `precision` bits.
//
// # Safety
// `family` is a NUL-terminated string; `out` is valid for writes.
enum CsStatus cs_family_dimension(const char *family, uint32_t precision, double *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* CANTOR_SHRINK_H */
