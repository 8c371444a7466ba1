#ifndef IMGEO_H
#define IMGEO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every API call.
 */
typedef enum ImgeoCode {
  ImgeoOk = 0,
  /**
   * A required pointer argument was null.
   */
  ImgeoErrNull = 1,
  /**
   * A parameter was outside its mathematical domain.
   */
  ImgeoErrDomain = 2,
  /**
   * Malformed input (options, buffer sizes, unknown enum values).
   */
  ImgeoErrInput = 3,
  /**
   * The computation lost numerical validity (blowup, coarse step, range).
   */
  ImgeoErrNumerics = 4,
  /**
   * I/O or serialization failure.
   */
  ImgeoErrIo = 5,
  /**
   * Internal fault; the library state is still usable.
   */
  ImgeoErrInternal = 6,
} ImgeoCode;

/**
 * Curve variant selector for `imgeo_loewner_trace`.
 */
typedef enum ImgeoKind {
  ImgeoChordal = 0,
  ImgeoRadial = 1,
  ImgeoWholePlane = 2,
} ImgeoKind;

/**
 * Terminal state of a trace.
 */
typedef enum ImgeoTraceStatus {
  /**
   * Loewner traces: ran to the requested horizon.
   */
  ImgeoTraceComplete = 0,
  /**
   * Flow line left the field window.
   */
  ImgeoTraceExited = 1,
  /**
   * Flow line hit the step budget.
   */
  ImgeoTraceMaxSteps = 2,
  /**
   * Flow line merged into another line.
   */
  ImgeoTraceMerged = 3,
} ImgeoTraceStatus;

/**
 * Opaque sampled field handle.
 */
typedef struct ImgeoField ImgeoField;

/**
 * Opaque planar trace handle (flow line or reconstructed Loewner trace).
 */
typedef struct ImgeoTrace ImgeoTrace;

/**
 * Derived deterministic constants of the field/curve coupling.
 */
typedef struct ImgeoConstants {
  double kappa;
  double kappa_prime;
  double lambda;
  double lambda_prime;
  double chi;
} ImgeoConstants;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *imgeo_version(void);

/**
 * Copy the current thread's last error message into `buf` (NUL-terminated,
 * truncated to `cap`).  Returns the full message length in bytes.
 */
uintptr_t imgeo_last_error(char *buf, uintptr_t cap);

/**
 * Compute the derived constants for `kappa` in (0, 4].
 */
enum ImgeoCode imgeo_constants(double kappa, struct ImgeoConstants *out);

/**
 * Critical angle-gap above which same-field flow lines can no longer touch.
 */
enum ImgeoCode imgeo_critical_angle(double kappa, double *out);

/**
 * Upper bound on boundary self-hit multiplicity for the weighted curve.
 */
enum ImgeoCode imgeo_max_self_hits(double kappa, double rho, uint32_t *out);

/**
 * Sample a zero-boundary discrete Gaussian free field on an `n` by `n` grid
 * with the given vertex spacing and seed.
 */
enum ImgeoCode imgeo_field_sample(uintptr_t n,
                                  double spacing,
                                  uint64_t seed,
                                  struct ImgeoField **out);

/**
 * Replace a field handle's values by `factor` times themselves, returning a
 * new handle.
 */
enum ImgeoCode imgeo_field_scaled(const struct ImgeoField *field,
                                  double factor,
                                  struct ImgeoField **out);

/**
 * Evaluate the field at an interior point.
 */
enum ImgeoCode imgeo_field_eval(const struct ImgeoField *field, double x, double y, double *out);

/**
 * Release a field handle.  Null is a no-op.
 */
void imgeo_field_free(struct ImgeoField *field);

/**
 * Trace the angle-`theta` flow line of the field from `(x, y)` with the
 * given arclength step and step budget.
 */
enum ImgeoCode imgeo_flow_line(const struct ImgeoField *field,
                               double kappa,
                               double x,
                               double y,
                               double theta,
                               double step,
                               uintptr_t max_steps,
                               struct ImgeoTrace **out);

/**
 * Simulate the weighted driving SDE and reconstruct the trace, keeping
 * every `stride`-th sample.
 */
enum ImgeoCode imgeo_loewner_trace(enum ImgeoKind kind,
                                   double kappa,
                                   double rho,
                                   double dt,
                                   double horizon,
                                   uint64_t seed,
                                   uintptr_t stride,
                                   struct ImgeoTrace **out);

/**
 * Number of points in a trace.
 */
enum ImgeoCode imgeo_trace_len(const struct ImgeoTrace *trace, uintptr_t *out);

/**
 * Terminal status of a trace.
 */
enum ImgeoCode imgeo_trace_status(const struct ImgeoTrace *trace, enum ImgeoTraceStatus *out);

/**
 * Copy trace points into `xy` as interleaved x0,y0,x1,y1,...  `cap` is the
 * capacity of `xy` in doubles and must be at least twice the trace length.
 */
enum ImgeoCode imgeo_trace_points(const struct ImgeoTrace *trace, double *xy, uintptr_t cap);

/**
 * Copy trace time labels into `t` (`cap` in doubles).  Flow lines have no
 * time labels; their count is zero.
 */
enum ImgeoCode imgeo_trace_times(const struct ImgeoTrace *trace, double *t, uintptr_t cap);

/**
 * Release a trace handle.  Null is a no-op.
 */
void imgeo_trace_free(struct ImgeoTrace *trace);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* IMGEO_H */
