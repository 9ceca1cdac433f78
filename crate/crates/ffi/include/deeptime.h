#ifndef DEEPTIME_H
#define DEEPTIME_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DtStatus {
  DT_OK = 0,
  DT_NULL_POINTER = 1,
  DT_INVALID_ARGUMENT = 2,
  DT_SHAPE_MISMATCH = 3,
  DT_IO = 4,
  DT_FORMAT = 5,
  DT_NUMERIC = 6,
  DT_PANIC = 7,
} DtStatus;

// A loaded checkpoint. Opaque to C.
typedef struct DtModel DtModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *dt_version(void);

// Message of the last failed call on this thread, or NULL.
//
// The pointer stays valid until the next call into the library on this thread.
const char *dt_last_error_message(void);

// Loads a checkpoint written by `deeptime train` or `deeptime sweep`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum DtStatus dt_model_load(const char *path, struct DtModel **out);

// Releases a model. NULL is ignored.
//
// # Safety
// `model` must come from [`dt_model_load`] and not be used afterwards.
void dt_model_free(struct DtModel *model);

// Lookback length the model was trained with, or 0 for NULL.
//
// # Safety
// `model` must be NULL or a live handle.
uintptr_t dt_model_lookback(const struct DtModel *model);

// # Safety
// `model` must be NULL or a live handle.
uintptr_t dt_model_horizon(const struct DtModel *model);

// # Safety
// `model` must be NULL or a live handle.
uintptr_t dt_model_channels(const struct DtModel *model);

// Forecasts `horizon` steps from a raw-scale lookback window.
//
// `lookback` is `lookback_rows x channels`; `out` receives `horizon x channels`
// values in raw scale and must hold exactly that many.
//
// # Safety
// Pointers must be valid for the stated sizes.
enum DtStatus dt_model_forecast(const struct DtModel *model,
                                const double *lookback,
                                uintptr_t lookback_rows,
                                uintptr_t channels,
                                uintptr_t horizon,
                                double *out,
                                uintptr_t out_len);

// Closed-form ridge regression with a (penalized) bias row.
//
// Solves for `W` (`(d + 1) x k`, bias last) minimizing
// `||[Z 1] W - Y||^2 + lambda ||W||^2` with `Z` `n x d` and `Y` `n x k`.
//
// # Safety
// Pointers must be valid for the stated sizes.
enum DtStatus dt_ridge_fit(const double *z,
                           uintptr_t n,
                           uintptr_t d,
                           const double *y,
                           uintptr_t k,
                           double lambda,
                           double *out,
                           uintptr_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEEPTIME_H */
