//! C ABI over the deeptime forecaster.
//!
//! Every fallible call returns a [`DtStatus`]; on failure the message is
//! available from [`dt_last_error_message`] on the same thread. Buffers are
//! row-major `double` arrays owned by the caller.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use deeptime::checkpoint::Checkpoint;
use deeptime::forecaster::{forecast_many, Task};
use deeptime::numkit::{ridge_fit, Matrix};
use deeptime::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DtStatus {
    DtOk = 0,
    DtNullPointer = 1,
    DtInvalidArgument = 2,
    DtShapeMismatch = 3,
    DtIo = 4,
    DtFormat = 5,
    DtNumeric = 6,
    DtPanic = 7,
}

/// A loaded checkpoint. Opaque to C.
pub struct DtModel {
    ck: Checkpoint,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(text).expect("nul bytes removed")));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> DtStatus {
    match err {
        Error::InvalidConfig(_) | Error::SplitTooSmall(_) => DtStatus::DtInvalidArgument,
        Error::ShapeMismatch(_) => DtStatus::DtShapeMismatch,
        Error::Io { .. } | Error::EmptyFile(_) => DtStatus::DtIo,
        Error::Format { .. } | Error::Parse { .. } => DtStatus::DtFormat,
        Error::NotPositiveDefinite { .. } | Error::Degenerate(_) | Error::NonFinite(_) | Error::NonFiniteGradient(_) => {
            DtStatus::DtNumeric
        }
    }
}

fn fail(status: DtStatus, msg: impl Into<String>) -> DtStatus {
    set_error(msg);
    status
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), DtStatus>) -> DtStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DtStatus::DtOk,
        Ok(Err(status)) => status,
        Err(_) => fail(DtStatus::DtPanic, "internal panic"),
    }
}

fn lift<T>(r: deeptime::Result<T>) -> Result<T, DtStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

/// Copies `rows * cols` doubles from a caller buffer.
unsafe fn read_matrix(ptr: *const f64, rows: usize, cols: usize, what: &str) -> Result<Matrix, DtStatus> {
    if ptr.is_null() {
        return Err(fail(DtStatus::DtNullPointer, format!("{what} is null")));
    }
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| fail(DtStatus::DtInvalidArgument, format!("{what} size overflows")))?;
    let data = std::slice::from_raw_parts(ptr, len).to_vec();
    lift(Matrix::from_vec(rows, cols, data))
}

unsafe fn write_out(out: *mut f64, out_len: usize, m: &Matrix) -> Result<(), DtStatus> {
    if out.is_null() {
        return Err(fail(DtStatus::DtNullPointer, "output buffer is null"));
    }
    let src = m.as_slice();
    if out_len != src.len() {
        return Err(fail(
            DtStatus::DtShapeMismatch,
            format!("output buffer holds {out_len} values, result has {}", src.len()),
        ));
    }
    std::slice::from_raw_parts_mut(out, out_len).copy_from_slice(src);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL.
///
/// The pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn dt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Loads a checkpoint written by `deeptime train` or `deeptime sweep`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dt_model_load(path: *const c_char, out: *mut *mut DtModel) -> DtStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return Err(fail(DtStatus::DtNullPointer, "path and out must be non-null"));
        }
        *out = std::ptr::null_mut();
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| fail(DtStatus::DtInvalidArgument, "path is not UTF-8"))?;
        let ck = lift(Checkpoint::load(Path::new(path)))?;
        *out = Box::into_raw(Box::new(DtModel { ck }));
        Ok(())
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `model` must come from [`dt_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dt_model_free(model: *mut DtModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Lookback length the model was trained with, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dt_model_lookback(model: *const DtModel) -> usize {
    model.as_ref().map_or(0, |m| m.ck.lookback)
}

/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dt_model_horizon(model: *const DtModel) -> usize {
    model.as_ref().map_or(0, |m| m.ck.horizon)
}

/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dt_model_channels(model: *const DtModel) -> usize {
    model.as_ref().map_or(0, |m| m.ck.normalization.mean.len())
}

/// Forecasts `horizon` steps from a raw-scale lookback window.
///
/// `lookback` is `lookback_rows x channels`; `out` receives `horizon x channels`
/// values in raw scale and must hold exactly that many.
///
/// # Safety
/// Pointers must be valid for the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn dt_model_forecast(
    model: *const DtModel,
    lookback: *const f64,
    lookback_rows: usize,
    channels: usize,
    horizon: usize,
    out: *mut f64,
    out_len: usize,
) -> DtStatus {
    guard(|| {
        let m = model
            .as_ref()
            .ok_or_else(|| fail(DtStatus::DtNullPointer, "model is null"))?;
        if m.ck.datetime_features.is_some() {
            return Err(fail(
                DtStatus::DtInvalidArgument,
                "model uses calendar features, which this call cannot supply",
            ));
        }
        if lookback_rows == 0 || horizon == 0 {
            return Err(fail(DtStatus::DtInvalidArgument, "lookback_rows and horizon must be >= 1"));
        }
        if channels != m.ck.normalization.mean.len() {
            return Err(fail(
                DtStatus::DtShapeMismatch,
                format!("model has {} channels, got {channels}", m.ck.normalization.mean.len()),
            ));
        }
        let raw = read_matrix(lookback, lookback_rows, channels, "lookback")?;
        let norm = &m.ck.normalization;
        let task = lift(Task::new(norm.apply_values(&raw), Matrix::zeros(horizon, channels), lookback_rows))?;
        let pred = lift(forecast_many(&m.ck.model, std::slice::from_ref(&task)))?;
        write_out(out, out_len, &norm.invert_values(&pred[0]))
    })
}

/// Closed-form ridge regression with a (penalized) bias row.
///
/// Solves for `W` (`(d + 1) x k`, bias last) minimizing
/// `||[Z 1] W - Y||^2 + lambda ||W||^2` with `Z` `n x d` and `Y` `n x k`.
///
/// # Safety
/// Pointers must be valid for the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn dt_ridge_fit(
    z: *const f64,
    n: usize,
    d: usize,
    y: *const f64,
    k: usize,
    lambda: f64,
    out: *mut f64,
    out_len: usize,
) -> DtStatus {
    guard(|| {
        if n == 0 || d == 0 || k == 0 {
            return Err(fail(DtStatus::DtInvalidArgument, "n, d and k must be >= 1"));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(fail(DtStatus::DtInvalidArgument, "lambda must be positive and finite"));
        }
        let zm = read_matrix(z, n, d, "z")?;
        let ym = read_matrix(y, n, k, "y")?;
        let sol = lift(ridge_fit(&zm, &ym, lambda, true))?;
        write_out(out, out_len, &sol.weights)
    })
}
