//! C ABI for the imaginary-geometry toolkit.
//!
//! All functions return an `ImgeoCode`; out-parameters are written only on
//! `IMGEO_OK`.  Handles are opaque and must be released with the matching
//! `_free` function.  Error details for the current thread are available via
//! `imgeo_last_error`.

use std::cell::RefCell;
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use imgeo::flow::{trace_flow_line, Status, TraceOpts};
use imgeo::gff::{sample_zero_boundary, FieldGrid};
use imgeo::loewner::{
    drive_chordal, drive_radial, drive_wholeplane, loewner_trace, DriverSpec, Kind,
};
use imgeo::params::{critical_angle, derive_constants, max_self_hits};
use imgeo::{Error, Point};

/// Status code returned by every API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImgeoCode {
    ImgeoOk = 0,
    /// A required pointer argument was null.
    ImgeoErrNull = 1,
    /// A parameter was outside its mathematical domain.
    ImgeoErrDomain = 2,
    /// Malformed input (options, buffer sizes, unknown enum values).
    ImgeoErrInput = 3,
    /// The computation lost numerical validity (blowup, coarse step, range).
    ImgeoErrNumerics = 4,
    /// I/O or serialization failure.
    ImgeoErrIo = 5,
    /// Internal fault; the library state is still usable.
    ImgeoErrInternal = 6,
}

use ImgeoCode::*;

/// Derived deterministic constants of the field/curve coupling.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ImgeoConstants {
    pub kappa: f64,
    pub kappa_prime: f64,
    pub lambda: f64,
    pub lambda_prime: f64,
    pub chi: f64,
}

/// Curve variant selector for `imgeo_loewner_trace`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImgeoKind {
    ImgeoChordal = 0,
    ImgeoRadial = 1,
    ImgeoWholePlane = 2,
}

/// Terminal state of a trace.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImgeoTraceStatus {
    /// Loewner traces: ran to the requested horizon.
    ImgeoTraceComplete = 0,
    /// Flow line left the field window.
    ImgeoTraceExited = 1,
    /// Flow line hit the step budget.
    ImgeoTraceMaxSteps = 2,
    /// Flow line merged into another line.
    ImgeoTraceMerged = 3,
}

/// Opaque sampled field handle.
pub struct ImgeoField {
    grid: FieldGrid,
}

/// Opaque planar trace handle (flow line or reconstructed Loewner trace).
pub struct ImgeoTrace {
    points: Vec<Point>,
    times: Vec<f64>,
    status: ImgeoTraceStatus,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn code_of(err: &Error) -> ImgeoCode {
    match err {
        Error::Domain { .. } | Error::InadmissibleWeight { .. } | Error::OutOfDomain { .. } => {
            ImgeoErrDomain
        }
        Error::Instability { .. }
        | Error::Stability(_)
        | Error::Range(_)
        | Error::OrderingFailure { .. } => ImgeoErrNumerics,
        Error::Io(_) | Error::Serde(_) | Error::GridFormat(_) => ImgeoErrIo,
        _ => ImgeoErrInput,
    }
}

fn fail(err: Error) -> ImgeoCode {
    let code = code_of(&err);
    set_error(err.to_string());
    code
}

/// Run `f` with a panic guard; panics become `ImgeoErrInternal`.
fn guarded(f: impl FnOnce() -> ImgeoCode) -> ImgeoCode {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            set_error("internal panic");
            ImgeoErrInternal
        }
    }
}

macro_rules! nonnull {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            set_error(concat!("argument `", stringify!($p), "` is null"));
            return ImgeoErrNull;
        })+
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn imgeo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copy the current thread's last error message into `buf` (NUL-terminated,
/// truncated to `cap`).  Returns the full message length in bytes.
#[no_mangle]
pub unsafe extern "C" fn imgeo_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Compute the derived constants for `kappa` in (0, 4].
#[no_mangle]
pub unsafe extern "C" fn imgeo_constants(kappa: f64, out: *mut ImgeoConstants) -> ImgeoCode {
    guarded(|| {
        nonnull!(out);
        match derive_constants(kappa) {
            Ok(c) => {
                *out = ImgeoConstants {
                    kappa: c.kappa,
                    kappa_prime: c.kappa_prime,
                    lambda: c.lambda,
                    lambda_prime: c.lambda_prime,
                    chi: c.chi,
                };
                ImgeoOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Critical angle-gap above which same-field flow lines can no longer touch.
#[no_mangle]
pub unsafe extern "C" fn imgeo_critical_angle(kappa: f64, out: *mut f64) -> ImgeoCode {
    guarded(|| {
        nonnull!(out);
        match critical_angle(kappa) {
            Ok(v) => {
                *out = v;
                ImgeoOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Upper bound on boundary self-hit multiplicity for the weighted curve.
#[no_mangle]
pub unsafe extern "C" fn imgeo_max_self_hits(kappa: f64, rho: f64, out: *mut u32) -> ImgeoCode {
    guarded(|| {
        nonnull!(out);
        match max_self_hits(kappa, rho) {
            Ok(v) => {
                *out = v;
                ImgeoOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Sample a zero-boundary discrete Gaussian free field on an `n` by `n` grid
/// with the given vertex spacing and seed.
#[no_mangle]
pub unsafe extern "C" fn imgeo_field_sample(
    n: usize,
    spacing: f64,
    seed: u64,
    out: *mut *mut ImgeoField,
) -> ImgeoCode {
    guarded(|| {
        nonnull!(out);
        match sample_zero_boundary(n, spacing, seed) {
            Ok(grid) => {
                *out = Box::into_raw(Box::new(ImgeoField { grid }));
                ImgeoOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Replace a field handle's values by `factor` times themselves, returning a
/// new handle.
#[no_mangle]
pub unsafe extern "C" fn imgeo_field_scaled(
    field: *const ImgeoField,
    factor: f64,
    out: *mut *mut ImgeoField,
) -> ImgeoCode {
    guarded(|| {
        nonnull!(field, out);
        let grid = (*field).grid.scaled(factor);
        *out = Box::into_raw(Box::new(ImgeoField { grid }));
        ImgeoOk
    })
}

/// Evaluate the field at an interior point.
#[no_mangle]
pub unsafe extern "C" fn imgeo_field_eval(
    field: *const ImgeoField,
    x: f64,
    y: f64,
    out: *mut f64,
) -> ImgeoCode {
    guarded(|| {
        nonnull!(field, out);
        match (*field).grid.eval(Point::new(x, y)) {
            Ok(v) => {
                *out = v;
                ImgeoOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Release a field handle.  Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn imgeo_field_free(field: *mut ImgeoField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Trace the angle-`theta` flow line of the field from `(x, y)` with the
/// given arclength step and step budget.
#[no_mangle]
pub unsafe extern "C" fn imgeo_flow_line(
    field: *const ImgeoField,
    kappa: f64,
    x: f64,
    y: f64,
    theta: f64,
    step: f64,
    max_steps: usize,
    out: *mut *mut ImgeoTrace,
) -> ImgeoCode {
    guarded(|| {
        nonnull!(field, out);
        let c = match derive_constants(kappa) {
            Ok(c) => c,
            Err(e) => return fail(e),
        };
        let opts = TraceOpts::new(step, max_steps);
        match trace_flow_line(&(*field).grid, &c, Point::new(x, y), theta, &opts) {
            Ok(line) => {
                let status = match line.status {
                    Status::ExitedWindow => ImgeoTraceStatus::ImgeoTraceExited,
                    Status::Merged { .. } => ImgeoTraceStatus::ImgeoTraceMerged,
                    _ => ImgeoTraceStatus::ImgeoTraceMaxSteps,
                };
                *out = Box::into_raw(Box::new(ImgeoTrace {
                    points: line.points,
                    times: Vec::new(),
                    status,
                }));
                ImgeoOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Simulate the weighted driving SDE and reconstruct the trace, keeping
/// every `stride`-th sample.
#[no_mangle]
pub unsafe extern "C" fn imgeo_loewner_trace(
    kind: ImgeoKind,
    kappa: f64,
    rho: f64,
    dt: f64,
    horizon: f64,
    seed: u64,
    stride: usize,
    out: *mut *mut ImgeoTrace,
) -> ImgeoCode {
    guarded(|| {
        nonnull!(out);
        let kind = match kind {
            ImgeoKind::ImgeoChordal => Kind::Chordal,
            ImgeoKind::ImgeoRadial => Kind::Radial,
            ImgeoKind::ImgeoWholePlane => Kind::WholePlane,
        };
        let spec = DriverSpec::new(kind, kappa, rho, dt, horizon, seed);
        let driver = match kind {
            Kind::Chordal => drive_chordal(&spec),
            Kind::Radial => drive_radial(&spec),
            Kind::WholePlane => drive_wholeplane(&spec),
        };
        let driver = match driver {
            Ok(d) => d,
            Err(e) => return fail(e),
        };
        match loewner_trace(&driver, stride.max(1)) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(ImgeoTrace {
                    points: t.points,
                    times: t.times,
                    status: ImgeoTraceStatus::ImgeoTraceComplete,
                }));
                ImgeoOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of points in a trace.
#[no_mangle]
pub unsafe extern "C" fn imgeo_trace_len(trace: *const ImgeoTrace, out: *mut usize) -> ImgeoCode {
    guarded(|| {
        nonnull!(trace, out);
        *out = (*trace).points.len();
        ImgeoOk
    })
}

/// Terminal status of a trace.
#[no_mangle]
pub unsafe extern "C" fn imgeo_trace_status(
    trace: *const ImgeoTrace,
    out: *mut ImgeoTraceStatus,
) -> ImgeoCode {
    guarded(|| {
        nonnull!(trace, out);
        *out = (*trace).status;
        ImgeoOk
    })
}

/// Copy trace points into `xy` as interleaved x0,y0,x1,y1,...  `cap` is the
/// capacity of `xy` in doubles and must be at least twice the trace length.
#[no_mangle]
pub unsafe extern "C" fn imgeo_trace_points(
    trace: *const ImgeoTrace,
    xy: *mut f64,
    cap: usize,
) -> ImgeoCode {
    guarded(|| {
        nonnull!(trace, xy);
        let pts = &(*trace).points;
        if cap < 2 * pts.len() {
            set_error(format!("buffer holds {cap} doubles, need {}", 2 * pts.len()));
            return ImgeoErrInput;
        }
        for (k, p) in pts.iter().enumerate() {
            *xy.add(2 * k) = p.re;
            *xy.add(2 * k + 1) = p.im;
        }
        ImgeoOk
    })
}

/// Copy trace time labels into `t` (`cap` in doubles).  Flow lines have no
/// time labels; their count is zero.
#[no_mangle]
pub unsafe extern "C" fn imgeo_trace_times(
    trace: *const ImgeoTrace,
    t: *mut f64,
    cap: usize,
) -> ImgeoCode {
    guarded(|| {
        nonnull!(trace, t);
        let times = &(*trace).times;
        if cap < times.len() {
            set_error(format!("buffer holds {cap} doubles, need {}", times.len()));
            return ImgeoErrInput;
        }
        std::ptr::copy_nonoverlapping(times.as_ptr(), t, times.len());
        ImgeoOk
    })
}

/// Release a trace handle.  Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn imgeo_trace_free(trace: *mut ImgeoTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    fn last_error_string() -> String {
        let mut buf = [0i8; 256];
        let n = unsafe { imgeo_last_error(buf.as_mut_ptr(), buf.len()) };
        let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&b| b as u8).collect();
        String::from_utf8(bytes).unwrap()
    }

    #[test]
    fn constants_roundtrip() {
        let mut c = ImgeoConstants {
            kappa: 0.0,
            kappa_prime: 0.0,
            lambda: 0.0,
            lambda_prime: 0.0,
            chi: 0.0,
        };
        assert_eq!(unsafe { imgeo_constants(2.0, &mut c) }, ImgeoOk);
        assert!((c.lambda - std::f64::consts::PI / 2f64.sqrt()).abs() < 1e-12);
        assert!((c.kappa_prime - 8.0).abs() < 1e-12);
    }

    #[test]
    fn domain_errors_reported() {
        let mut c = ImgeoConstants {
            kappa: 0.0,
            kappa_prime: 0.0,
            lambda: 0.0,
            lambda_prime: 0.0,
            chi: 0.0,
        };
        assert_eq!(unsafe { imgeo_constants(-1.0, &mut c) }, ImgeoErrDomain);
        assert!(last_error_string().contains("kappa"));
        assert_eq!(unsafe { imgeo_constants(2.0, ptr::null_mut()) }, ImgeoErrNull);
    }

    #[test]
    fn field_sample_eval_free() {
        let mut f: *mut ImgeoField = ptr::null_mut();
        assert_eq!(unsafe { imgeo_field_sample(16, 0.1, 7, &mut f) }, ImgeoOk);
        let mut v = f64::NAN;
        assert_eq!(unsafe { imgeo_field_eval(f, 0.0, 0.0, &mut v) }, ImgeoOk);
        assert!(v.is_finite());
        let mut out = f64::NAN;
        assert_eq!(
            unsafe { imgeo_field_eval(f, 100.0, 0.0, &mut out) },
            ImgeoErrDomain
        );
        let mut g: *mut ImgeoField = ptr::null_mut();
        assert_eq!(unsafe { imgeo_field_scaled(f, 2.0, &mut g) }, ImgeoOk);
        let mut v2 = f64::NAN;
        assert_eq!(unsafe { imgeo_field_eval(g, 0.0, 0.0, &mut v2) }, ImgeoOk);
        assert!((v2 - 2.0 * v).abs() < 1e-12);
        unsafe {
            imgeo_field_free(f);
            imgeo_field_free(g);
        }
    }

    #[test]
    fn flow_line_end_to_end() {
        let mut f: *mut ImgeoField = ptr::null_mut();
        assert_eq!(unsafe { imgeo_field_sample(32, 0.1, 3, &mut f) }, ImgeoOk);
        let mut t: *mut ImgeoTrace = ptr::null_mut();
        assert_eq!(
            unsafe { imgeo_flow_line(f, 2.0, 0.0, 0.0, 0.0, 0.05, 500, &mut t) },
            ImgeoOk
        );
        let mut n = 0usize;
        assert_eq!(unsafe { imgeo_trace_len(t, &mut n) }, ImgeoOk);
        assert!(n >= 2);
        let mut xy = vec![0.0f64; 2 * n];
        assert_eq!(unsafe { imgeo_trace_points(t, xy.as_mut_ptr(), xy.len()) }, ImgeoOk);
        assert_eq!(xy[0], 0.0);
        assert_eq!(
            unsafe { imgeo_trace_points(t, xy.as_mut_ptr(), 1) },
            ImgeoErrInput
        );
        let mut st = ImgeoTraceStatus::ImgeoTraceComplete;
        assert_eq!(unsafe { imgeo_trace_status(t, &mut st) }, ImgeoOk);
        assert_ne!(st, ImgeoTraceStatus::ImgeoTraceComplete);
        unsafe {
            imgeo_trace_free(t);
            imgeo_field_free(f);
        }
    }

    #[test]
    fn loewner_trace_end_to_end() {
        let mut t: *mut ImgeoTrace = ptr::null_mut();
        assert_eq!(
            unsafe {
                imgeo_loewner_trace(ImgeoKind::ImgeoChordal, 2.0, 0.0, 1e-3, 1.0, 11, 10, &mut t)
            },
            ImgeoOk
        );
        let mut n = 0usize;
        assert_eq!(unsafe { imgeo_trace_len(t, &mut n) }, ImgeoOk);
        assert!(n > 10);
        let mut times = vec![0.0f64; n];
        assert_eq!(unsafe { imgeo_trace_times(t, times.as_mut_ptr(), n) }, ImgeoOk);
        assert!(times.windows(2).all(|w| w[1] > w[0]));
        unsafe { imgeo_trace_free(t) };
        // bad spec surfaces as a numerics/input error, not a crash
        let code = unsafe {
            imgeo_loewner_trace(ImgeoKind::ImgeoChordal, -2.0, 0.0, 1e-3, 1.0, 11, 10, &mut t)
        };
        assert_ne!(code, ImgeoOk);
    }

    #[test]
    fn version_is_nul_terminated() {
        let v = imgeo_version();
        let s = unsafe { std::ffi::CStr::from_ptr(v) }.to_str().unwrap();
        assert!(!s.is_empty());
    }
}
