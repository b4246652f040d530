//! C ABI for the ramsim simulator.
//!
//! Every fallible function returns a [`RamsimStatus`]; on failure the message
//! is available from [`ramsim_last_error_message`] on the same thread.
//! Scenarios are opaque handles created by `ramsim_scenario_parse` or
//! `ramsim_scenario_load` and released with `ramsim_scenario_free`.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ramsim::beamline::{bessel_amplitudes, SpatialMode};
use ramsim::commands::{fig2_points, load_scenario, CommandError};
use ramsim::control::run_closed_loop;
use ramsim::detection::{overlap, Aperture};
use ramsim::scenario::{parse_scenario, Scenario};
use ramsim::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RamsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Scenario text or file rejected.
    Config = 3,
    InvalidParameter = 4,
    /// A numerical routine failed (non-convergence, too few samples).
    Numerical = 5,
    BufferTooSmall = 6,
    Io = 7,
    /// Internal panic caught at the boundary.
    Panic = 8,
}

/// Opaque parsed scenario.
pub struct RamsimScenario {
    inner: Scenario,
}

/// Gaussian spatial mode (SI units).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RamsimMode {
    pub w0: f64,
    pub center_x: f64,
    pub tilt: f64,
    pub wavelength: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RamsimApertureKind {
    FullPlane = 0,
    /// Blocks `x < edge_x`.
    HalfPlaneScreen = 1,
    OffsetRect = 2,
}

/// Detector aperture; fields not used by `kind` are ignored.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RamsimAperture {
    pub kind: RamsimApertureKind,
    pub edge_x: f64,
    pub center_x: f64,
    pub center_y: f64,
    pub half_width: f64,
    pub half_height: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RamsimComplex {
    pub re: f64,
    pub im: f64,
}

/// Closed-loop summary. Undefined quantities are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RamsimRejectionReport {
    pub beam1_rejection_db: f64,
    pub beam2_rejection_db: f64,
    pub converged: bool,
    pub settle_time_s: f64,
    pub residual_relative_am: f64,
    pub initial_relative_am: f64,
    pub initial_am_zero: bool,
    pub clamped: bool,
    pub steps: u64,
    pub final_m_i: f64,
    pub final_m_q: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: RamsimStatus, msg: impl Into<String>) -> RamsimStatus {
    set_error(msg);
    status
}

fn status_of(err: &Error) -> RamsimStatus {
    match err {
        Error::Config(_) => RamsimStatus::Config,
        Error::InvalidParameter { .. } | Error::NonFinite(_) | Error::InsufficientOrder { .. } | Error::Overmodulation { .. } => {
            RamsimStatus::InvalidParameter
        }
        Error::QuadratureNotConverged { .. } | Error::InsufficientSamples { .. } | Error::SampleOverflow { .. } => {
            RamsimStatus::Numerical
        }
    }
}

fn from_error(err: Error) -> RamsimStatus {
    fail(status_of(&err), err.to_string())
}

/// Runs `f`, converting panics into [`RamsimStatus::Panic`].
fn guard(f: impl FnOnce() -> RamsimStatus) -> RamsimStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|payload| {
        let msg = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        fail(RamsimStatus::Panic, format!("internal panic: {msg}"))
    })
}

unsafe fn c_str<'a>(p: *const c_char) -> Result<&'a str, RamsimStatus> {
    if p.is_null() {
        return Err(fail(RamsimStatus::NullPointer, "null string pointer"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(RamsimStatus::InvalidUtf8, "string is not valid UTF-8"))
}

unsafe fn scenario_ref<'a>(s: *const RamsimScenario) -> Result<&'a Scenario, RamsimStatus> {
    s.as_ref()
        .map(|s| &s.inner)
        .ok_or_else(|| fail(RamsimStatus::NullPointer, "null scenario handle"))
}

fn mode_of(m: &RamsimMode) -> SpatialMode {
    SpatialMode {
        w0: m.w0,
        center_x: m.center_x,
        tilt: m.tilt,
        wavelength: m.wavelength,
    }
}

fn aperture_of(a: &RamsimAperture) -> Aperture {
    match a.kind {
        RamsimApertureKind::FullPlane => Aperture::FullPlane,
        RamsimApertureKind::HalfPlaneScreen => Aperture::HalfPlaneScreen { edge_x: a.edge_x },
        RamsimApertureKind::OffsetRect => Aperture::OffsetRect {
            center_x: a.center_x,
            center_y: a.center_y,
            half_width: a.half_width,
            half_height: a.half_height,
        },
    }
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ramsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library on this thread.
#[no_mangle]
pub extern "C" fn ramsim_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses scenario text into a new handle stored in `*out`.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ramsim_scenario_parse(text: *const c_char, out: *mut *mut RamsimScenario) -> RamsimStatus {
    guard(|| {
        if out.is_null() {
            return fail(RamsimStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let text = tri!(c_str(text));
        match parse_scenario(text) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RamsimScenario { inner }));
                RamsimStatus::Ok
            }
            Err(e) => fail(RamsimStatus::Config, e.to_string()),
        }
    })
}

/// Reads and parses a scenario file into a new handle stored in `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ramsim_scenario_load(path: *const c_char, out: *mut *mut RamsimScenario) -> RamsimStatus {
    guard(|| {
        if out.is_null() {
            return fail(RamsimStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let path = tri!(c_str(path));
        match load_scenario(Path::new(path)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RamsimScenario { inner }));
                RamsimStatus::Ok
            }
            Err(e @ CommandError::Read { .. }) => fail(RamsimStatus::Io, e.to_string()),
            Err(e) => fail(RamsimStatus::Config, e.to_string()),
        }
    })
}

/// Releases a handle. NULL is ignored.
///
/// # Safety
/// `scenario` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ramsim_scenario_free(scenario: *mut RamsimScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Writes the 16-hex-digit scenario hash plus NUL into `buf` (17 bytes).
///
/// # Safety
/// `buf` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ramsim_scenario_hash(scenario: *const RamsimScenario, buf: *mut c_char, len: usize) -> RamsimStatus {
    guard(|| {
        let s = tri!(scenario_ref(scenario));
        if buf.is_null() {
            return fail(RamsimStatus::NullPointer, "null buffer");
        }
        let hash = s.hash();
        if len < hash.len() + 1 {
            return fail(RamsimStatus::BufferTooSmall, format!("need {} bytes", hash.len() + 1));
        }
        ptr::copy_nonoverlapping(hash.as_ptr().cast(), buf, hash.len());
        *buf.add(hash.len()) = 0;
        RamsimStatus::Ok
    })
}

/// Sideband amplitudes J_n(beta), n = -n_max..=n_max, into `out[0..2 n_max + 1]`.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ramsim_bessel_amplitudes(beta: f64, n_max: usize, out: *mut f64, len: usize) -> RamsimStatus {
    guard(|| {
        if out.is_null() {
            return fail(RamsimStatus::NullPointer, "null output buffer");
        }
        let amps = match bessel_amplitudes(beta, n_max) {
            Ok(a) => a,
            Err(e) => return from_error(e),
        };
        let values = amps.values();
        if len < values.len() {
            return fail(RamsimStatus::BufferTooSmall, format!("need {} values", values.len()));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
        RamsimStatus::Ok
    })
}

/// Aperture-restricted overlap of two modes.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ramsim_overlap(
    a: *const RamsimMode,
    b: *const RamsimMode,
    aperture: *const RamsimAperture,
    out: *mut RamsimComplex,
) -> RamsimStatus {
    guard(|| {
        let (Some(a), Some(b), Some(ap)) = (a.as_ref(), b.as_ref(), aperture.as_ref()) else {
            return fail(RamsimStatus::NullPointer, "null argument");
        };
        if out.is_null() {
            return fail(RamsimStatus::NullPointer, "null output pointer");
        }
        match overlap(&mode_of(a), &mode_of(b), &aperture_of(ap)) {
            Ok(z) => {
                *out = RamsimComplex { re: z.re, im: z.im };
                RamsimStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Occultation curve over the scenario's configured grid. Writes up to
/// `len` points and the point count to `*written`.
///
/// # Safety
/// `x_over_w0` and `normalized_ifm` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ramsim_fig2_scan(
    scenario: *const RamsimScenario,
    x_over_w0: *mut f64,
    normalized_ifm: *mut f64,
    len: usize,
    written: *mut usize,
) -> RamsimStatus {
    guard(|| {
        let s = tri!(scenario_ref(scenario));
        if x_over_w0.is_null() || normalized_ifm.is_null() || written.is_null() {
            return fail(RamsimStatus::NullPointer, "null output pointer");
        }
        *written = 0;
        let points = match fig2_points(s) {
            Ok(p) => p,
            Err(e) => return from_error(e),
        };
        if len < points.len() {
            return fail(RamsimStatus::BufferTooSmall, format!("need {} points", points.len()));
        }
        for (i, p) in points.iter().enumerate() {
            *x_over_w0.add(i) = p.x_over_w0;
            *normalized_ifm.add(i) = p.normalized_ifm;
        }
        *written = points.len();
        RamsimStatus::Ok
    })
}

/// Closed loop for `steps` control steps (0: the scenario's own count).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ramsim_run_closed_loop(
    scenario: *const RamsimScenario,
    steps: u64,
    out: *mut RamsimRejectionReport,
) -> RamsimStatus {
    guard(|| {
        let s = tri!(scenario_ref(scenario));
        if out.is_null() {
            return fail(RamsimStatus::NullPointer, "null output pointer");
        }
        let steps = if steps == 0 { s.controller.steps } else { steps as usize };
        let r = match run_closed_loop(s, steps) {
            Ok(run) => run.report,
            Err(e) => return from_error(e),
        };
        *out = RamsimRejectionReport {
            beam1_rejection_db: r.beam1_rejection_db.unwrap_or(f64::NAN),
            beam2_rejection_db: r.beam2_rejection_db.unwrap_or(f64::NAN),
            converged: r.converged,
            settle_time_s: r.settle_time_s.unwrap_or(f64::NAN),
            residual_relative_am: r.residual_relative_am,
            initial_relative_am: r.initial_relative_am,
            initial_am_zero: r.initial_am_zero,
            clamped: r.clamped,
            steps: r.steps as u64,
            final_m_i: r.final_m_i,
            final_m_q: r.final_m_q,
        };
        RamsimStatus::Ok
    })
}
