//! C ABI over the `halpern` crate.
//!
//! Every fallible function returns a [`HalpernStatus`]; on failure the message is available
//! from [`halpern_last_error`] on the same thread. Objects cross the boundary as opaque
//! handles that must be released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use halpern::cli::config::{parse_config, ExperimentConfig};
use halpern::cli::{certificate, verify_all, RateQuery, Which};
use halpern::iteration::halpern_orbit;
use halpern::numeric::parse_rational;
use halpern::rates::{Budget, RateResult};
use halpern::schedules::parse_schedule;
use halpern::spaces::Modulus;
use halpern::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalpernStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidParameter = 4,
    Numeric = 5,
    ModulusRequired = 6,
    Budget = 7,
    OutOfRange = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalpernCertificate {
    Psi = 0,
    PsiClosed = 1,
    Phi = 2,
    K = 3,
    Sigma = 4,
}

/// A parsed experiment config.
pub struct HalpernConfig(ExperimentConfig);

/// A computed Halpern orbit.
pub struct HalpernTrace(halpern::iteration::HalpernTrace);

/// An exact certificate or a budget-exhausted lower bound.
pub struct HalpernRate(RateResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(e: &Error) -> HalpernStatus {
    match e {
        Error::Parse(_) => HalpernStatus::Parse,
        Error::InvalidParameter(_)
        | Error::DimensionMismatch { .. }
        | Error::UnknownFixedPoint
        | Error::BelowStartIndex { .. }
        | Error::InstanceBound(_) => HalpernStatus::InvalidParameter,
        Error::ModulusRequired => HalpernStatus::ModulusRequired,
        Error::Budget(_) => HalpernStatus::Budget,
        Error::IndexOutOfRange(_) | Error::BeyondTable(_) | Error::TraceTooShort => HalpernStatus::OutOfRange,
        _ => HalpernStatus::Numeric,
    }
}

struct Failure(HalpernStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HalpernStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HalpernStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HalpernStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(HalpernStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(HalpernStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(HalpernStatus::NullPointer, format!("{what} is null")))
}

fn out_ptr<T>(p: *mut T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(HalpernStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread, or null. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn halpern_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn halpern_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn halpern_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses config text (the same format the command-line tool reads).
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn halpern_config_parse(text: *const c_char, out: *mut *mut HalpernConfig) -> HalpernStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let cfg = parse_config(read_str(text, "text")?)?;
        *out = Box::into_raw(Box::new(HalpernConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle from [`halpern_config_parse`] that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn halpern_config_free(cfg: *mut HalpernConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Number of instances in the config, or 0 for a null handle.
///
/// # Safety
/// `cfg` must be null or a live config handle.
#[no_mangle]
pub unsafe extern "C" fn halpern_config_instance_count(cfg: *const HalpernConfig) -> usize {
    cfg.as_ref().map_or(0, |c| c.0.instances.len())
}

/// Runs `steps` Halpern steps for instance `index` of the config.
///
/// # Safety
/// `cfg` must be a live config handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn halpern_orbit_run(
    cfg: *const HalpernConfig,
    index: usize,
    steps: u64,
    out: *mut *mut HalpernTrace,
) -> HalpernStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let cfg = &handle(cfg, "config")?.0;
        let inst = cfg
            .instances
            .get(index)
            .ok_or_else(|| Failure(HalpernStatus::OutOfRange, format!("no instance {index}")))?;
        let trace = halpern_orbit(&inst.op, &inst.space, &inst.schedule, &inst.u, &inst.x0, steps)?;
        *out = Box::into_raw(Box::new(HalpernTrace(trace)));
        Ok(())
    })
}

/// # Safety
/// `trace` must be null or a handle from [`halpern_orbit_run`] that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn halpern_trace_free(trace: *mut HalpernTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of stored points, or 0 for a null handle.
///
/// # Safety
/// `trace` must be null or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn halpern_trace_len(trace: *const HalpernTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.len())
}

/// Index of the first stored point.
///
/// # Safety
/// `trace` must be null or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn halpern_trace_start_index(trace: *const HalpernTrace) -> u64 {
    trace.as_ref().map_or(0, |t| t.0.start_index)
}

/// Dimension of the stored points.
///
/// # Safety
/// `trace` must be null or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn halpern_trace_dim(trace: *const HalpernTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.x0().dim())
}

/// Residual ‖x_n − S x_n‖ at absolute index `n`.
///
/// # Safety
/// `trace` must be a live trace handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn halpern_trace_residual(trace: *const HalpernTrace, n: u64, out: *mut f64) -> HalpernStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let t = &handle(trace, "trace")?.0;
        *out = t.residual(n).ok_or_else(|| Failure(HalpernStatus::OutOfRange, format!("no point {n}")))?;
        Ok(())
    })
}

/// Copies x_n into `buf`, which must hold `len` ≥ dimension doubles.
///
/// # Safety
/// `trace` must be a live trace handle; `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn halpern_trace_point(
    trace: *const HalpernTrace,
    n: u64,
    buf: *mut f64,
    len: usize,
) -> HalpernStatus {
    guard(|| {
        out_ptr(buf, "buf")?;
        let t = &handle(trace, "trace")?.0;
        let p = t.point(n).ok_or_else(|| Failure(HalpernStatus::OutOfRange, format!("no point {n}")))?;
        let coords = p.coords();
        if len < coords.len() {
            return Err(Failure(HalpernStatus::InvalidParameter, format!("buffer holds {len}, need {}", coords.len())));
        }
        std::slice::from_raw_parts_mut(buf, coords.len()).copy_from_slice(coords);
        Ok(())
    })
}

/// Computes a rate certificate. `eps` and `m` are rationals written `p/q`; `schedule` and
/// `g` use the config syntax (`g` may be null for the identity). A zero `max_steps` or
/// `max_bits` selects the default budget. `sigma` uses the identity modulus.
///
/// # Safety
/// String arguments must be NUL-terminated (or null where allowed); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn halpern_rate(
    which: HalpernCertificate,
    eps: *const c_char,
    m: *const c_char,
    schedule: *const c_char,
    g: *const c_char,
    max_steps: u64,
    max_bits: u64,
    out: *mut *mut HalpernRate,
) -> HalpernStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let defaults = Budget::default();
        let query = RateQuery {
            which: match which {
                HalpernCertificate::Psi => Which::Psi,
                HalpernCertificate::PsiClosed => Which::PsiClosed,
                HalpernCertificate::Phi => Which::Phi,
                HalpernCertificate::K => Which::K,
                HalpernCertificate::Sigma => Which::Sigma,
            },
            eps: parse_rational(read_str(eps, "eps")?)?,
            m: parse_rational(read_str(m, "M")?)?,
            schedule: parse_schedule(read_str(schedule, "schedule")?)?,
            g: if g.is_null() { "id".parse()? } else { read_str(g, "g")?.parse()? },
            budget: Budget {
                max_steps: if max_steps == 0 { defaults.max_steps } else { max_steps },
                max_bits: if max_bits == 0 { defaults.max_bits } else { max_bits },
            },
            omega: Modulus::Identity,
            closed_psi: false,
        };
        *out = Box::into_raw(Box::new(HalpernRate(certificate(&query)?)));
        Ok(())
    })
}

/// # Safety
/// `rate` must be null or a handle from [`halpern_rate`] that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn halpern_rate_free(rate: *mut HalpernRate) {
    if !rate.is_null() {
        drop(Box::from_raw(rate));
    }
}

/// Whether the certificate is exact (false for null).
///
/// # Safety
/// `rate` must be null or a live rate handle.
#[no_mangle]
pub unsafe extern "C" fn halpern_rate_is_exact(rate: *const HalpernRate) -> bool {
    rate.as_ref().is_some_and(|r| r.0.is_exact())
}

/// The exact value or the lower bound, in decimal. Free with [`halpern_string_free`].
///
/// # Safety
/// `rate` must be null or a live rate handle.
#[no_mangle]
pub unsafe extern "C" fn halpern_rate_value(rate: *const HalpernRate) -> *mut c_char {
    rate.as_ref().map_or(ptr::null_mut(), |r| owned_string(r.0.lower_bound().to_string()))
}

/// The certificate as the command-line tool prints it. Free with [`halpern_string_free`].
///
/// # Safety
/// `rate` must be null or a live rate handle.
#[no_mangle]
pub unsafe extern "C" fn halpern_rate_display(rate: *const HalpernRate) -> *mut c_char {
    rate.as_ref().map_or(ptr::null_mut(), |r| owned_string(r.0.to_string()))
}

/// Runs the verification suite and returns the JSON report through `report` (free with
/// [`halpern_string_free`]). `failures` receives the number of checks that failed or errored.
///
/// # Safety
/// `cfg` must be a live config handle; `report` and `failures` must be writable.
#[no_mangle]
pub unsafe extern "C" fn halpern_verify(
    cfg: *const HalpernConfig,
    report: *mut *mut c_char,
    failures: *mut usize,
) -> HalpernStatus {
    guard(|| {
        out_ptr(report, "report")?;
        out_ptr(failures, "failures")?;
        let cfg = &handle(cfg, "config")?.0;
        let records = verify_all(cfg, false);
        let json =
            serde_json::to_string_pretty(&records).map_err(|e| Failure(HalpernStatus::Numeric, e.to_string()))?;
        *failures = records.iter().filter(|r| r.outcome == "fail" || r.outcome == "error").count();
        *report = owned_string(json);
        Ok(())
    })
}
