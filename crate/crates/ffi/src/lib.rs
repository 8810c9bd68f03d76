//! C interface. Analyses live behind an opaque handle; every call returns an
//! [`EffchanStatus`] and leaves a message for [`effchan_last_error`] on failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use effchan::keyrate::{Analysis, CoefficientSource};
use effchan::mcsim::{self, SimConfig};
use effchan::registry::Bound;
use effchan::Error;

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EffchanStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownProtocol = 3,
    Numerical = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EffchanBound {
    /// The protocol's registered default.
    Default = 0,
    Hashing = 1,
    Css = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EffchanCoefficient {
    Registered = 0,
    Computed = 1,
}

/// Opaque analysis of one registered protocol.
pub struct EffchanAnalysis {
    inner: Analysis,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct EffchanInspect {
    pub n: usize,
    pub d: usize,
    pub r: usize,
    pub group_order: usize,
    pub aut_order: usize,
    pub t_size: usize,
    pub orbit_count: usize,
    pub key_orbit_count: usize,
    pub fixed_space_dim: usize,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct EffchanThreshold {
    /// 1 for hashing, 2 for css.
    pub bound: i32,
    pub epsilon_star: f64,
    pub p_star: f64,
    pub fidelity_star: f64,
    /// Zero when the bound does not use one.
    pub css_coefficient: f64,
    pub binding_orbit: usize,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct EffchanSimStats {
    pub rounds: u64,
    pub key_length: u64,
    pub mismatches: u64,
    pub epsilon: f64,
    pub epsilon_stderr: f64,
    pub success_probability: f64,
    pub analytic_epsilon: f64,
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> EffchanStatus {
    match e {
        Error::UnknownProtocol(_) => EffchanStatus::UnknownProtocol,
        Error::Numerical(_) | Error::Dimension(_) => EffchanStatus::Numerical,
        _ => EffchanStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (EffchanStatus, String)>) -> EffchanStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EffchanStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            EffchanStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (EffchanStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (EffchanStatus, String) {
    (EffchanStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_name(name: *const c_char) -> Result<String, (EffchanStatus, String)> {
    if name.is_null() {
        return Err(null("protocol name"));
    }
    CStr::from_ptr(name)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| (EffchanStatus::InvalidArgument, "protocol name is not UTF-8".into()))
}

/// Builds the analysis of a registered protocol.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer. The handle written
/// to `out` must be released with [`effchan_analysis_free`].
#[no_mangle]
pub unsafe extern "C" fn effchan_analysis_open(name: *const c_char, out: *mut *mut EffchanAnalysis) -> EffchanStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let name = read_name(name)?;
        let inner = Analysis::new(&name).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(EffchanAnalysis { inner }));
        Ok(())
    })
}

/// # Safety
/// `handle` must come from [`effchan_analysis_open`] and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn effchan_analysis_free(handle: *mut EffchanAnalysis) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// # Safety
/// `handle` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn effchan_analysis_inspect(handle: *const EffchanAnalysis, out: *mut EffchanInspect) -> EffchanStatus {
    guard(|| {
        let a = handle.as_ref().ok_or_else(|| null("handle"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let s = a.inner.summary();
        *out = EffchanInspect {
            n: s.n,
            d: s.d,
            r: s.r,
            group_order: s.group_order,
            aut_order: s.aut_order,
            t_size: s.t_size,
            orbit_count: s.orbit_count,
            key_orbit_count: s.key_orbit_count,
            fixed_space_dim: s.fixed_space_dim,
        };
        Ok(())
    })
}

/// # Safety
/// `handle` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn effchan_analysis_threshold(
    handle: *const EffchanAnalysis,
    bound: EffchanBound,
    coefficient: EffchanCoefficient,
    out: *mut EffchanThreshold,
) -> EffchanStatus {
    guard(|| {
        let a = handle.as_ref().ok_or_else(|| null("handle"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let bound = match bound {
            EffchanBound::Default => a.inner.spec.default_bound,
            EffchanBound::Hashing => Bound::Hashing,
            EffchanBound::Css => Bound::Css,
        };
        let source = match coefficient {
            EffchanCoefficient::Registered => CoefficientSource::Registered,
            EffchanCoefficient::Computed => CoefficientSource::Computed,
        };
        let t = a.inner.threshold(bound, source).map_err(lib_err)?;
        *out = EffchanThreshold {
            bound: match t.bound {
                Bound::Hashing => 1,
                Bound::Css => 2,
            },
            epsilon_star: t.epsilon_star,
            p_star: t.p_star,
            fidelity_star: t.fidelity_star,
            css_coefficient: t.css_coefficient.unwrap_or(0.0),
            binding_orbit: t.binding_orbit,
        };
        Ok(())
    })
}

/// Monte Carlo run under depolarizing noise with parameter `p`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn effchan_simulate(
    name: *const c_char,
    p: f64,
    rounds: u64,
    seed: u64,
    shuffle: bool,
    out: *mut EffchanSimStats,
) -> EffchanStatus {
    guard(|| {
        let protocol = read_name(name)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let cfg = SimConfig { protocol: protocol.clone(), p, rounds, seed, shuffle };
        let s = mcsim::run_simulation(&cfg).map_err(lib_err)?;
        let exact = mcsim::analytic_stats(&protocol, p).map_err(lib_err)?;
        *out = EffchanSimStats {
            rounds: s.rounds,
            key_length: s.key_length,
            mismatches: s.mismatches,
            epsilon: s.epsilon,
            epsilon_stderr: s.epsilon_stderr,
            success_probability: s.success_probability,
            analytic_epsilon: exact.epsilon,
        };
        Ok(())
    })
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to fit) and returns the full message length without the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn effchan_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn effchan_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
