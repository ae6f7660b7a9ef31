//! C ABI over `cantor_shrink`.
//!
//! Every fallible call returns a [`CsStatus`]; on failure the message is
//! available from [`cs_last_error_message`] on the same thread. Out-pointers
//! are written only on success. Sequences are opaque handles owned by the
//! caller and released with [`cs_sequence_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cantor_shrink::dimension::{self, DimensionEstimate, Family, Flag};
use cantor_shrink::targets::{self, Status};
use cantor_shrink::{CumulativeCache, Error, ExactPoint, Target};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidArgument = 4,
    Domain = 5,
    CapExceeded = 6,
    NotQAdic = 7,
    PreconditionUnmet = 8,
    WrongTarget = 9,
    Other = 10,
    Panic = 11,
}

/// Which role a sequence plays.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsTarget {
    /// Integer bases q_n ≥ 2.
    Base = 0,
    /// Nonnegative real weights α(n).
    Weight = 1,
}

/// Three-valued verdict of a hit test.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsVerdict {
    Miss = 0,
    Hit = 1,
    Uncertain = 2,
}

/// Diagnostic attached to a dimension estimate.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsFlag {
    None = 0,
    NoLimit = 1,
    Divergent = 2,
}

/// A dimension estimate over the window [window_lo, window_hi].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsEstimate {
    pub value: f64,
    pub residual: f64,
    pub window_lo: usize,
    pub window_hi: usize,
    pub flag: CsFlag,
}

/// A parsed sequence with its cache of partial sums.
pub struct CsSequence {
    cache: CumulativeCache,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    // Interior NULs cannot appear in a C string; replace them.
    let msg = CString::new(msg.replace('\0', " ")).expect("NULs were replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> CsStatus {
    match e {
        Error::Parse { .. } => CsStatus::Parse,
        Error::InvalidArgument(_) | Error::UnsupportedFamily(_) | Error::OutOfRange { .. } => {
            CsStatus::InvalidArgument
        }
        Error::Domain(_) | Error::InvalidDigit { .. } => CsStatus::Domain,
        Error::CapExceeded { .. } | Error::EnumerationCap { .. } => CsStatus::CapExceeded,
        Error::NotQAdic { .. } => CsStatus::NotQAdic,
        Error::PreconditionUnmet(_) | Error::ScheduleInfeasible { .. } => {
            CsStatus::PreconditionUnmet
        }
        Error::WrongTarget { .. } => CsStatus::WrongTarget,
        _ => CsStatus::Other,
    }
}

struct Fail(CsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CsStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_last_error(format!("internal panic: {msg}"));
            CsStatus::Panic
        }
    }
}

fn null(name: &str) -> Fail {
    Fail(CsStatus::NullPointer, format!("{name} is null"))
}

/// # Safety
/// `p` is null or a NUL-terminated string valid for reads.
unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(CsStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

/// # Safety
/// `p` is null or a live handle from [`cs_sequence_new`] not aliased elsewhere.
unsafe fn seq_mut<'a>(p: *mut CsSequence, name: &str) -> Result<&'a mut CumulativeCache, Fail> {
    p.as_mut().map(|s| &mut s.cache).ok_or_else(|| null(name))
}

/// Two distinct handles; the library mutates both caches.
///
/// # Safety
/// Both pointers are null or live handles.
unsafe fn pair<'a>(
    q: *mut CsSequence,
    alpha: *mut CsSequence,
) -> Result<(&'a mut CumulativeCache, &'a mut CumulativeCache), Fail> {
    if !q.is_null() && q == alpha {
        return Err(Fail(
            CsStatus::InvalidArgument,
            "q and alpha must be distinct handles".into(),
        ));
    }
    Ok((seq_mut(q, "q")?, seq_mut(alpha, "alpha")?))
}

fn write_out<T>(out: *mut T, v: T, name: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(name));
    }
    // SAFETY: non-null and, per the caller contract, valid for writes.
    unsafe { out.write(v) };
    Ok(())
}

fn estimate(e: &DimensionEstimate) -> CsEstimate {
    CsEstimate {
        value: e.value,
        residual: e.residual,
        window_lo: e.window.0,
        window_hi: e.window.1,
        flag: match e.flag {
            None => CsFlag::None,
            Some(Flag::NoLimit) => CsFlag::NoLimit,
            Some(Flag::Divergent) => CsFlag::Divergent,
        },
    }
}

/// Message of the last failed call on this thread, or null if none.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn cs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is accepted.
///
/// # Safety
/// `s` is null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a sequence such as `periodic:2,3` or `expr:log(n)`.
///
/// # Safety
/// `text` is a NUL-terminated string; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cs_sequence_new(
    text: *const c_char,
    target: CsTarget,
    out: *mut *mut CsSequence,
) -> CsStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let target = match target {
            CsTarget::Base => Target::Base,
            CsTarget::Weight => Target::Weight,
        };
        let cache = CumulativeCache::parse(text, target)?;
        let handle = Box::into_raw(Box::new(CsSequence { cache }));
        if out.is_null() {
            drop(Box::from_raw(handle));
            return Err(null("out"));
        }
        out.write(handle);
        Ok(())
    })
}

/// Releases a sequence. Null is accepted.
///
/// # Safety
/// `seq` is null or a handle from [`cs_sequence_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cs_sequence_free(seq: *mut CsSequence) {
    if !seq.is_null() {
        drop(Box::from_raw(seq));
    }
}

/// Σ_{k≤n} log q_k for a base sequence, Σ_{k≤n} α(k) for a weight sequence.
///
/// # Safety
/// `seq` is a live handle; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cs_sequence_partial_sum(
    seq: *mut CsSequence,
    n: usize,
    out: *mut f64,
) -> CsStatus {
    guard(|| {
        let seq = seq_mut(seq, "seq")?;
        let v = seq.sum(n)?.to_f64();
        write_out(out, v, "out")
    })
}

/// Windowed limsup of log Q_n / (log Q_n + α(n)) over [⌈window·n_max⌉, n_max].
///
/// # Safety
/// `q`, `alpha` are distinct live handles; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cs_dimension_limsup(
    q: *mut CsSequence,
    alpha: *mut CsSequence,
    n_max: usize,
    window: f64,
    out: *mut CsEstimate,
) -> CsStatus {
    guard(|| {
        let (q, alpha) = pair(q, alpha)?;
        let e = dimension::dimension_limsup(q, alpha, n_max, window)?;
        write_out(out, estimate(&e), "out")
    })
}

/// Zero of the windowed pressure, found by bisection to `tol`.
///
/// # Safety
/// `q`, `alpha` are distinct live handles; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cs_bowen_parameter(
    q: *mut CsSequence,
    alpha: *mut CsSequence,
    n_max: usize,
    tol: f64,
    window: f64,
    out: *mut CsEstimate,
) -> CsStatus {
    guard(|| {
        let (q, alpha) = pair(q, alpha)?;
        let e = dimension::bowen_parameter(q, alpha, n_max, tol, window)?;
        write_out(out, estimate(&e), "out")
    })
}

/// Decides ‖T_Q^n x‖ ≤ e^{−α(n)} for x given as `p/q` or a decimal.
///
/// # Safety
/// `q`, `alpha` are distinct live handles; `x` is a NUL-terminated string;
/// `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cs_hit_test(
    q: *mut CsSequence,
    alpha: *mut CsSequence,
    x: *const c_char,
    n: usize,
    precision: u32,
    out: *mut CsVerdict,
) -> CsStatus {
    guard(|| {
        let (q, alpha) = pair(q, alpha)?;
        let x: ExactPoint = str_arg(x, "x")?.parse()?;
        let v = targets::hit_test(&x, q, alpha, n, precision)?;
        let verdict = match v.status {
            Status::Hit => CsVerdict::Hit,
            Status::Miss => CsVerdict::Miss,
            Status::Uncertain => CsVerdict::Uncertain,
        };
        write_out(out, verdict, "out")
    })
}

/// T_Q^n x as an exact fraction `p/q`; release with [`cs_string_free`].
///
/// # Safety
/// `q` is a live handle; `x` is a NUL-terminated string; `out` is valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn cs_iterate(
    q: *mut CsSequence,
    x: *const c_char,
    n: usize,
    out: *mut *mut c_char,
) -> CsStatus {
    guard(|| {
        let q = seq_mut(q, "q")?;
        let x: ExactPoint = str_arg(x, "x")?.parse()?;
        let y = cantor_shrink::expansion::iterate(&x, q, n)?;
        let s = CString::new(y.to_string()).expect("fractions contain no NUL");
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(s.into_raw());
        Ok(())
    })
}

/// Closed-form dimension of a family such as `periodic:2,3;c=1` or
/// `poly:k=1/6;c=1`, evaluated at `precision` bits.
///
/// # Safety
/// `family` is a NUL-terminated string; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cs_family_dimension(
    family: *const c_char,
    precision: u32,
    out: *mut f64,
) -> CsStatus {
    guard(|| {
        let fam = Family::parse(str_arg(family, "family")?)?;
        let v = dimension::family_formula(&fam, precision)?.to_f64();
        write_out(out, v, "out")
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_map_to_distinct_codes() {
        assert_eq!(status_of(&Error::Parse { pos: 0, msg: String::new() }), CsStatus::Parse);
        assert_eq!(
            status_of(&Error::NotQAdic { scanned: 1, exhaustive: true }),
            CsStatus::NotQAdic
        );
        assert_eq!(
            status_of(&Error::CapExceeded { n: 1, bits: 2, cap_bits: 1 }),
            CsStatus::CapExceeded
        );
    }

    #[test]
    fn panics_become_status() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, CsStatus::Panic);
        let msg = unsafe { CStr::from_ptr(cs_last_error_message()) };
        assert!(msg.to_str().unwrap().contains("boom"));
    }
}
