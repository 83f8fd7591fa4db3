//! C ABI over `zeroshape`.
//!
//! Every function returns a [`ZsStatus`]; on failure the message is
//! available from [`zs_last_error`] on the same thread. Cases are opaque
//! handles created by the `zs_case_from_*` functions and released with
//! [`zs_case_free`]. Node indices are 0-based in the network's node order.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use zeroshape::case::NetworkCase;
use zeroshape::error::{Error, ErrorClass};
use zeroshape::network::{GridModel, OperatingPoint};
use zeroshape::{fixtures, reshape, zerocalc};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZsStatus {
    Ok = 0,
    /// Malformed or inconsistent input.
    InputError = 1,
    /// The analysis is numerically ill-posed for this input.
    NumericalError = 2,
    NullPointer = 3,
    /// The caller's buffer is shorter than the result; the required length
    /// was still written.
    BufferTooSmall = 4,
    /// An internal panic was caught at the boundary.
    Panic = 5,
}

/// Opaque analysis case: network, operating point and droop-augmented
/// Jacobian.
pub struct ZsCase {
    case: NetworkCase,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(err: Error) -> ZsStatus {
    let status = match err.class() {
        ErrorClass::Input => ZsStatus::InputError,
        ErrorClass::Numerical => ZsStatus::NumericalError,
    };
    set_error(err.to_string());
    status
}

enum Failure {
    Status(ZsStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(ZsStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ZsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            ZsStatus::Ok
        }
        Ok(Err(Failure::Lib(e))) => fail(e),
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            ZsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Status(ZsStatus::InputError, format!("{what} is not UTF-8")))
}

unsafe fn case_arg<'a>(h: *const ZsCase) -> Result<&'a ZsCase, Failure> {
    h.as_ref().ok_or_else(|| null("case"))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Copy `values` into `buf[..cap]`, reporting the full length in `len`.
unsafe fn fill<T: Copy>(values: &[T], buf: *mut T, cap: usize, len: *mut usize) -> Result<(), Failure> {
    *out_arg(len, "len")? = values.len();
    if cap < values.len() {
        return Err(Failure::Status(
            ZsStatus::BufferTooSmall,
            format!("buffer holds {cap}, result has {}", values.len()),
        ));
    }
    if !values.is_empty() {
        if buf.is_null() {
            return Err(null("buffer"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    }
    Ok(())
}

fn json_error(what: &str) -> impl Fn(serde_json::Error) -> Failure + '_ {
    move |e| Failure::Lib(Error::InvalidModel(format!("{what}: {e}")))
}

fn boxed(case: NetworkCase, out: &mut *mut ZsCase) {
    *out = Box::into_raw(Box::new(ZsCase { case }));
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn zs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, empty after a success.
/// Valid until the next `zs_*` call on the same thread.
#[no_mangle]
pub extern "C" fn zs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Build a case from a built-in fixture name, including `random-seed-N`.
///
/// # Safety
/// `name` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zs_case_from_fixture(name: *const c_char, out: *mut *mut ZsCase) -> ZsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let fx = fixtures::load_fixture(str_arg(name, "name")?)?;
        boxed(fx.network_case()?, out);
        Ok(())
    })
}

/// Build a case from grid-model and operating-point JSON documents.
///
/// # Safety
/// Both strings must be valid NUL-terminated strings and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zs_case_from_json(
    network_json: *const c_char,
    op_json: *const c_char,
    out: *mut *mut ZsCase,
) -> ZsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let model: GridModel =
            serde_json::from_str(str_arg(network_json, "network_json")?).map_err(json_error("network"))?;
        let op: OperatingPoint =
            serde_json::from_str(str_arg(op_json, "op_json")?).map_err(json_error("operating point"))?;
        boxed(NetworkCase::build(&model, &op, &[])?, out);
        Ok(())
    })
}

/// Release a case. Null is ignored.
///
/// # Safety
/// `case` must come from a `zs_case_from_*` call and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn zs_case_free(case: *mut ZsCase) {
    if !case.is_null() {
        drop(Box::from_raw(case));
    }
}

/// Number of converter nodes.
///
/// # Safety
/// `case` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zs_case_node_count(case: *const ZsCase, out: *mut usize) -> ZsStatus {
    guard(|| {
        *out_arg(out, "out")? = case_arg(case)?.case.n();
        Ok(())
    })
}

/// Nominal angular frequency in rad/s.
///
/// # Safety
/// `case` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zs_case_omega0(case: *const ZsCase, out: *mut f64) -> ZsStatus {
    guard(|| {
        *out_arg(out, "out")? = case_arg(case)?.case.omega0();
        Ok(())
    })
}

/// Add frequency droop of the given gain at one node. Gains accumulate.
///
/// # Safety
/// `case` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn zs_case_apply_droop(case: *mut ZsCase, node: usize, gain: f64) -> ZsStatus {
    guard(|| {
        let h = case.as_mut().ok_or_else(|| null("case"))?;
        h.case.jac = h.case.jac.apply_droop(node, gain)?;
        Ok(())
    })
}

/// Real positive zeros in rad/s, ascending. `len` receives the count.
///
/// # Safety
/// `case` must be a live handle, `buf` valid for `cap` doubles and `len` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zs_case_zeros(case: *const ZsCase, buf: *mut f64, cap: usize, len: *mut usize) -> ZsStatus {
    guard(|| {
        let c = &case_arg(case)?.case;
        let zeros = c.nmp_zeros(1.0, 10.0 * c.omega0(), zerocalc::DEFAULT_GRID_POINTS)?;
        fill(&zeros, buf, cap, len)
    })
}

/// Smallest real positive zero in rad/s.
///
/// # Safety
/// `case` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zs_case_dominant_zero(case: *const ZsCase, out: *mut f64) -> ZsStatus {
    guard(|| {
        *out_arg(out, "out")? = case_arg(case)?.case.dominant_zero()?;
        Ok(())
    })
}

/// Participation factors, zero sensitivities to droop gain and the
/// system sensitivity at the zero `z0`. Each array holds one entry per
/// node; `len` receives the node count.
///
/// # Safety
/// `case` must be a live handle; the four arrays must be valid for `cap`
/// doubles and the remaining pointers valid.
#[no_mangle]
pub unsafe extern "C" fn zs_case_sensitivity(
    case: *const ZsCase,
    z0: f64,
    p_re: *mut f64,
    p_im: *mut f64,
    dz_re: *mut f64,
    dz_im: *mut f64,
    cap: usize,
    len: *mut usize,
    s_sys_re: *mut f64,
    s_sys_im: *mut f64,
) -> ZsStatus {
    guard(|| {
        let rep = reshape::zero_sensitivity_report(&case_arg(case)?.case.jac, z0)?;
        let (s_re, s_im) = (out_arg(s_sys_re, "s_sys_re")?, out_arg(s_sys_im, "s_sys_im")?);
        let re: Vec<f64> = rep.p.iter().map(|c| c.re).collect();
        let im: Vec<f64> = rep.p.iter().map(|c| c.im).collect();
        fill(&re, p_re, cap, len)?;
        fill(&im, p_im, cap, len)?;
        let re: Vec<f64> = rep.dz_dk.iter().map(|c| c.re).collect();
        let im: Vec<f64> = rep.dz_dk.iter().map(|c| c.im).collect();
        fill(&re, dz_re, cap, len)?;
        fill(&im, dz_im, cap, len)?;
        *s_re = rep.s_sys.re;
        *s_im = rep.s_sys.im;
        Ok(())
    })
}

/// Node indices ordered by descending zero sensitivity at `z0`, the best
/// droop placement first.
///
/// # Safety
/// `case` must be a live handle, `order` valid for `cap` entries and `len`
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zs_case_rank(
    case: *const ZsCase,
    z0: f64,
    order: *mut usize,
    cap: usize,
    len: *mut usize,
) -> ZsStatus {
    guard(|| {
        let rep = reshape::zero_sensitivity_report(&case_arg(case)?.case.jac, z0)?;
        fill(&rep.ranking, order, cap, len)
    })
}

/// Whether the symmetric part of the real operating admittance is positive
/// definite (`passive` = 1), and its smallest eigenvalue.
///
/// # Safety
/// `case` must be a live handle and the outputs valid pointers.
#[no_mangle]
pub unsafe extern "C" fn zs_case_passivity_gate(
    case: *const ZsCase,
    passive: *mut c_int,
    min_eigenvalue: *mut f64,
) -> ZsStatus {
    guard(|| {
        let (ok, min) = reshape::passivity_gate(&case_arg(case)?.case.jac);
        *out_arg(passive, "passive")? = c_int::from(ok);
        *out_arg(min_eigenvalue, "min_eigenvalue")? = min;
        Ok(())
    })
}
