//! C ABI over speclab.
//!
//! Every function returns a [`SpeclabStatus`]; results go through out
//! pointers. On failure the message is kept per thread and can be read with
//! [`speclab_last_error`]. Handles are opaque and must be released with the
//! matching `_free` function. Panics never cross the boundary: they are
//! caught and reported as `SPECLAB_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use num_complex::Complex64;
use speclab::cosine_kernel::{self, PotentialTable, Sign};
use speclab::spectral_analysis::{self, BoundStateSpectrum};
use speclab::structure_functions::StructureEvaluator;
use speclab::{special_functions, Error};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpeclabStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    Pole = 3,
    Domain = 4,
    CrossValidation = 5,
    Discretization = 6,
    Numerical = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SpeclabComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for SpeclabComplex {
    fn from(z: Complex64) -> Self {
        SpeclabComplex { re: z.re, im: z.im }
    }
}

impl From<SpeclabComplex> for Complex64 {
    fn from(z: SpeclabComplex) -> Self {
        Complex64::new(z.re, z.im)
    }
}

/// Structure functions and scattering solutions at one s.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct SpeclabPoint {
    pub cal_a: SpeclabComplex,
    pub cal_b: SpeclabComplex,
    pub j: SpeclabComplex,
    pub k: SpeclabComplex,
    pub e_hat: SpeclabComplex,
    pub f_hat: SpeclabComplex,
    pub gamma: SpeclabComplex,
}

/// Opaque structure-function evaluator for one a.
pub struct SpeclabEvaluator(Arc<StructureEvaluator>);
/// Opaque tabulated potential μ(u).
pub struct SpeclabPotential(PotentialTable);
/// Opaque bound-state spectrum.
pub struct SpeclabSpectrum(BoundStateSpectrum);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SpeclabStatus {
    match e {
        Error::InvalidParameter { .. } => SpeclabStatus::InvalidArgument,
        Error::Pole { .. } | Error::PoleCollision { .. } => SpeclabStatus::Pole,
        Error::Domain { .. } | Error::TableRange { .. } => SpeclabStatus::Domain,
        Error::CrossValidation { .. } => SpeclabStatus::CrossValidation,
        Error::Discretization(_) | Error::TailTruncation { .. } => SpeclabStatus::Discretization,
        Error::Io { .. } | Error::Cache { .. } => SpeclabStatus::Io,
        _ => SpeclabStatus::Numerical,
    }
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Error>) -> SpeclabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            SpeclabStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            SpeclabStatus::Panic
        }
    }
}

macro_rules! out {
    ($p:expr) => {
        match unsafe { $p.as_mut() } {
            Some(r) => r,
            None => {
                set_error(format!("null pointer `{}`", stringify!($p)));
                return SpeclabStatus::NullPointer;
            }
        }
    };
}

macro_rules! handle {
    ($p:expr) => {
        match unsafe { $p.as_ref() } {
            Some(r) => r,
            None => {
                set_error(format!("null handle `{}`", stringify!($p)));
                return SpeclabStatus::NullPointer;
            }
        }
    };
}

/// Copy the calling thread's last error message (NUL-terminated, truncated
/// to `len`) into `buf`. Returns the full message length without the NUL.
/// `buf` may be null to query the length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn speclab_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// χ(s) = π^(s−½)Γ((1−s)/2)/Γ(s/2).
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn speclab_chi(s: SpeclabComplex, out: *mut SpeclabComplex) -> SpeclabStatus {
    let out = out!(out);
    guard(|| {
        *out = special_functions::chi(s.into())?.into();
        Ok(())
    })
}

/// γ(s) = π^(−s/2)Γ(s/2).
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn speclab_gamma_factor(s: SpeclabComplex, out: *mut SpeclabComplex) -> SpeclabStatus {
    let out = out!(out);
    guard(|| {
        *out = special_functions::gamma_factor(s.into())?.into();
        Ok(())
    })
}

/// Smoothed zero count (T/2π)ln(T/2π) − T/2π + 7/8.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn speclab_rvm_count(t: f64, out: *mut f64) -> SpeclabStatus {
    let out = out!(out);
    guard(|| {
        *out = special_functions::rvm_count(t)?;
        Ok(())
    })
}

/// log det(1 + sign·Cₐ); `sign` is +1 or −1.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn speclab_log_det(a: f64, sign: i32, n: usize, out: *mut f64) -> SpeclabStatus {
    let out = out!(out);
    guard(|| {
        let sign = match sign {
            1 => Sign::Plus,
            -1 => Sign::Minus,
            _ => return Err(Error::InvalidParameter { name: "sign", reason: format!("must be +1 or -1, got {sign}") }),
        };
        *out = cosine_kernel::log_det(a, sign, n)?;
        Ok(())
    })
}

/// μ(u) by the resolvent route, gated against finite differences.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn speclab_mu(u: f64, n: usize, out: *mut f64) -> SpeclabStatus {
    let out = out!(out);
    guard(|| {
        *out = cosine_kernel::mu(u, n)?;
        Ok(())
    })
}

/// New evaluator for a with base node count n (memoized internally).
///
/// # Safety
/// `out` must be null or valid for writes; release with
/// [`speclab_evaluator_free`].
#[no_mangle]
pub unsafe extern "C" fn speclab_evaluator_new(a: f64, n: usize, out: *mut *mut SpeclabEvaluator) -> SpeclabStatus {
    let out = out!(out);
    *out = std::ptr::null_mut();
    guard(|| {
        let ev = StructureEvaluator::shared_with(a, n, cosine_kernel::structure_precision(a))?;
        *out = Box::into_raw(Box::new(SpeclabEvaluator(ev)));
        Ok(())
    })
}

/// # Safety
/// `ev` must be null or a handle from [`speclab_evaluator_new`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn speclab_evaluator_free(ev: *mut SpeclabEvaluator) {
    if !ev.is_null() {
        drop(Box::from_raw(ev));
    }
}

/// 𝒜, ℬ, J, K, Ê, F̂ and γ at s.
///
/// # Safety
/// `ev` must be a live handle, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn speclab_evaluator_point(ev: *const SpeclabEvaluator, s: SpeclabComplex, out: *mut SpeclabPoint) -> SpeclabStatus {
    let ev = handle!(ev);
    let out = out!(out);
    guard(|| {
        let p = ev.0.evaluate(s.into())?;
        *out = SpeclabPoint {
            cal_a: p.cal_a.into(),
            cal_b: p.cal_b.into(),
            j: p.j.into(),
            k: p.k.into(),
            e_hat: p.e_hat.into(),
            f_hat: p.f_hat.into(),
            gamma: p.gamma.into(),
        };
        Ok(())
    })
}

/// (Ê(z)Ê(w) − F̂(z)F̂(w))/(z+w−1) with the removable limit at z+w = 1.
///
/// # Safety
/// `ev` must be a live handle, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn speclab_evaluator_inner(
    ev: *const SpeclabEvaluator,
    z: SpeclabComplex,
    w: SpeclabComplex,
    out: *mut SpeclabComplex,
) -> SpeclabStatus {
    let ev = handle!(ev);
    let out = out!(out);
    guard(|| {
        *out = ev.0.inner(z.into(), w.into())?.into();
        Ok(())
    })
}

/// Tabulate μ on `steps` intervals of [u_min, u_max].
///
/// # Safety
/// `out` must be null or valid for writes; release with
/// [`speclab_potential_free`].
#[no_mangle]
pub unsafe extern "C" fn speclab_potential_new(u_min: f64, u_max: f64, steps: usize, n: usize, out: *mut *mut SpeclabPotential) -> SpeclabStatus {
    let out = out!(out);
    *out = std::ptr::null_mut();
    guard(|| {
        let t = cosine_kernel::build_potential_table(u_min, u_max, steps, n)?;
        *out = Box::into_raw(Box::new(SpeclabPotential(t)));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from [`speclab_potential_new`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn speclab_potential_free(p: *mut SpeclabPotential) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Interpolated μ(u).
///
/// # Safety
/// `p` must be a live handle, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn speclab_potential_mu(p: *const SpeclabPotential, u: f64, out: *mut f64) -> SpeclabStatus {
    let p = handle!(p);
    let out = out!(out);
    guard(|| {
        *out = p.0.mu_at(u)?;
        Ok(())
    })
}

/// Zeros of 𝒜ₐ₀ on [−E_max, E_max] with their norms.
///
/// # Safety
/// `out` must be null or valid for writes; release with
/// [`speclab_spectrum_free`].
#[no_mangle]
pub unsafe extern "C" fn speclab_bound_states(a0: f64, e_max: f64, out: *mut *mut SpeclabSpectrum) -> SpeclabStatus {
    let out = out!(out);
    *out = std::ptr::null_mut();
    guard(|| {
        let s = spectral_analysis::find_bound_states(a0, e_max)?;
        *out = Box::into_raw(Box::new(SpeclabSpectrum(s)));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle from [`speclab_bound_states`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn speclab_spectrum_free(s: *mut SpeclabSpectrum) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of eigenvalues in the spectrum.
///
/// # Safety
/// `s` must be a live handle, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn speclab_spectrum_len(s: *const SpeclabSpectrum, out: *mut usize) -> SpeclabStatus {
    let s = handle!(s);
    let out = out!(out);
    *out = s.0.eigenvalues.len();
    SpeclabStatus::Ok
}

/// Eigenvalue `i` (ascending) and its norm.
///
/// # Safety
/// `s` must be a live handle; `energy` and `norm` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn speclab_spectrum_get(s: *const SpeclabSpectrum, i: usize, energy: *mut f64, norm: *mut f64) -> SpeclabStatus {
    let s = handle!(s);
    let energy = out!(energy);
    let norm = out!(norm);
    guard(|| {
        if i >= s.0.eigenvalues.len() {
            return Err(Error::InvalidParameter {
                name: "i",
                reason: format!("index {i} out of range 0..{}", s.0.eigenvalues.len()),
            });
        }
        *energy = s.0.eigenvalues[i];
        *norm = s.0.norms[i];
        Ok(())
    })
}

/// Scattering m-function −J(u0, s)/K(u0, s), s = ½ + iE.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn speclab_m_scattering(a0: f64, e: SpeclabComplex, out: *mut SpeclabComplex) -> SpeclabStatus {
    let out = out!(out);
    guard(|| {
        *out = spectral_analysis::m_scattering(a0, e.into())?.into();
        Ok(())
    })
}

/// Bound-state m-function −ℬₐ₀(s)/𝒜ₐ₀(s), s = ½ + iE.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn speclab_m_bound(a0: f64, e: SpeclabComplex, out: *mut SpeclabComplex) -> SpeclabStatus {
    let out = out!(out);
    guard(|| {
        *out = spectral_analysis::m_bound(a0, e.into())?.into();
        Ok(())
    })
}
