//! C ABI over `sobolev-erm`.
//!
//! Objects cross the boundary as opaque handles created by `se_*_new` or
//! `se_*_read` and released with the matching `se_*_free`. Every fallible
//! function returns an [`SeStatus`]; on failure the message is available
//! from [`se_last_error`] until the next call on the same thread. Arrays are
//! passed as pointer plus length, row-major. Panics never unwind into C:
//! they are reported as [`SeStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use sobolev_erm::estimator::{empirical_moc_linear, FitConfig, PhysicsPenalty, PreparedEstimator};
use sobolev_erm::field::VectorField;
use sobolev_erm::fourier_space::{Cube, FourierBasis, FourierCoeffs, QuadratureSpec};
use sobolev_erm::pde_operator::{LinearDiffOp, RegularizerMeasure};
use sobolev_erm::theory_bounds::{self, BoundKind, ProblemParams};
use sobolev_erm::{io, Error};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Dimension = 3,
    Config = 4,
    Unsupported = 5,
    Infeasible = 6,
    Identifiability = 7,
    Numerical = 8,
    Io = 9,
    InvalidUtf8 = 10,
    Panic = 11,
}

impl From<&Error> for SeStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) => SeStatus::Domain,
            Error::Dimension(_) => SeStatus::Dimension,
            Error::Config(_) => SeStatus::Config,
            Error::Unsupported(_) => SeStatus::Unsupported,
            Error::Infeasible(_) => SeStatus::Infeasible,
            Error::Identifiability(_) => SeStatus::Identifiability,
            Error::Numerical(_) => SeStatus::Numerical,
            Error::Io { .. } => SeStatus::Io,
        }
    }
}

/// Which family of excess-risk bound to evaluate.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeBoundKind {
    Probability = 0,
    Expectation = 1,
}

impl From<SeBoundKind> for BoundKind {
    fn from(k: SeBoundKind) -> Self {
        match k {
            SeBoundKind::Probability => BoundKind::Probability,
            SeBoundKind::Expectation => BoundKind::Expectation,
        }
    }
}

/// Problem parameters; see `se_params_default` for the defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SeParams {
    pub s: u32,
    pub dx: u32,
    pub dy: u32,
    pub sigma_w: f64,
    pub theta: f64,
    pub persistence: f64,
    pub rho_tilde: f64,
    pub c_c: f64,
    pub c_c_prime: f64,
    pub rho_f: f64,
    pub c_h_factor: f64,
    pub sup_bound: f64,
    pub delta: f64,
    pub half_width: f64,
}

impl From<&ProblemParams> for SeParams {
    fn from(p: &ProblemParams) -> Self {
        Self {
            s: p.s,
            dx: p.dx,
            dy: p.dy,
            sigma_w: p.sigma_w,
            theta: p.theta,
            persistence: p.persistence,
            rho_tilde: p.rho_tilde,
            c_c: p.c_c,
            c_c_prime: p.c_c_prime,
            rho_f: p.rho_f,
            c_h_factor: p.c_h_factor,
            sup_bound: p.sup_bound,
            delta: p.delta,
            half_width: p.half_width,
        }
    }
}

impl From<&SeParams> for ProblemParams {
    fn from(p: &SeParams) -> Self {
        Self {
            s: p.s,
            dx: p.dx,
            dy: p.dy,
            sigma_w: p.sigma_w,
            theta: p.theta,
            persistence: p.persistence,
            rho_tilde: p.rho_tilde,
            c_c: p.c_c,
            c_c_prime: p.c_c_prime,
            rho_f: p.rho_f,
            c_h_factor: p.c_h_factor,
            sup_bound: p.sup_bound,
            delta: p.delta,
            half_width: p.half_width,
        }
    }
}

/// Excess-risk bound `slow_term + fast_term` at one sample size.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SeRateBound {
    pub bound: f64,
    pub slow_term: f64,
    pub fast_term: f64,
    pub c_slow: f64,
    pub c_fast: f64,
    /// Smallest admissible physics weight; NaN for the unregularized bound.
    pub lambda_min: f64,
    /// Smallest sample size satisfying the burn-in condition (may be inf).
    pub burn_in: f64,
    /// 1 when some quantity overflowed and was capped at infinity.
    pub overflow: u8,
}

/// Truncated Fourier basis on `[-L, L]^d`.
pub struct SeBasis(Arc<FourierBasis>);

/// Vector field expanded in a basis.
pub struct SeCoeffs(FourierCoeffs);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, records its error or panic, and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), (SeStatus, String)>) -> SeStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SeStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("panic: {msg}"));
            SeStatus::Panic
        }
    }
}

fn lib<T>(r: sobolev_erm::Result<T>) -> Result<T, (SeStatus, String)> {
    r.map_err(|e| (SeStatus::from(&e), e.to_string()))
}

fn null(what: &str) -> (SeStatus, String) {
    (SeStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `ptr` must be null or valid for `len` reads.
unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], (SeStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts(ptr, len) })
}

/// # Safety
/// `ptr` must be null or valid for `len` writes.
unsafe fn slice_mut<'a, T>(ptr: *mut T, len: usize, what: &str) -> Result<&'a mut [T], (SeStatus, String)> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts_mut(ptr, len) })
}

/// # Safety
/// `ptr` must be null or a NUL-terminated string.
unsafe fn path<'a>(ptr: *const c_char) -> Result<&'a Path, (SeStatus, String)> {
    if ptr.is_null() {
        return Err(null("path"));
    }
    let s = unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| (SeStatus::InvalidUtf8, "path is not valid UTF-8".to_string()))?;
    Ok(Path::new(s))
}

/// # Safety
/// `out` must be null or valid for one write.
unsafe fn put<T>(out: *mut T, value: T) -> Result<(), (SeStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    unsafe { out.write(value) };
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn se_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn se_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates the first `size` members of the basis on `[-half_width, half_width]^dim`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn se_basis_new(dim: usize, half_width: f64, size: usize, out: *mut *mut SeBasis) -> SeStatus {
    guard(|| {
        let basis = lib(Cube::new(dim, half_width).and_then(|c| FourierBasis::new(c, size)))?;
        unsafe { put(out, Box::into_raw(Box::new(SeBasis(Arc::new(basis))))) }
    })
}

/// # Safety
/// `basis` must be null or a handle from `se_basis_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn se_basis_free(basis: *mut SeBasis) {
    if !basis.is_null() {
        drop(unsafe { Box::from_raw(basis) });
    }
}

/// Number of basis members, or 0 for a null handle.
///
/// # Safety
/// `basis` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn se_basis_size(basis: *const SeBasis) -> usize {
    unsafe { basis.as_ref() }.map_or(0, |b| b.0.size())
}

/// Evaluates every basis member at `x` (length `dim`) into `out` (length `size`).
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn se_basis_eval(
    basis: *const SeBasis,
    x: *const f64,
    x_len: usize,
    out: *mut f64,
    out_len: usize,
) -> SeStatus {
    guard(|| {
        let b = unsafe { basis.as_ref() }.ok_or_else(|| null("basis"))?;
        if x_len != b.0.dim() || out_len != b.0.size() {
            return Err((SeStatus::Dimension, format!("expected x of length {} and out of length {}", b.0.dim(), b.0.size())));
        }
        let x = unsafe { slice(x, x_len, "x") }?;
        let out = unsafe { slice_mut(out, out_len, "out") }?;
        b.0.eval_into(x, out);
        Ok(())
    })
}

/// Wraps `out_dim x size` row-major coefficients over `basis`.
///
/// # Safety
/// `values` must hold `len` doubles and `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn se_coeffs_new(
    basis: *const SeBasis,
    out_dim: usize,
    values: *const f64,
    len: usize,
    out: *mut *mut SeCoeffs,
) -> SeStatus {
    guard(|| {
        let b = unsafe { basis.as_ref() }.ok_or_else(|| null("basis"))?;
        if out_dim == 0 || len != out_dim * b.0.size() {
            return Err((SeStatus::Dimension, format!("expected {out_dim} x {} coefficients, got {len}", b.0.size())));
        }
        let v = unsafe { slice(values, len, "values") }?;
        let f = lib(FourierCoeffs::new(Arc::clone(&b.0), DMatrix::from_row_slice(out_dim, b.0.size(), v)))?;
        unsafe { put(out, Box::into_raw(Box::new(SeCoeffs(f)))) }
    })
}

/// # Safety
/// `coeffs` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn se_coeffs_free(coeffs: *mut SeCoeffs) {
    if !coeffs.is_null() {
        drop(unsafe { Box::from_raw(coeffs) });
    }
}

/// Writes the input dimension, output dimension and basis size.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn se_coeffs_shape(
    coeffs: *const SeCoeffs,
    in_dim: *mut usize,
    out_dim: *mut usize,
    size: *mut usize,
) -> SeStatus {
    guard(|| {
        let f = unsafe { coeffs.as_ref() }.ok_or_else(|| null("coeffs"))?;
        unsafe {
            put(in_dim, f.0.in_dim())?;
            put(out_dim, f.0.out_dim())?;
            put(size, f.0.size())
        }
    })
}

/// Copies the `out_dim x size` coefficients, row-major, into `out`.
///
/// # Safety
/// `out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn se_coeffs_values(coeffs: *const SeCoeffs, out: *mut f64, len: usize) -> SeStatus {
    guard(|| {
        let f = unsafe { coeffs.as_ref() }.ok_or_else(|| null("coeffs"))?;
        let z = f.0.coeffs();
        if len != z.len() {
            return Err((SeStatus::Dimension, format!("expected {} values, got room for {len}", z.len())));
        }
        let out = unsafe { slice_mut(out, len, "out") }?;
        for (slot, v) in out.iter_mut().zip(z.transpose().iter()) {
            *slot = *v;
        }
        Ok(())
    })
}

/// Evaluates the field at `x` (length `in_dim`) into `out` (length `out_dim`).
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn se_coeffs_eval(
    coeffs: *const SeCoeffs,
    x: *const f64,
    x_len: usize,
    out: *mut f64,
    out_len: usize,
) -> SeStatus {
    guard(|| {
        let f = unsafe { coeffs.as_ref() }.ok_or_else(|| null("coeffs"))?;
        if x_len != f.0.in_dim() || out_len != f.0.out_dim() {
            return Err((SeStatus::Dimension, "x or out has the wrong length".to_string()));
        }
        let x = unsafe { slice(x, x_len, "x") }?;
        let out = unsafe { slice_mut(out, out_len, "out") }?;
        f.0.eval_into(x, out);
        Ok(())
    })
}

/// Reads a coefficient CSV file.
///
/// # Safety
/// `file` must be a NUL-terminated path and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn se_coeffs_read(file: *const c_char, out: *mut *mut SeCoeffs) -> SeStatus {
    guard(|| {
        let p = unsafe { path(file) }?;
        let f = lib(io::read_coeffs(p))?;
        unsafe { put(out, Box::into_raw(Box::new(SeCoeffs(f)))) }
    })
}

/// Writes a coefficient CSV file.
///
/// # Safety
/// `coeffs` must be live and `file` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn se_coeffs_write(coeffs: *const SeCoeffs, file: *const c_char) -> SeStatus {
    guard(|| {
        let f = unsafe { coeffs.as_ref() }.ok_or_else(|| null("coeffs"))?;
        let p = unsafe { path(file) }?;
        lib(io::write_coeffs(&f.0, p))
    })
}

/// Fits the estimator with a Laplacian penalty integrated over the input
/// cube. `inputs` is `n x dim` and `targets` is `n x dim`, both row-major.
///
/// # Safety
/// Arrays must hold `n * dim` doubles each; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn se_fit_laplacian(
    basis: *const SeBasis,
    inputs: *const f64,
    targets: *const f64,
    n: usize,
    sobolev_order: f64,
    ridge: f64,
    physics_weight: f64,
    out: *mut *mut SeCoeffs,
) -> SeStatus {
    guard(|| {
        let b = unsafe { basis.as_ref() }.ok_or_else(|| null("basis"))?;
        let d = b.0.dim();
        let x = unsafe { slice(inputs, n * d, "inputs") }?;
        let y = unsafe { slice(targets, n * d, "targets") }?;
        let config = FitConfig {
            basis: Arc::clone(&b.0),
            sobolev_order,
            ridge,
            physics_weight,
            penalty: PhysicsPenalty::Operator {
                op: LinearDiffOp::laplacian(d, d),
                measure: RegularizerMeasure::input_cube(b.0.cube(), QuadratureSpec::Default),
            },
        };
        let est = lib(PreparedEstimator::new(config, d))?;
        let moments = sobolev_erm::estimator::DesignMoments::from_rows(&b.0, x.chunks_exact(d), y.chunks_exact(d), d);
        let fit = lib(est.fit_moments(&moments))?;
        unsafe { put(out, Box::into_raw(Box::new(SeCoeffs(fit.coeffs)))) }
    })
}

/// Closed-form martingale offset complexity of the span of `phi`
/// (`t x m`, row-major) against noise `w` (`t x p`, row-major).
///
/// # Safety
/// Arrays must hold `t * m` and `t * p` doubles; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn se_moc_linear(
    phi: *const f64,
    t: usize,
    m: usize,
    w: *const f64,
    p: usize,
    out: *mut f64,
) -> SeStatus {
    guard(|| {
        let phi = unsafe { slice(phi, t * m, "phi") }?;
        let w = unsafe { slice(w, t * p, "w") }?;
        let v = lib(empirical_moc_linear(
            &DMatrix::from_row_slice(t, m, phi),
            &DMatrix::from_row_slice(t, p, w),
        ))?;
        unsafe { put(out, v) }
    })
}

/// Default problem parameters.
#[no_mangle]
pub extern "C" fn se_params_default() -> SeParams {
    SeParams::from(&ProblemParams::default())
}

/// Excess-risk bound with physics regularization at alignment `r_fstar > 0`.
///
/// # Safety
/// `params` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn se_rate_bound(
    kind: SeBoundKind,
    t: f64,
    r_fstar: f64,
    params: *const SeParams,
    out: *mut SeRateBound,
) -> SeStatus {
    guard(|| {
        let p = ProblemParams::from(unsafe { params.as_ref() }.ok_or_else(|| null("params"))?);
        let b = lib(match kind {
            SeBoundKind::Probability => theory_bounds::rate_bound_prob(t, r_fstar, &p),
            SeBoundKind::Expectation => theory_bounds::rate_bound_exp(t, r_fstar, &p),
        })?;
        unsafe {
            put(
                out,
                SeRateBound {
                    bound: b.bound,
                    slow_term: b.slow_term,
                    fast_term: b.fast_term,
                    c_slow: b.c_slow,
                    c_fast: b.c_fast,
                    lambda_min: b.lambda_min,
                    burn_in: b.burn_in,
                    overflow: u8::from(b.overflow),
                },
            )
        }
    })
}

/// Excess-risk bound without physics regularization.
///
/// # Safety
/// `params` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn se_noreg_bound(
    kind: SeBoundKind,
    t: f64,
    params: *const SeParams,
    out: *mut SeRateBound,
) -> SeStatus {
    guard(|| {
        let p = ProblemParams::from(unsafe { params.as_ref() }.ok_or_else(|| null("params"))?);
        let b = lib(theory_bounds::noreg_rate(t, kind.into(), &p))?;
        unsafe {
            put(
                out,
                SeRateBound {
                    bound: b.bound,
                    slow_term: b.slow_term,
                    fast_term: b.fast_term,
                    c_slow: b.c_slow_prime,
                    c_fast: b.c_fast_prime,
                    lambda_min: f64::NAN,
                    burn_in: b.burn_in,
                    overflow: u8::from(b.overflow),
                },
            )
        }
    })
}
