//! C ABI for `mirror-kde`.
//!
//! Every function returns an [`MkdeStatus`]; results come back through out
//! pointers. Objects are opaque handles created by `*_new` functions and
//! released with the matching `*_free`. After a non-zero status,
//! [`mkde_last_error`] gives a message for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use mirror_kde::bandwidth::{minimize_criterion, rule_of_thumb, Criterion, CvCopies};
use mirror_kde::reference::sample_kendall_tau;
use mirror_kde::{
    ecdf_transform, Error, EstimatorConfig, Kernel, MirrorEstimator, PseudoSample, Scaling,
};

/// Status codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MkdeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SampleTooSmall = 3,
    DegenerateSample = 4,
    DegenerateReference = 5,
    NonFinite = 6,
    NoConvergence = 7,
    BufferTooSmall = 8,
    Internal = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MkdeKernel {
    Epanechnikov = 0,
    Gaussian = 1,
    Uniform = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MkdeScaling {
    /// rank / (n + 1)
    OverNPlus1 = 0,
    /// rank / n
    OverN = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MkdeMethod {
    RuleOfThumb = 0,
    /// Cross-validation summed over all mirror copies.
    Lscv = 1,
    /// Cross-validation summed over the original points only.
    LscvOriginal = 2,
    LscvGamma = 3,
    Bcv = 4,
}

/// Pseudo-observations built from a raw bivariate sample.
pub struct MkdeSample {
    pseudo: PseudoSample,
}

/// A fitted mirror-reflection density estimator.
pub struct MkdeEstimator {
    inner: MirrorEstimator,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> MkdeStatus {
    match err {
        Error::InvalidArgument(_) | Error::TauOutOfRange(_) => MkdeStatus::InvalidArgument,
        Error::SampleTooSmall { .. } => MkdeStatus::SampleTooSmall,
        Error::DegenerateSample(_) | Error::Data(_) => MkdeStatus::DegenerateSample,
        Error::DegenerateReference { .. } => MkdeStatus::DegenerateReference,
        Error::NonFinite { .. } => MkdeStatus::NonFinite,
        Error::NoConvergence(_) => MkdeStatus::NoConvergence,
        Error::Io { .. } | Error::Csv(_) | Error::Json(_) => MkdeStatus::Internal,
    }
}

fn guard<F>(f: F) -> MkdeStatus
where
    F: FnOnce() -> Result<(), MkdeStatus>,
{
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MkdeStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            MkdeStatus::Internal
        }
    }
}

fn lift<T>(r: mirror_kde::Result<T>) -> Result<T, MkdeStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), MkdeStatus> {
    if p.is_null() {
        set_error(format!("{what} is null"));
        return Err(MkdeStatus::NullPointer);
    }
    Ok(())
}

/// # Safety
/// `p` must be null or valid for `len` reads.
unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], MkdeStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    Ok(slice::from_raw_parts(p, len))
}

impl From<MkdeKernel> for Kernel {
    fn from(k: MkdeKernel) -> Self {
        match k {
            MkdeKernel::Epanechnikov => Kernel::Epanechnikov,
            MkdeKernel::Gaussian => Kernel::Gaussian,
            MkdeKernel::Uniform => Kernel::Uniform,
        }
    }
}

impl From<MkdeScaling> for Scaling {
    fn from(s: MkdeScaling) -> Self {
        match s {
            MkdeScaling::OverNPlus1 => Scaling::OverNPlus1,
            MkdeScaling::OverN => Scaling::OverN,
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mkde_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL,
/// or 0 if there is none.
///
/// # Safety
/// `buf` must be null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn mkde_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let k = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, k);
            *buf.add(k) = 0;
        }
        bytes.len()
    })
}

/// Rank-transform `n` pairs `(x[i], y[i])` into a new sample handle.
///
/// # Safety
/// `x` and `y` must be valid for `n` reads; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn mkde_sample_new(
    x: *const f64,
    y: *const f64,
    n: usize,
    scaling: MkdeScaling,
    out: *mut *mut MkdeSample,
) -> MkdeStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let x = input(x, n, "x")?;
        let y = input(y, n, "y")?;
        let pseudo = lift(ecdf_transform(x, y, scaling.into()))?;
        *out = Box::into_raw(Box::new(MkdeSample { pseudo }));
        Ok(())
    })
}

/// # Safety
/// `sample` must be null or a handle from [`mkde_sample_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mkde_sample_free(sample: *mut MkdeSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// # Safety
/// `sample` must be a live handle; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn mkde_sample_len(sample: *const MkdeSample, out: *mut usize) -> MkdeStatus {
    guard(|| {
        non_null(sample, "sample")?;
        non_null(out, "out")?;
        *out = (*sample).pseudo.len();
        Ok(())
    })
}

/// Copy the pseudo-observations into `u` and `v`, each with room for `len`
/// values.
///
/// # Safety
/// `sample` must be a live handle; `u` and `v` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn mkde_sample_pseudo(
    sample: *const MkdeSample,
    u: *mut f64,
    v: *mut f64,
    len: usize,
) -> MkdeStatus {
    guard(|| {
        non_null(sample, "sample")?;
        let p = &(*sample).pseudo;
        if len < p.len() {
            set_error(format!("buffer holds {len} values, sample has {}", p.len()));
            return Err(MkdeStatus::BufferTooSmall);
        }
        non_null(u, "u")?;
        non_null(v, "v")?;
        ptr::copy_nonoverlapping(p.u().as_ptr(), u, p.len());
        ptr::copy_nonoverlapping(p.v().as_ptr(), v, p.len());
        Ok(())
    })
}

/// Select a bandwidth. Data-driven methods minimize over the `grid_len`
/// candidates in `grid` (strictly increasing, at least 10); the rule of
/// thumb ignores the grid.
///
/// # Safety
/// `sample` must be a live handle; `grid` must be valid for `grid_len`
/// reads; `out_h` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn mkde_select_bandwidth(
    sample: *const MkdeSample,
    method: MkdeMethod,
    kernel: MkdeKernel,
    grid: *const f64,
    grid_len: usize,
    out_h: *mut f64,
) -> MkdeStatus {
    guard(|| {
        non_null(sample, "sample")?;
        non_null(out_h, "out_h")?;
        let pseudo = &(*sample).pseudo;
        let kernel: Kernel = kernel.into();
        let criterion = match method {
            MkdeMethod::RuleOfThumb => {
                let tau = sample_kendall_tau(pseudo.u(), pseudo.v());
                *out_h = lift(rule_of_thumb(pseudo.len(), kernel, tau))?.h;
                return Ok(());
            }
            MkdeMethod::Lscv => Criterion::LscvFull {
                kernel,
                copies: CvCopies::All,
            },
            MkdeMethod::LscvOriginal => Criterion::LscvFull {
                kernel,
                copies: CvCopies::Original,
            },
            MkdeMethod::LscvGamma => Criterion::LscvGamma { kernel },
            MkdeMethod::Bcv => Criterion::Bcv,
        };
        let grid = input(grid, grid_len, "grid")?;
        *out_h = lift(minimize_criterion(pseudo, criterion, grid))?.h;
        Ok(())
    })
}

/// Build an estimator with bandwidth `h` in (0, 1].
///
/// # Safety
/// `sample` must be a live handle; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn mkde_estimator_new(
    sample: *const MkdeSample,
    h: f64,
    kernel: MkdeKernel,
    out: *mut *mut MkdeEstimator,
) -> MkdeStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        non_null(sample, "sample")?;
        let config = lift(EstimatorConfig::mirror(h, kernel.into()))?;
        let inner = MirrorEstimator::new(&(*sample).pseudo, config);
        *out = Box::into_raw(Box::new(MkdeEstimator { inner }));
        Ok(())
    })
}

/// # Safety
/// `est` must be null or a handle from [`mkde_estimator_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mkde_estimator_free(est: *mut MkdeEstimator) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// # Safety
/// `est` must be a live handle; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn mkde_estimator_bandwidth(
    est: *const MkdeEstimator,
    out: *mut f64,
) -> MkdeStatus {
    guard(|| {
        non_null(est, "estimator")?;
        non_null(out, "out")?;
        *out = (*est).inner.config().bandwidth();
        Ok(())
    })
}

/// Density at `n` points; zero outside the unit square.
///
/// # Safety
/// `est` must be a live handle; `u`, `v` must be valid for `n` reads and
/// `out` for `n` writes.
#[no_mangle]
pub unsafe extern "C" fn mkde_estimator_eval(
    est: *const MkdeEstimator,
    u: *const f64,
    v: *const f64,
    n: usize,
    out: *mut f64,
) -> MkdeStatus {
    guard(|| {
        non_null(est, "estimator")?;
        let u = input(u, n, "u")?;
        let v = input(v, n, "v")?;
        if n == 0 {
            return Ok(());
        }
        non_null(out, "out")?;
        let out = slice::from_raw_parts_mut(out, n);
        for ((o, &a), &b) in out.iter_mut().zip(u).zip(v) {
            if !(a.is_finite() && b.is_finite()) {
                set_error(format!("non-finite evaluation point ({a}, {b})"));
                return Err(MkdeStatus::NonFinite);
            }
            *o = (*est).inner.eval(a, b);
        }
        Ok(())
    })
}

/// Density on a `resolution` x `resolution` grid of equally spaced nodes
/// covering [0, 1]², row-major with `u` varying slowest.
///
/// # Safety
/// `est` must be a live handle; `out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn mkde_estimator_grid(
    est: *const MkdeEstimator,
    resolution: usize,
    out: *mut f64,
    len: usize,
) -> MkdeStatus {
    guard(|| {
        non_null(est, "estimator")?;
        let need = resolution.checked_mul(resolution).ok_or_else(|| {
            set_error("resolution overflows");
            MkdeStatus::InvalidArgument
        })?;
        if len < need {
            set_error(format!("buffer holds {len} values, grid needs {need}"));
            return Err(MkdeStatus::BufferTooSmall);
        }
        non_null(out, "out")?;
        let grid = lift((*est).inner.grid(resolution))?;
        ptr::copy_nonoverlapping(grid.values.as_ptr(), out, need);
        Ok(())
    })
}
