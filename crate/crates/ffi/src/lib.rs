//! C ABI for `wasscc`.
//!
//! Every fallible call returns a [`WassccStatus`] and writes results through
//! out-pointers. On failure, [`wasscc_last_error`] returns a message for the
//! calling thread. Instances are opaque handles created by `*_new` functions
//! and released with the matching `*_free`. Matrices are dense and row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use nalgebra::{DMatrix, DVector};
use wasscc::certify::{certify_opt, certify_pess, Certificate, Verdict};
use wasscc::coeff::{coefficient, watershed_closed_form, Mode};
use wasscc::gaussian::{gaussian_cvar, std_cdf, std_quantile, ProbLevel};
use wasscc::individual::{solve_portfolio, PortfolioInstance, PortfolioOptions};
use wasscc::joint::{bca_rho, min_cost, BcaOptions, ProductionInstance};
use wasscc::model::AmbiguitySpec;
use wasscc::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WassccStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    NotPositiveDefinite = 4,
    Infeasible = 5,
    NoConvergence = 6,
    NonConvex = 7,
    Unreachable = 8,
    Unsupported = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WassccMode {
    Pessimistic = 0,
    Optimistic = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WassccVerdict {
    Pass = 0,
    Fail = 1,
    Indeterminate = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WassccCertificate {
    pub statistic: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub verdict: WassccVerdict,
    pub seed: u64,
}

/// Opaque portfolio instance.
pub struct WassccPortfolio {
    inner: PortfolioInstance,
}

/// Opaque production planning instance.
pub struct WassccProduction {
    inner: ProductionInstance,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> WassccStatus {
    match e {
        Error::InvalidLevel(_) | Error::Domain { .. } | Error::Bracketing(_) | Error::CrossCheck(_) => {
            WassccStatus::InvalidArgument
        }
        Error::Dimension(_) | Error::ZeroRow(_) => WassccStatus::Dimension,
        Error::NotPositiveDefinite(_) => WassccStatus::NotPositiveDefinite,
        Error::Infeasible(_) | Error::EmptyPolytope => WassccStatus::Infeasible,
        Error::NoConvergence(_) => WassccStatus::NoConvergence,
        Error::NonConvex(_) => WassccStatus::NonConvex,
        Error::Unreachable { .. } => WassccStatus::Unreachable,
        Error::Unsupported(_) => WassccStatus::Unsupported,
    }
}

/// Run `f`, translating errors and panics into a status.
fn guard<F>(f: F) -> WassccStatus
where
    F: FnOnce() -> Result<(), (WassccStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WassccStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            WassccStatus::Panic
        }
    }
}

fn lib(e: Error) -> (WassccStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (WassccStatus, String) {
    (WassccStatus::NullPointer, format!("`{name}` is null"))
}

unsafe fn read<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], (WassccStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, (WassccStatus, String)> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn write_vec(v: &DVector<f64>, p: *mut f64, len: usize, name: &str) -> Result<(), (WassccStatus, String)> {
    if len != v.len() {
        return Err((
            WassccStatus::Dimension,
            format!("`{name}` has length {len}, expected {}", v.len()),
        ));
    }
    if len > 0 {
        if p.is_null() {
            return Err(null(name));
        }
        slice::from_raw_parts_mut(p, len).copy_from_slice(v.as_slice());
    }
    Ok(())
}

fn mode(m: WassccMode) -> Mode {
    match m {
        WassccMode::Pessimistic => Mode::Pessimistic,
        WassccMode::Optimistic => Mode::Optimistic,
    }
}

fn certificate(c: Certificate) -> WassccCertificate {
    WassccCertificate {
        statistic: c.statistic,
        std_error: c.std_error,
        n_samples: c.n_samples as u64,
        verdict: match c.verdict {
            Verdict::Pass => WassccVerdict::Pass,
            Verdict::Fail => WassccVerdict::Fail,
            Verdict::Indeterminate => WassccVerdict::Indeterminate,
        },
        seed: c.seed,
    }
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn wasscc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wasscc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn wasscc_std_cdf(z: f64) -> f64 {
    std_cdf(z)
}

/// # Safety
/// `out` must be null or point to writable memory for one `double`.
#[no_mangle]
pub unsafe extern "C" fn wasscc_std_quantile(p: f64, out: *mut f64) -> WassccStatus {
    guard(|| {
        let o = out_ref(out, "out")?;
        *o = std_quantile(ProbLevel::new(p).map_err(lib)?);
        Ok(())
    })
}

/// # Safety
/// `out` must be null or point to writable memory for one `double`.
#[no_mangle]
pub unsafe extern "C" fn wasscc_gaussian_cvar(tail: f64, out: *mut f64) -> WassccStatus {
    guard(|| {
        let o = out_ref(out, "out")?;
        *o = gaussian_cvar(ProbLevel::new(tail).map_err(lib)?);
        Ok(())
    })
}

/// SOC coefficient for risk level `eps` and radius `delta`.
///
/// # Safety
/// `out` must be null or point to writable memory for one `double`.
#[no_mangle]
pub unsafe extern "C" fn wasscc_coefficient(m: WassccMode, eps: f64, delta: f64, out: *mut f64) -> WassccStatus {
    guard(|| {
        let o = out_ref(out, "out")?;
        *o = coefficient(mode(m), ProbLevel::new(eps).map_err(lib)?, delta).map_err(lib)?;
        Ok(())
    })
}

/// Radius at which the optimistic coefficient vanishes.
///
/// # Safety
/// `out` must be null or point to writable memory for one `double`.
#[no_mangle]
pub unsafe extern "C" fn wasscc_watershed(eps: f64, out: *mut f64) -> WassccStatus {
    guard(|| {
        let o = out_ref(out, "out")?;
        *o = watershed_closed_form(ProbLevel::new(eps).map_err(lib)?).map_err(lib)?;
        Ok(())
    })
}

/// Portfolio over `n` risky assets with mean returns `mean[n]` and
/// covariance `cov[n*n]`, plus a deposit paying `riskless_rate` when
/// `has_deposit` is nonzero.
///
/// # Safety
/// `mean` and `cov` must point to `n` and `n*n` readable doubles; `out` must
/// be null or writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn wasscc_portfolio_new(
    n: usize,
    mean: *const f64,
    cov: *const f64,
    has_deposit: bool,
    riskless_rate: f64,
    target_return: f64,
    eps: f64,
    delta: f64,
    out: *mut *mut WassccPortfolio,
) -> WassccStatus {
    guard(|| {
        let o = out_ref(out, "out")?;
        let mean = DVector::from_column_slice(read(mean, n, "mean")?);
        let cov = DMatrix::from_row_slice(n, n, read(cov, n * n, "cov")?);
        let amb = AmbiguitySpec::new(delta, eps).map_err(lib)?;
        let inner = PortfolioInstance::new(mean, cov, has_deposit.then_some(riskless_rate), target_return, amb)
            .map_err(lib)?;
        *o = Box::into_raw(Box::new(WassccPortfolio { inner }));
        Ok(())
    })
}

/// The eleven-asset reference portfolio (deposit plus ten stocks).
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn wasscc_portfolio_paper(eps: f64, delta: f64, out: *mut *mut WassccPortfolio) -> WassccStatus {
    guard(|| {
        let o = out_ref(out, "out")?;
        let inner = PortfolioInstance::paper(delta, eps).map_err(lib)?;
        *o = Box::into_raw(Box::new(WassccPortfolio { inner }));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from `wasscc_portfolio_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wasscc_portfolio_free(p: *mut WassccPortfolio) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Length of an allocation vector, deposit included; 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wasscc_portfolio_n_assets(p: *const WassccPortfolio) -> usize {
    p.as_ref().map_or(0, |p| p.inner.n_assets())
}

/// Solve for the return-maximizing allocation; writes `len` weights.
///
/// # Safety
/// `p` must be a live handle; `alloc` must hold `len` writable doubles and
/// `objective` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn wasscc_portfolio_solve(
    p: *const WassccPortfolio,
    m: WassccMode,
    alloc: *mut f64,
    len: usize,
    objective: *mut f64,
) -> WassccStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("p"))?;
        let sol = solve_portfolio(&p.inner, mode(m), 1e-8, PortfolioOptions::default()).map_err(lib)?;
        write_vec(&sol.allocation, alloc, len, "alloc")?;
        if let Some(o) = objective.as_mut() {
            *o = sol.objective;
        }
        Ok(())
    })
}

/// Sample-based certificate for allocation `x[len]`.
///
/// # Safety
/// `p` must be a live handle, `x` must hold `len` readable doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn wasscc_portfolio_certify(
    p: *const WassccPortfolio,
    m: WassccMode,
    x: *const f64,
    len: usize,
    n_samples: u64,
    seed: u64,
    out: *mut WassccCertificate,
) -> WassccStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("p"))?;
        let o = out_ref(out, "out")?;
        let x = DVector::from_column_slice(read(x, len, "x")?);
        let n = n_samples as usize;
        let c = match m {
            WassccMode::Pessimistic => certify_pess(&p.inner, &x, n, seed),
            WassccMode::Optimistic => certify_opt(&p.inner, &x, n, seed),
        }
        .map_err(lib)?;
        *o = certificate(c);
        Ok(())
    })
}

/// Production planning instance: coverage `t[m*n]`, costs `cost[n]`,
/// capacity bound `upper`, demand means `mean[m]` and deviations `std[m]`.
///
/// # Safety
/// Array arguments must hold the stated number of readable doubles; `out`
/// must be null or writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn wasscc_production_new(
    n: usize,
    m: usize,
    t: *const f64,
    cost: *const f64,
    upper: f64,
    mean: *const f64,
    std: *const f64,
    eps: f64,
    delta: f64,
    out: *mut *mut WassccProduction,
) -> WassccStatus {
    guard(|| {
        let o = out_ref(out, "out")?;
        let t = DMatrix::from_row_slice(m, n, read(t, m * n, "t")?);
        let cost = DVector::from_column_slice(read(cost, n, "cost")?);
        let mean = DVector::from_column_slice(read(mean, m, "mean")?);
        let std = DVector::from_column_slice(read(std, m, "std")?);
        let amb = AmbiguitySpec::new(delta, eps).map_err(lib)?;
        let inner = ProductionInstance::new(t, cost, upper, mean, std, amb).map_err(lib)?;
        *o = Box::into_raw(Box::new(WassccProduction { inner }));
        Ok(())
    })
}

/// Random instance with `n` products and `m` demands.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn wasscc_production_random(
    seed: u64,
    n: usize,
    m: usize,
    upper: f64,
    eps: f64,
    delta: f64,
    out: *mut *mut WassccProduction,
) -> WassccStatus {
    guard(|| {
        let o = out_ref(out, "out")?;
        let amb = AmbiguitySpec::new(delta, eps).map_err(lib)?;
        let inner = ProductionInstance::random(seed, n, m, upper, amb).map_err(lib)?;
        *o = Box::into_raw(Box::new(WassccProduction { inner }));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from `wasscc_production_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wasscc_production_free(p: *mut WassccProduction) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of products; 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wasscc_production_n(p: *const WassccProduction) -> usize {
    p.as_ref().map_or(0, |p| p.inner.n())
}

/// Largest radius reachable with budget `budget`; the plan is written to
/// `x[len]` when `x` is non-null (left untouched if no plan exists).
///
/// # Safety
/// `p` must be a live handle, `rho` writable, `x` null or `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn wasscc_production_rho(
    p: *const WassccProduction,
    budget: f64,
    rho: *mut f64,
    x: *mut f64,
    len: usize,
) -> WassccStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("p"))?;
        let r = out_ref(rho, "rho")?;
        let (value, trace) = bca_rho(&p.inner, budget, &BcaOptions::default()).map_err(lib)?;
        *r = value;
        if !x.is_null() {
            if let Some(last) = trace.last_x() {
                write_vec(last, x, len, "x")?;
            }
        }
        Ok(())
    })
}

/// Cheapest budget whose radius reaches the instance's `delta`.
///
/// # Safety
/// `p` must be a live handle, `budget` writable, `x` null or `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn wasscc_production_min_cost(
    p: *const WassccProduction,
    budget: *mut f64,
    x: *mut f64,
    len: usize,
) -> WassccStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("p"))?;
        let b = out_ref(budget, "budget")?;
        let r = min_cost(&p.inner, &BcaOptions::default()).map_err(lib)?;
        *b = r.budget;
        if !x.is_null() {
            write_vec(&r.x, x, len, "x")?;
        }
        Ok(())
    })
}

/// Sample-based certificate for plan `x[len]`.
///
/// # Safety
/// `p` must be a live handle, `x` must hold `len` readable doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn wasscc_production_certify(
    p: *const WassccProduction,
    m: WassccMode,
    x: *const f64,
    len: usize,
    n_samples: u64,
    seed: u64,
    out: *mut WassccCertificate,
) -> WassccStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("p"))?;
        let o = out_ref(out, "out")?;
        let x = DVector::from_column_slice(read(x, len, "x")?);
        let n = n_samples as usize;
        let c = match m {
            WassccMode::Pessimistic => certify_pess(&p.inner, &x, n, seed),
            WassccMode::Optimistic => certify_opt(&p.inner, &x, n, seed),
        }
        .map_err(lib)?;
        *o = certificate(c);
        Ok(())
    })
}
