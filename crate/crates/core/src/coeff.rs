//! Second-order-cone coefficients for individual chance constraints with a
//! Gaussian reference, and the watershed curve where the optimistic
//! coefficient vanishes.

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::gaussian::{std_pdf, std_quantile, ProbLevel};

/// Distance kept from the open ends of the search interval.
const EDGE: f64 = 1e-9;
/// Golden-section stops once the bracket is this narrow.
const GOLDEN_TOL: f64 = 1e-7;
/// Absolute tolerance on the optimizer `eps'`.
pub const ARG_TOL: f64 = 1e-10;
/// Allowed gap between the closed-form and root-found watershed.
pub const WATERSHED_CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffResult {
    pub c: f64,
    pub argopt_eps_prime: f64,
    pub iterations: usize,
    /// Absolute value of the stationarity function at `argopt_eps_prime`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WatershedPoint {
    pub eps: f64,
    pub delta_star: f64,
}

/// Which side of the Wasserstein ball the constraint quantifies over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Pessimistic,
    Optimistic,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pessimistic" | "pess" => Ok(Mode::Pessimistic),
            "optimistic" | "opt" => Ok(Mode::Optimistic),
            other => Err(Error::Unsupported(format!("mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Pessimistic => "pessimistic",
            Mode::Optimistic => "optimistic",
        })
    }
}

#[inline]
fn q(p: f64) -> f64 {
    std_quantile(ProbLevel::new(p).expect("search point inside (0, 1)"))
}

/// Upper quantile `z_{1-p}`, evaluated as `-z_p` to keep precision for small `p`.
#[inline]
fn upper_q(p: f64) -> f64 {
    -q(p)
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, iters: &mut usize) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > GOLDEN_TOL {
        *iters += 1;
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    (lo, hi)
}

/// Bisection for the sign change of an increasing function `g` on `[lo, hi]`.
/// Returns the clipped endpoint when `g` does not change sign.
fn bisect_increasing<G: Fn(f64) -> f64>(g: G, mut lo: f64, mut hi: f64, iters: &mut usize) -> f64 {
    if g(lo) >= 0.0 {
        return lo;
    }
    if g(hi) <= 0.0 {
        return hi;
    }
    while hi - lo > ARG_TOL {
        *iters += 1;
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Widen a golden-section bracket until the derivative sign straddles it.
fn straddle<G: Fn(f64) -> f64>(g: &G, lo: f64, hi: f64, a: f64, b: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (lo, hi);
    let mut w = (hi - lo).max(GOLDEN_TOL);
    while g(lo) > 0.0 && lo > a {
        lo = (lo - w).max(a);
        w *= 2.0;
    }
    let mut w = (hi - lo).max(GOLDEN_TOL);
    while g(hi) < 0.0 && hi < b {
        hi = (hi + w).min(b);
        w *= 2.0;
    }
    (lo, hi)
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && delta > 0.0 {
        Ok(())
    } else {
        Err(domain("delta", delta, "delta > 0"))
    }
}

/// Pessimistic coefficient
/// `c_p = inf_{0 < e' < eps} (delta + pdf(z_{1-eps}) - pdf(z_{1-e'})) / (eps - e')`.
pub fn c_pess(eps: ProbLevel, delta: f64) -> Result<CoeffResult> {
    let e = eps.get();
    if e > 0.5 {
        return Err(domain("eps", e, "0 < eps <= 0.5"));
    }
    check_delta(delta)?;
    let base = std_pdf(upper_q(e));
    let objective = |ep: f64| (delta + base - std_pdf(upper_q(ep))) / (e - ep);
    // Derivative numerator of the quotient; increasing in e'.
    let stationarity = |ep: f64| -upper_q(ep) * (e - ep) + delta + base - std_pdf(upper_q(ep));

    let (a, b) = (EDGE.min(0.5 * e), e - EDGE.min(0.5 * e));
    let mut iterations = 0;
    let (lo, hi) = golden_min(objective, a, b, &mut iterations);
    let (lo, hi) = straddle(&stationarity, lo, hi, a, b);
    let ep = bisect_increasing(stationarity, lo, hi, &mut iterations);
    Ok(CoeffResult {
        c: objective(ep),
        argopt_eps_prime: ep,
        iterations,
        residual: stationarity(ep).abs(),
    })
}

/// Optimistic coefficient
/// `c_o = sup_{eps < e' < 1} (-delta + pdf(z_{e'}) - pdf(z_eps)) / (e' - eps)`.
pub fn c_opt(eps: ProbLevel, delta: f64) -> Result<CoeffResult> {
    let e = eps.get();
    check_delta(delta)?;
    let base = std_pdf(q(e));
    let objective = |ep: f64| (-delta + std_pdf(q(ep)) - base) / (ep - e);
    // Negated derivative numerator; increasing in e'.
    let neg_stationarity = |ep: f64| q(ep) * (ep - e) - delta + std_pdf(q(ep)) - base;

    let room = EDGE.min(0.5 * (1.0 - e));
    let (a, b) = (e + room, 1.0 - room);
    let mut iterations = 0;
    let (lo, hi) = golden_min(|ep| -objective(ep), a, b, &mut iterations);
    let (lo, hi) = straddle(&neg_stationarity, lo, hi, a, b);
    let ep = bisect_increasing(neg_stationarity, lo, hi, &mut iterations);
    Ok(CoeffResult {
        c: objective(ep),
        argopt_eps_prime: ep,
        iterations,
        residual: neg_stationarity(ep).abs(),
    })
}

/// Coefficient for `mode`; `delta = 0` gives the nominal Gaussian quantile.
pub fn coefficient(mode: Mode, eps: ProbLevel, delta: f64) -> Result<f64> {
    if delta == 0.0 {
        return Ok(upper_q(eps.get()));
    }
    match mode {
        Mode::Pessimistic => c_pess(eps, delta).map(|r| r.c),
        Mode::Optimistic => c_opt(eps, delta).map(|r| r.c),
    }
}

fn check_watershed_eps(eps: ProbLevel) -> Result<f64> {
    let e = eps.get();
    if e < 0.5 {
        Ok(e)
    } else {
        Err(domain("eps", e, "0 < eps < 0.5"))
    }
}

/// Closed form `delta* = pdf(0) - pdf(z_eps)`.
pub fn watershed_closed_form(eps: ProbLevel) -> Result<f64> {
    let e = check_watershed_eps(eps)?;
    Ok(std_pdf(0.0) - std_pdf(q(e)))
}

/// `delta*` by bisection on `delta` for `c_opt(eps, delta) = 0`.
pub fn watershed_root(eps: ProbLevel) -> Result<f64> {
    check_watershed_eps(eps)?;
    // c_opt is nonincreasing in delta, positive near 0 and negative at pdf(0).
    let (mut lo, mut hi) = (0.0, std_pdf(0.0));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-13 {
            break;
        }
        if c_opt(eps, mid)?.c > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The watershed point at `eps`, cross-checked against root-finding.
pub fn watershed(eps: ProbLevel) -> Result<WatershedPoint> {
    let closed = watershed_closed_form(eps)?;
    let root = watershed_root(eps)?;
    if (closed - root).abs() > WATERSHED_CHECK_TOL {
        return Err(Error::CrossCheck(format!(
            "watershed at eps = {}: closed form {closed} vs root {root}",
            eps.get()
        )));
    }
    Ok(WatershedPoint {
        eps: eps.get(),
        delta_star: closed,
    })
}

/// [`watershed`] over a strictly increasing grid, evaluated concurrently.
pub fn watershed_sweep(grid: &[ProbLevel]) -> Result<Vec<WatershedPoint>> {
    if grid.windows(2).any(|w| w[1].get() <= w[0].get()) {
        return Err(Error::Unsupported(
            "watershed grid must be strictly increasing".into(),
        ));
    }
    grid.par_iter().map(|&e| watershed(e)).collect()
}
