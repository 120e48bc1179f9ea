//! Sample-based certificates for the pessimistic and optimistic chance
//! constraints, computed from distances to the safe and unsafe sets.
//!
//! Pessimistic statistic: `delta/eps + CVaR_eps(-dist(zeta, unsafe set))`,
//! which must be `<= 0`. Optimistic statistic:
//! `CVaR_{1-eps}(-dist(zeta, safe set)) + delta/(1-eps)`, which must be
//! `>= 0`. Here `CVaR_t(V)` is the mean of the upper `t`-tail of `V`.
//! Standard errors come from a nonparametric bootstrap.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::ProbLevel;
use crate::individual::{IndividualInstance, PortfolioInstance};
use crate::joint::ProductionInstance;
use crate::model::{AmbiguitySpec, GaussianReference, SafetySystem};
use crate::rng::{map_samples, resample_indices};

pub const BOOTSTRAP_RESAMPLES: u64 = 200;
/// Half-width of the indeterminate band, in standard errors.
pub const BAND: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Pass,
    Fail,
    Indeterminate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Indeterminate => "indeterminate",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub statistic: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub verdict: Verdict,
    pub seed: u64,
}

impl Certificate {
    pub const HEADER: &'static str = "statistic,std_error,n_samples,verdict,seed";

    /// `statistic,std_error,n_samples,verdict,seed`, without newline.
    pub fn record(&self) -> String {
        format!(
            "{},{},{},{},{}",
            crate::csv::num(self.statistic),
            crate::csv::num(self.std_error),
            self.n_samples,
            self.verdict,
            self.seed
        )
    }
}

/// Anything with a Gaussian reference and an affine safety system.
pub trait Certifiable {
    fn safety_system(&self) -> SafetySystem;
    fn reference_law(&self) -> GaussianReference;
    fn ambiguity(&self) -> AmbiguitySpec;
}

impl Certifiable for IndividualInstance {
    fn safety_system(&self) -> SafetySystem {
        self.safety()
    }
    fn reference_law(&self) -> GaussianReference {
        self.reference.clone()
    }
    fn ambiguity(&self) -> AmbiguitySpec {
        self.amb
    }
}

impl Certifiable for PortfolioInstance {
    fn safety_system(&self) -> SafetySystem {
        self.to_individual().safety()
    }
    fn reference_law(&self) -> GaussianReference {
        self.reference.clone()
    }
    fn ambiguity(&self) -> AmbiguitySpec {
        self.amb
    }
}

impl Certifiable for ProductionInstance {
    fn safety_system(&self) -> SafetySystem {
        self.safety()
    }
    fn reference_law(&self) -> GaussianReference {
        self.reference()
    }
    fn ambiguity(&self) -> AmbiguitySpec {
        self.amb
    }
}

/// Rows at a fixed `x`, split into scaled non-degenerate rows and the
/// verdict of the degenerate ones.
struct Rows {
    /// `(a_i / ||a_i||_*, b_i / ||a_i||_*)`.
    scaled: Vec<(DVector<f64>, f64)>,
    /// Some degenerate row has `b_i < 0`.
    always_unsafe: bool,
}

impl Rows {
    fn new(safety: &SafetySystem, x: &DVector<f64>) -> Self {
        let mut scaled = Vec::new();
        let mut always_unsafe = false;
        for (a, b) in safety.rows(x) {
            let n = safety.dual_norm(&a);
            if n > 0.0 {
                scaled.push((a / n, b / n));
            } else if b < 0.0 {
                always_unsafe = true;
            }
        }
        Self {
            scaled,
            always_unsafe,
        }
    }

    fn dist_unsafe(&self, zeta: &DVector<f64>) -> f64 {
        if self.always_unsafe {
            return 0.0;
        }
        self.scaled
            .iter()
            .map(|(a, b)| b - a.dot(zeta))
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }
}

/// Distance from `zeta` to the unsafe set `{xi : some a_i(x)' xi > b_i(x)}`.
///
/// Rows with `a_i(x) = 0` do not depend on `xi`: they are ignored when
/// `b_i(x) >= 0` and make every point unsafe otherwise. With no
/// non-degenerate rows left the unsafe set is empty and the distance is
/// infinite.
pub fn dist_unsafe(safety: &SafetySystem, x: &DVector<f64>, zeta: &DVector<f64>) -> f64 {
    Rows::new(safety, x).dist_unsafe(zeta)
}

enum SafeSet {
    Halfspace(DVector<f64>, f64),
    Box(DVector<f64>),
    Empty,
    Everything,
}

impl SafeSet {
    fn new(safety: &SafetySystem, x: &DVector<f64>) -> Result<Self> {
        let rows = safety.rows(x);
        let halfspace = |a: DVector<f64>, b: f64| {
            let n = safety.dual_norm(&a);
            if n > 0.0 {
                SafeSet::Halfspace(a / n, b / n)
            } else if b >= 0.0 {
                SafeSet::Everything
            } else {
                SafeSet::Empty
            }
        };
        match safety {
            SafetySystem::Individual { .. } => {
                let (a, b) = rows.into_iter().next().expect("one row");
                Ok(halfspace(a, b))
            }
            SafetySystem::Rhs { a, .. } if a.nrows() == 1 => {
                let (a, b) = rows.into_iter().next().expect("one row");
                Ok(halfspace(a, b))
            }
            SafetySystem::Rhs { a, .. } if a.is_square() && *a == DMatrix::identity(a.nrows(), a.ncols()) => {
                Ok(SafeSet::Box(DVector::from_iterator(
                    rows.len(),
                    rows.into_iter().map(|(_, b)| b),
                )))
            }
            SafetySystem::Rhs { .. } => Err(Error::Unsupported(
                "distance to the safe set needs one row or A = I".into(),
            )),
        }
    }

    fn dist(&self, zeta: &DVector<f64>) -> f64 {
        match self {
            SafeSet::Halfspace(a, b) => (a.dot(zeta) - b).max(0.0),
            SafeSet::Box(b) => zeta
                .iter()
                .zip(b.iter())
                .map(|(z, b)| (z - b).max(0.0).powi(2))
                .sum::<f64>()
                .sqrt(),
            SafeSet::Empty => f64::INFINITY,
            SafeSet::Everything => 0.0,
        }
    }
}

/// Distance from `zeta` to the safe set `{xi : A(x) xi <= b(x)}`; supported
/// for a single row and for `A = I`.
pub fn dist_safe(safety: &SafetySystem, x: &DVector<f64>, zeta: &DVector<f64>) -> Result<f64> {
    Ok(SafeSet::new(safety, x)?.dist(zeta))
}

/// Empirical `CVaR_tail`: `gamma + mean((v - gamma)^+) / tail` with `gamma`
/// the `ceil((1 - tail) N)`-th order statistic.
///
/// # Panics
/// If `values` is empty.
pub fn empirical_cvar(values: &[f64], tail: ProbLevel) -> f64 {
    assert!(!values.is_empty(), "empirical_cvar of an empty sample");
    let mut buf = values.to_vec();
    cvar_in_place(&mut buf, values, tail.get())
}

fn cvar_in_place(scratch: &mut [f64], values: &[f64], tail: f64) -> f64 {
    let n = values.len();
    let nf = n as f64;
    // Guard against (1 - tail) N landing just above an integer.
    let k = (((1.0 - tail) * nf - 1e-9 * nf).ceil() as usize).clamp(1, n);
    let (_, gamma, _) = scratch.select_nth_unstable_by(k - 1, f64::total_cmp);
    let gamma = *gamma;
    let excess: f64 = values.iter().map(|v| (v - gamma).max(0.0)).sum();
    gamma + excess / (nf * tail)
}

/// CVaR with its bootstrap standard error.
fn cvar_with_se(values: &[f64], tail: f64, seed: u64) -> (f64, f64) {
    let mut scratch = values.to_vec();
    let point = cvar_in_place(&mut scratch, values, tail);
    let n = values.len();
    let reps: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .into_par_iter()
        .map(|r| {
            let mut idx = Vec::with_capacity(n);
            resample_indices(seed, r, n, &mut idx);
            let sample: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
            let mut scratch = sample.clone();
            cvar_in_place(&mut scratch, &sample, tail)
        })
        .collect();
    let b = reps.len() as f64;
    let mean = reps.iter().sum::<f64>() / b;
    let var = reps.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (b - 1.0);
    (point, var.sqrt())
}

fn verdict(statistic: f64, se: f64, feasible_below: bool) -> Verdict {
    let s = if feasible_below { -statistic } else { statistic };
    if s > BAND * se {
        Verdict::Pass
    } else if s < -BAND * se {
        Verdict::Fail
    } else {
        Verdict::Indeterminate
    }
}

fn check_x(len: usize, safety: &SafetySystem) -> Result<()> {
    let expected = match safety {
        SafetySystem::Individual { b_lin, .. } => b_lin.len(),
        SafetySystem::Rhs { b_lin, .. } => b_lin.ncols(),
    };
    if len != expected {
        return Err(Error::Dimension(format!("x has length {len}, expected {expected}")));
    }
    Ok(())
}

fn certify_with(
    values: Vec<f64>,
    tail: f64,
    shift: f64,
    feasible_below: bool,
    n_samples: usize,
    seed: u64,
) -> Certificate {
    // Degenerate rows make the distance constant in zeta, possibly infinite.
    let (statistic, std_error) = if let Some(&inf) = values.iter().find(|v| v.is_infinite()) {
        (inf, 0.0)
    } else {
        let (c, se) = cvar_with_se(&values, tail, seed);
        (c + shift, se)
    };
    Certificate {
        statistic,
        std_error,
        n_samples,
        verdict: verdict(statistic, std_error, feasible_below),
        seed,
    }
}

/// Certificate for the pessimistic constraint; passes when the statistic is
/// below zero by more than three standard errors.
pub fn certify_pess<I: Certifiable + ?Sized>(inst: &I, x: &DVector<f64>, n_samples: usize, seed: u64) -> Result<Certificate> {
    if n_samples < 2 {
        return Err(crate::error::domain("n_samples", n_samples as f64, "at least 2"));
    }
    let safety = inst.safety_system();
    check_x(x.len(), &safety)?;
    let amb = inst.ambiguity();
    let rows = Rows::new(&safety, x);
    let values = map_samples(&inst.reference_law(), n_samples, seed, |z| -rows.dist_unsafe(z));
    let eps = amb.eps.get();
    Ok(certify_with(values, eps, amb.delta / eps, true, n_samples, seed))
}

/// Certificate for the optimistic constraint; passes when the statistic is
/// above zero by more than three standard errors.
pub fn certify_opt<I: Certifiable + ?Sized>(inst: &I, x: &DVector<f64>, n_samples: usize, seed: u64) -> Result<Certificate> {
    if n_samples < 2 {
        return Err(crate::error::domain("n_samples", n_samples as f64, "at least 2"));
    }
    let safety = inst.safety_system();
    check_x(x.len(), &safety)?;
    let amb = inst.ambiguity();
    let set = SafeSet::new(&safety, x)?;
    let values = map_samples(&inst.reference_law(), n_samples, seed, |z| -set.dist(z));
    let keep = 1.0 - amb.eps.get();
    Ok(certify_with(values, keep, amb.delta / keep, false, n_samples, seed))
}
