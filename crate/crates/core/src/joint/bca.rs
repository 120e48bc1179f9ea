use nalgebra::DVector;
use rayon::prelude::*;

use super::oracle::{initial_point, oracle_max_x, DEFAULT_EPS0};
use super::phi::phi;
use super::{var_f, ProductionInstance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BcaOptions {
    pub y_tol: f64,
    pub max_iter: usize,
    /// Oracle tolerance at iteration `k` is `eps1 / k`.
    pub eps1: f64,
    pub eps0_sequence: Vec<f64>,
}

impl Default for BcaOptions {
    fn default() -> Self {
        Self {
            y_tol: 1e-6,
            max_iter: 200,
            eps1: 1e-3,
            eps0_sequence: DEFAULT_EPS0.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    YConverged,
    IterationCap,
    InfeasibleStart,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub x: DVector<f64>,
    pub y: f64,
    pub phi: f64,
    /// Oracle tolerance used to produce `x` (0 for the initial point).
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcaTrace {
    pub iterates: Vec<Iterate>,
    pub stop_reason: StopReason,
}

impl BcaTrace {
    pub fn last_x(&self) -> Option<&DVector<f64>> {
        self.iterates.last().map(|it| &it.x)
    }

    /// Number of x-updates performed.
    pub fn iterations(&self) -> usize {
        self.iterates.len().saturating_sub(1)
    }
}

/// `rho(u) = sup {phi(x, y) : x in X, c' x <= u, y >= 0}` by block
/// coordinate ascent: an approximate maximization in `x` followed by the
/// exact update `y = VaR_eps(f(x, zeta))`.
pub fn bca_rho(inst: &ProductionInstance, budget: f64, opts: &BcaOptions) -> Result<(f64, BcaTrace)> {
    bca_rho_from(inst, budget, None, opts)
}

/// [`bca_rho`] warm-started from `start` when it is feasible for the budget
/// and has a positive VaR.
pub fn bca_rho_from(
    inst: &ProductionInstance,
    budget: f64,
    start: Option<&DVector<f64>>,
    opts: &BcaOptions,
) -> Result<(f64, BcaTrace)> {
    let eps = inst.amb.eps;
    let poly = inst.polytope(budget)?;
    let warm = start
        .filter(|x| poly.contains(x, 1e-12))
        .and_then(|x| match var_f(inst, x, eps) {
            Ok(y) if y > 0.0 => Some((x.clone(), y)),
            _ => None,
        });
    let (mut x, mut y) = match warm {
        Some(p) => p,
        None => match initial_point(inst, budget, &opts.eps0_sequence)? {
            Some((x, _)) => {
                let y = var_f(inst, &x, eps)?.max(0.0);
                (x, y)
            }
            None => {
                return Ok((
                    0.0,
                    BcaTrace {
                        iterates: Vec::new(),
                        stop_reason: StopReason::InfeasibleStart,
                    },
                ))
            }
        },
    };
    let mut iterates = vec![Iterate {
        x: x.clone(),
        y,
        phi: phi(inst, &x, y),
        eps: 0.0,
    }];
    let mut stop_reason = StopReason::IterationCap;
    for k in 1..=opts.max_iter {
        let tol = opts.eps1 / k as f64;
        let r = oracle_max_x(inst, y, budget, tol, Some(&x))?;
        let y_next = var_f(inst, &r.x, eps)?.max(0.0);
        x = r.x;
        let dy = (y_next - y).abs();
        y = y_next;
        iterates.push(Iterate {
            x: x.clone(),
            y,
            phi: phi(inst, &x, y),
            eps: tol,
        });
        if dy <= opts.y_tol {
            stop_reason = StopReason::YConverged;
            break;
        }
    }
    let rho = iterates.last().map_or(0.0, |it| it.phi).max(0.0);
    Ok((
        rho,
        BcaTrace {
            iterates,
            stop_reason,
        },
    ))
}

/// `(u, rho(u))` over an increasing budget grid.
///
/// Grid points are solved concurrently; a sequential pass then re-runs any
/// point that falls below its predecessor, warm-started from the
/// predecessor's solution (which is feasible for the larger budget).
pub fn envelope_sweep(inst: &ProductionInstance, grid: &[f64], opts: &BcaOptions) -> Result<Vec<(f64, f64)>> {
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Unsupported("budget grid must be nondecreasing".into()));
    }
    let mut runs: Vec<(f64, Option<DVector<f64>>)> = grid
        .par_iter()
        .map(|&u| bca_rho(inst, u, opts).map(|(r, t)| (r, t.last_x().cloned())))
        .collect::<Result<_>>()?;
    for i in 1..runs.len() {
        if runs[i].0 < runs[i - 1].0 {
            if let Some(prev_x) = runs[i - 1].1.clone() {
                let (r, t) = bca_rho_from(inst, grid[i], Some(&prev_x), opts)?;
                if r >= runs[i].0 {
                    runs[i] = (r, t.last_x().cloned());
                }
            }
        }
    }
    Ok(grid.iter().zip(runs).map(|(&u, (r, _))| (u, r)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinCost {
    pub budget: f64,
    pub x: DVector<f64>,
    pub rho: f64,
    pub tol_u: f64,
}

/// Smallest budget whose risk envelope reaches `inst.amb.delta`, by bisection.
pub fn min_cost(inst: &ProductionInstance, opts: &BcaOptions) -> Result<MinCost> {
    let target = inst.amb.delta;
    if !(target > 0.0) {
        return Err(crate::error::domain("delta", target, "delta > 0"));
    }
    let u_lo = 0.0;
    let u_hi = inst.cost.sum() * inst.upper;
    let tol_u = 1e-4 * (u_hi - u_lo);
    let solve = |u: f64| -> Result<(f64, Option<DVector<f64>>)> {
        let (r, t) = bca_rho(inst, u, opts)?;
        Ok((r, t.last_x().cloned()))
    };
    let (r_hi, x_hi) = solve(u_hi)?;
    if r_hi < target {
        return Err(Error::Unreachable {
            target,
            best: r_hi,
        });
    }
    let (r_lo, x_lo) = solve(u_lo)?;
    if r_lo >= target {
        return Ok(MinCost {
            budget: u_lo,
            x: x_lo.expect("positive rho has an iterate"),
            rho: r_lo,
            tol_u,
        });
    }
    let (mut lo, mut hi) = (u_lo, u_hi);
    let (mut best_rho, mut best_x) = (r_hi, x_hi.expect("positive rho has an iterate"));
    while hi - lo > tol_u {
        let mid = 0.5 * (lo + hi);
        let (r, x) = solve(mid)?;
        if r >= target {
            hi = mid;
            best_rho = r;
            best_x = x.expect("positive rho has an iterate");
        } else {
            lo = mid;
        }
    }
    Ok(MinCost {
        budget: hi,
        x: best_x,
        rho: best_rho,
        tol_u,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{std_cdf, std_pdf, std_quantile, ProbLevel};
    use crate::model::AmbiguitySpec;
    use nalgebra::DMatrix;

    fn single(delta: f64) -> ProductionInstance {
        ProductionInstance::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 1.0),
            8.0,
            DVector::from_element(1, 3.0),
            DVector::from_element(1, 1.0),
            AmbiguitySpec::new(delta, 0.1).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn single_factor_closed_form() {
        let inst = single(0.1);
        let (rho, trace) = bca_rho(&inst, 100.0, &BcaOptions::default()).unwrap();
        assert_eq!(trace.stop_reason, StopReason::YConverged);
        // x = U; y = VaR = U - mu - z_{0.9}; rho = int_0^y (Phi(U - mu - t) - 0.9) dt.
        let z = -std_quantile(ProbLevel::new(0.1).unwrap());
        let d = 8.0 - 3.0;
        let y = d - z;
        let g = |s: f64| s * std_cdf(s) + std_pdf(s);
        let closed = g(d) - g(d - y) - 0.9 * y;
        assert!((rho - closed).abs() < 1e-8, "{rho} vs {closed}");
    }

    #[test]
    fn infeasible_start_gives_zero() {
        let inst = single(0.1);
        let (rho, trace) = bca_rho(&inst, 1.0, &BcaOptions::default()).unwrap();
        assert_eq!(rho, 0.0);
        assert_eq!(trace.stop_reason, StopReason::InfeasibleStart);
    }

    #[test]
    fn min_cost_boundaries() {
        let inst = single(1e3);
        assert!(matches!(
            min_cost(&inst, &BcaOptions::default()),
            Err(Error::Unreachable { .. })
        ));
        let mut free = single(0.01);
        free.mean[0] = -10.0;
        let r = min_cost(&free, &BcaOptions::default()).unwrap();
        assert_eq!(r.budget, 0.0);
    }

    #[test]
    fn min_cost_single_factor() {
        let inst = single(0.2);
        let opts = BcaOptions::default();
        let r = min_cost(&inst, &opts).unwrap();
        assert!(r.rho >= 0.2);
        let (below, _) = bca_rho(&inst, r.budget - r.tol_u, &opts).unwrap();
        assert!(below < 0.2);
    }
}
