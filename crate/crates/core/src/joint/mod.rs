//! Joint chance constraints with right-hand-side uncertainty,
//! `a_i zeta_i <= (T x)_i` for every row, under an independent Gaussian
//! reference.

mod bca;
mod oracle;
mod phi;

pub use bca::{bca_rho, bca_rho_from, envelope_sweep, min_cost, BcaOptions, BcaTrace, Iterate, MinCost, StopReason};
pub use oracle::{initial_point, oracle_max_x, OracleResult, Polytope, DEFAULT_EPS0};
pub use phi::{grad_x_phi, phi, phi_and_grad, PHI_TOL};

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{domain, Error, Result};
use crate::gaussian::{std_cdf, ProbLevel};
use crate::model::{AmbiguitySpec, GaussianReference, SafetySystem};

/// Production planning: capacities `0 <= x <= U` at cost `c' x` must cover
/// random demands `zeta_i ~ N(mu_i, sigma_i^2)` through coverage rows `T_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductionInstance {
    pub t: DMatrix<f64>,
    pub cost: DVector<f64>,
    pub upper: f64,
    pub mean: DVector<f64>,
    pub std: DVector<f64>,
    pub amb: AmbiguitySpec,
    /// Coefficient `a_i` of `zeta_i` in row `i`; all ones once normalized.
    pub row_scale: DVector<f64>,
}

/// One `(x, y)` evaluation of the robustness integral.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiDomainPoint {
    pub x: DVector<f64>,
    pub y: f64,
    pub phi: f64,
    pub in_domain: bool,
}

impl ProductionInstance {
    pub fn new(
        t: DMatrix<f64>,
        cost: DVector<f64>,
        upper: f64,
        mean: DVector<f64>,
        std: DVector<f64>,
        amb: AmbiguitySpec,
    ) -> Result<Self> {
        let m = t.nrows();
        Self::with_row_scale(t, cost, upper, mean, std, amb, DVector::from_element(m, 1.0))
    }

    pub fn with_row_scale(
        t: DMatrix<f64>,
        cost: DVector<f64>,
        upper: f64,
        mean: DVector<f64>,
        std: DVector<f64>,
        amb: AmbiguitySpec,
        row_scale: DVector<f64>,
    ) -> Result<Self> {
        let (m, n) = t.shape();
        if m == 0 || n == 0 {
            return Err(Error::Dimension("coverage matrix is empty".into()));
        }
        if cost.len() != n || mean.len() != m || std.len() != m || row_scale.len() != m {
            return Err(Error::Dimension(format!(
                "T is {m}x{n}; cost {}, mean {}, std {}, row scale {}",
                cost.len(),
                mean.len(),
                std.len(),
                row_scale.len()
            )));
        }
        if let Some(v) = t.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(domain("T", *v, "finite and nonnegative"));
        }
        for i in 0..m {
            if t.row(i).iter().all(|&v| v == 0.0) || row_scale[i] == 0.0 {
                return Err(Error::ZeroRow(i));
            }
        }
        if let Some(v) = cost.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(domain("cost", *v, "finite and nonnegative"));
        }
        if !(upper.is_finite() && upper >= 0.0) {
            return Err(domain("U", upper, "U >= 0"));
        }
        if let Some(v) = std.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(domain("sigma", *v, "sigma > 0"));
        }
        if let Some(v) = row_scale.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(domain("row scale", *v, "positive"));
        }
        Ok(Self {
            t,
            cost,
            upper,
            mean,
            std,
            amb,
            row_scale,
        })
    }

    /// Random instance in the style of the production-planning experiment:
    /// costs uniform on `{1..10}`, means uniform on `[10, 51]`, standard
    /// deviations `0.1 * mean`, and 0/1 coverage with every row nonzero.
    pub fn random(seed: u64, n: usize, m: usize, upper: f64, amb: AmbiguitySpec) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut unit = || (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let cost = DVector::from_fn(n, |_, _| 1.0 + (unit() * 10.0).floor().min(9.0));
        let mean = DVector::from_fn(m, |_, _| 10.0 + 41.0 * unit());
        let mut t = DMatrix::from_fn(m, n, |_, _| if unit() < 0.5 { 1.0 } else { 0.0 });
        for i in 0..m {
            if t.row(i).iter().all(|&v| v == 0.0) {
                let j = ((unit() * n as f64) as usize).min(n - 1);
                t[(i, j)] = 1.0;
            }
        }
        let std = mean.map(|v| 0.1 * v);
        Self::new(t, cost, upper, mean, std, amb)
    }

    pub fn n(&self) -> usize {
        self.t.ncols()
    }

    pub fn m(&self) -> usize {
        self.t.nrows()
    }

    /// Effective coverage `T_i / a_i`.
    pub fn coverage(&self) -> DMatrix<f64> {
        let mut t = self.t.clone();
        for i in 0..self.m() {
            t.row_mut(i).scale_mut(1.0 / self.row_scale[i]);
        }
        t
    }

    /// Normalized right-hand side `b(x) = (T x)_i / a_i`.
    pub fn b(&self, x: &DVector<f64>) -> DVector<f64> {
        let tx = &self.t * x;
        tx.component_div(&self.row_scale)
    }

    pub fn reference(&self) -> GaussianReference {
        GaussianReference::independent(self.mean.clone(), &self.std)
            .expect("standard deviations validated at construction")
    }

    /// Safety system `zeta_i <= b_i(x)` with unit rows.
    pub fn safety(&self) -> SafetySystem {
        SafetySystem::Rhs {
            a: DMatrix::identity(self.m(), self.m()),
            b0: DVector::zeros(self.m()),
            b_lin: self.coverage(),
            normalized: true,
        }
    }

    pub fn polytope(&self, budget: f64) -> Result<Polytope> {
        Polytope::new(self.cost.clone(), self.upper, budget)
    }

    pub fn with_amb(&self, amb: AmbiguitySpec) -> Self {
        Self { amb, ..self.clone() }
    }
}

/// Divide each row through by its `zeta` coefficient so rows have unit norm.
/// Demand statistics are untouched because `zeta` itself is not rescaled.
pub fn normalize_rows(inst: &ProductionInstance) -> Result<ProductionInstance> {
    let mut out = inst.clone();
    for i in 0..inst.m() {
        let a = inst.row_scale[i];
        if a == 0.0 {
            return Err(Error::ZeroRow(i));
        }
        out.t.row_mut(i).scale_mut(1.0 / a);
        out.row_scale[i] = 1.0;
    }
    Ok(out)
}

/// `f(x, zeta) = min_i (b_i(x) - zeta_i)`.
pub fn f_min(inst: &ProductionInstance, x: &DVector<f64>, zeta: &DVector<f64>) -> f64 {
    let b = inst.b(x);
    b.iter()
        .zip(zeta.iter())
        .map(|(bi, zi)| bi - zi)
        .fold(f64::INFINITY, f64::min)
}

#[inline]
pub(crate) fn survival_b(inst: &ProductionInstance, b: &DVector<f64>, t: f64) -> f64 {
    let mut p = 1.0;
    for i in 0..b.len() {
        p *= std_cdf((b[i] - t - inst.mean[i]) / inst.std[i]);
    }
    p
}

/// `P[f(x, zeta) >= t] = prod_i Phi((b_i(x) - t - mu_i) / sigma_i)`.
pub fn survival(inst: &ProductionInstance, x: &DVector<f64>, t: f64) -> f64 {
    survival_b(inst, &inst.b(x), t)
}

pub(crate) fn var_b(inst: &ProductionInstance, b: &DVector<f64>, eps: ProbLevel) -> Result<f64> {
    let target = 1.0 - eps.get();
    let centre = b
        .iter()
        .zip(inst.mean.iter())
        .map(|(bi, mi)| bi - mi)
        .fold(f64::INFINITY, f64::min);
    let spread = 60.0 * inst.std.max();
    let (mut lo, mut hi) = (centre - spread, centre + spread);
    let (slo, shi) = (survival_b(inst, b, lo), survival_b(inst, b, hi));
    if !(slo >= target && shi <= target) {
        return Err(Error::Bracketing(format!(
            "survival {slo} .. {shi} does not cross {target}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if survival_b(inst, b, mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// `VaR_eps(f(x, zeta))`: the `t` with `survival(x, t) = 1 - eps`.
pub fn var_f(inst: &ProductionInstance, x: &DVector<f64>, eps: ProbLevel) -> Result<f64> {
    var_b(inst, &inst.b(x), eps)
}

/// Evaluate `phi` at `(x, y)` and report domain membership.
pub fn phi_point(inst: &ProductionInstance, x: &DVector<f64>, y: f64) -> PhiDomainPoint {
    let in_domain = survival(inst, x, y) >= 1.0 - inst.amb.eps.get();
    PhiDomainPoint {
        x: x.clone(),
        y,
        phi: phi(inst, x, y),
        in_domain,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::std_quantile;

    fn amb() -> AmbiguitySpec {
        AmbiguitySpec::new(0.1, 0.1).unwrap()
    }

    fn single() -> ProductionInstance {
        ProductionInstance::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 1.0),
            10.0,
            DVector::from_element(1, 2.0),
            DVector::from_element(1, 0.5),
            amb(),
        )
        .unwrap()
    }

    #[test]
    fn validation() {
        let zero_row = ProductionInstance::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            DVector::from_element(2, 1.0),
            1.0,
            DVector::from_element(2, 1.0),
            DVector::from_element(2, 1.0),
            amb(),
        );
        assert_eq!(zero_row.unwrap_err(), Error::ZeroRow(1));
        let bad_sigma = ProductionInstance::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 1.0),
            1.0,
            DVector::from_element(1, 1.0),
            DVector::from_element(1, 0.0),
            amb(),
        );
        assert!(bad_sigma.is_err());
    }

    #[test]
    fn f_min_is_row_minimum() {
        let inst = ProductionInstance::random(3, 4, 3, 10.0, amb()).unwrap();
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let zeta = DVector::from_vec(vec![2.0, 1.0, 0.5]);
        let tx = &inst.t * &x;
        let brute = (0..3).map(|i| tx[i] - zeta[i]).fold(f64::INFINITY, f64::min);
        assert_eq!(f_min(&inst, &x, &zeta), brute);
        assert_eq!(f_min(&inst, &x, &tx), 0.0);
    }

    #[test]
    fn single_factor_survival_and_var() {
        let inst = single();
        let x = DVector::from_element(1, 3.0);
        assert!((survival(&inst, &x, 0.4) - std_cdf((3.0 - 0.4 - 2.0) / 0.5)).abs() < 1e-16);
        assert!(survival(&inst, &x, 2.0 - 40.0 * 0.5) >= 1.0 - 1e-10);
        let eps = ProbLevel::new(0.1).unwrap();
        let t = var_f(&inst, &x, eps).unwrap();
        let closed = 3.0 - 2.0 - 0.5 * std_quantile(ProbLevel::new(0.9).unwrap());
        assert!((t - closed).abs() < 1e-10);
        assert!((survival(&inst, &x, t) - 0.9).abs() <= 1e-10);
    }

    #[test]
    fn var_monotone_in_x() {
        let inst = ProductionInstance::random(5, 4, 3, 50.0, amb()).unwrap();
        let eps = ProbLevel::new(0.1).unwrap();
        let x = DVector::from_element(4, 20.0);
        let t0 = var_f(&inst, &x, eps).unwrap();
        let t1 = var_f(&inst, &x.add_scalar(1.0), eps).unwrap();
        assert!(t1 > t0);
    }

    #[test]
    fn normalization_preserves_values() {
        let base = ProductionInstance::random(9, 3, 3, 30.0, amb()).unwrap();
        assert_eq!(normalize_rows(&base).unwrap(), base);
        let mut scaled = base.clone();
        scaled.t.row_mut(1).scale_mut(3.0);
        scaled.row_scale[1] = 3.0;
        let x = DVector::from_element(3, 15.0);
        let n = normalize_rows(&scaled).unwrap();
        assert!((n.t.clone() - base.t.clone()).amax() < 1e-14);
        assert!((phi(&scaled, &x, 2.0) - phi(&base, &x, 2.0)).abs() < 1e-12);
    }
}
