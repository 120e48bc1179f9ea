//! Individual chance constraints with a Gaussian reference: SOC membership
//! and the mean-return portfolio model.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::{DMatrix, DVector};

use crate::coeff::{coefficient, Mode};
use crate::error::{Error, Result};
use crate::model::{AmbiguitySpec, DualNorm, GaussianReference, SafetySystem};

/// `a(x)' xi <= b(x)` with `xi ~ N(mu, Sigma)`, `a(x) = a0 + A_lin x` and
/// `b(x) = b0 + b_lin' x`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndividualInstance {
    pub reference: GaussianReference,
    pub a0: DVector<f64>,
    pub a_lin: DMatrix<f64>,
    pub b0: f64,
    pub b_lin: DVector<f64>,
    pub amb: AmbiguitySpec,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    pub feasible: bool,
    pub margin: f64,
    pub coefficient: f64,
}

impl IndividualInstance {
    pub fn new(
        reference: GaussianReference,
        a0: DVector<f64>,
        a_lin: DMatrix<f64>,
        b0: f64,
        b_lin: DVector<f64>,
        amb: AmbiguitySpec,
    ) -> Result<Self> {
        let d = reference.dim();
        if a0.len() != d || a_lin.nrows() != d || a_lin.ncols() != b_lin.len() {
            return Err(Error::Dimension(format!(
                "a0: {}, A_lin: {}x{}, b_lin: {}, reference dimension {d}",
                a0.len(),
                a_lin.nrows(),
                a_lin.ncols(),
                b_lin.len()
            )));
        }
        Ok(Self {
            reference,
            a0,
            a_lin,
            b0,
            b_lin,
            amb,
        })
    }

    pub fn n_decisions(&self) -> usize {
        self.b_lin.len()
    }

    pub fn a(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a0 + &self.a_lin * x
    }

    pub fn b(&self, x: &DVector<f64>) -> f64 {
        self.b0 + self.b_lin.dot(x)
    }

    /// `||Sigma^{1/2} a||_2`.
    pub fn scale(&self, a: &DVector<f64>) -> f64 {
        (self.reference.sqrt_cov() * a).norm()
    }

    /// `b(x) - a(x)' mu - c ||Sigma^{1/2} a(x)||_2`.
    pub fn margin_with(&self, x: &DVector<f64>, c: f64) -> f64 {
        let a = self.a(x);
        let s = self.scale(&a);
        let b = self.b(x);
        if s == 0.0 && a.iter().all(|&v| v == 0.0) {
            return b;
        }
        b - a.dot(self.reference.mean()) - c * s
    }

    pub fn safety(&self) -> SafetySystem {
        SafetySystem::Individual {
            a0: self.a0.clone(),
            a_lin: self.a_lin.clone(),
            b0: self.b0,
            b_lin: self.b_lin.clone(),
            norm: DualNorm::Weighted(self.reference.sqrt_cov().clone()),
        }
    }
}

/// SOC membership of `x` in the pessimistic or optimistic region.
pub fn soc_membership(inst: &IndividualInstance, x: &DVector<f64>, mode: Mode) -> Result<Membership> {
    if x.len() != inst.n_decisions() {
        return Err(Error::Dimension(format!(
            "x has length {}, expected {}",
            x.len(),
            inst.n_decisions()
        )));
    }
    let c = coefficient(mode, inst.amb.eps, inst.amb.delta)?;
    let margin = inst.margin_with(x, c);
    Ok(Membership {
        feasible: margin >= 0.0,
        margin,
        coefficient: c,
    })
}

/// Maximize expected return subject to a Wasserstein chance constraint on
/// `sum_i R_i x_i >= eta`, over the probability simplex.
///
/// An optional riskless asset (column `F`) enters the right-hand side of
/// the safety inequality rather than the random vector, so the risky
/// covariance stays positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioInstance {
    pub reference: GaussianReference,
    pub riskless_rate: Option<f64>,
    pub target_return: f64,
    pub amb: AmbiguitySpec,
}

impl PortfolioInstance {
    pub fn new(
        mean_returns: DVector<f64>,
        covariance: DMatrix<f64>,
        riskless_rate: Option<f64>,
        target_return: f64,
        amb: AmbiguitySpec,
    ) -> Result<Self> {
        if !target_return.is_finite() {
            return Err(crate::error::domain("eta", target_return, "finite"));
        }
        if covariance.diagonal().iter().any(|&v| !(v > 0.0)) {
            return Err(Error::NotPositiveDefinite(
                "covariance diagonal must be positive".into(),
            ));
        }
        Ok(Self {
            reference: GaussianReference::new(mean_returns, covariance)?,
            riskless_rate,
            target_return,
            amb,
        })
    }

    /// Eleven-asset instance: a deposit `F` with rate 1 and stocks
    /// `R_i = R_{0,i} + r`, `R_{0,i} ~ N(1 + 0.01 i, (0.03 i)^2)`,
    /// market effect `r ~ N(0, 0.01^2)`; `eta = 1`.
    pub fn paper(delta: f64, eps: f64) -> Result<Self> {
        Self::paper_subset(&(1..=10).collect::<Vec<_>>(), true, delta, eps)
    }

    /// The same model restricted to the listed stock indices (1-based).
    pub fn paper_subset(stocks: &[usize], with_deposit: bool, delta: f64, eps: f64) -> Result<Self> {
        let k = stocks.len();
        let mean = DVector::from_iterator(k, stocks.iter().map(|&i| 1.0 + 0.01 * i as f64));
        let cov = DMatrix::from_fn(k, k, |r, c| {
            let market = 1e-4;
            if r == c {
                let s = 0.03 * stocks[r] as f64;
                s * s + market
            } else {
                market
            }
        });
        Self::new(
            mean,
            cov,
            with_deposit.then_some(1.0),
            1.0,
            AmbiguitySpec::new(delta, eps)?,
        )
    }

    pub fn n_risky(&self) -> usize {
        self.reference.dim()
    }

    /// Number of allocation entries, including `F` when present.
    pub fn n_assets(&self) -> usize {
        self.n_risky() + usize::from(self.riskless_rate.is_some())
    }

    /// Column labels: `F` (if present) followed by `S1..Sn`.
    pub fn labels(&self) -> Vec<String> {
        let mut v = Vec::with_capacity(self.n_assets());
        if self.riskless_rate.is_some() {
            v.push("F".to_string());
        }
        v.extend((1..=self.n_risky()).map(|i| format!("S{i}")));
        v
    }

    fn offset(&self) -> usize {
        usize::from(self.riskless_rate.is_some())
    }

    /// Expected return of each allocation entry.
    pub fn gains(&self) -> DVector<f64> {
        let mut g = DVector::zeros(self.n_assets());
        if let Some(r) = self.riskless_rate {
            g[0] = r;
        }
        g.rows_mut(self.offset(), self.n_risky())
            .copy_from(self.reference.mean());
        g
    }

    fn risky<'a>(&self, x: &'a DVector<f64>) -> nalgebra::DVectorView<'a, f64> {
        x.rows(self.offset(), self.n_risky())
    }

    /// `||Sigma^{1/2} x_S||_2`.
    pub fn risk(&self, x: &DVector<f64>) -> f64 {
        (self.reference.sqrt_cov() * self.risky(x)).norm()
    }

    /// `r_F x_F + mu' x_S - eta - c ||Sigma^{1/2} x_S||_2`.
    pub fn margin_with(&self, x: &DVector<f64>, c: f64) -> f64 {
        self.gains().dot(x) - self.target_return - c * self.risk(x)
    }

    /// Equivalent individual instance with `a(x) = -x_S` and
    /// `b(x) = -eta + r_F x_F`.
    pub fn to_individual(&self) -> IndividualInstance {
        let n = self.n_assets();
        let k = self.n_risky();
        let off = self.offset();
        let mut a_lin = DMatrix::zeros(k, n);
        for i in 0..k {
            a_lin[(i, off + i)] = -1.0;
        }
        let mut b_lin = DVector::zeros(n);
        if let Some(r) = self.riskless_rate {
            b_lin[0] = r;
        }
        IndividualInstance {
            reference: self.reference.clone(),
            a0: DVector::zeros(k),
            a_lin,
            b0: -self.target_return,
            b_lin,
            amb: self.amb,
        }
    }
}

/// Solver multipliers in the sign convention `-g + nu 1 - w - lambda g - c [0; S z] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicDuals {
    pub eq: f64,
    pub nonneg: DVector<f64>,
    pub soc_head: f64,
    pub soc_tail: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioSolution {
    pub allocation: DVector<f64>,
    pub objective: f64,
    pub margin: f64,
    pub coefficient: f64,
    /// More than one allocation attains the optimum and the constraint is slack.
    pub degenerate: bool,
    pub duals: Option<ConicDuals>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PortfolioOptions {
    /// Permit a reverse-convex optimistic region (`c_o < 0`) and solve it by
    /// enumeration over the 1e-3 simplex grid; at most three assets.
    pub allow_nonconvex: bool,
}

const GRID_STEP: usize = 1000;

pub fn solve_portfolio(
    inst: &PortfolioInstance,
    mode: Mode,
    tol: f64,
    opts: PortfolioOptions,
) -> Result<PortfolioSolution> {
    let c = coefficient(mode, inst.amb.eps, inst.amb.delta)?;
    if c < 0.0 {
        if !opts.allow_nonconvex {
            return Err(Error::NonConvex(format!(
                "optimistic coefficient {c} is negative; pass the non-convex override (n <= 3)"
            )));
        }
        if inst.n_assets() > 3 {
            return Err(Error::Unsupported(format!(
                "non-convex enumeration needs at most 3 assets, got {}",
                inst.n_assets()
            )));
        }
        return grid_solve(inst, c);
    }
    conic_solve(inst, c, tol)
}

fn conic_solve(inst: &PortfolioInstance, c: f64, tol: f64) -> Result<PortfolioSolution> {
    let n = inst.n_assets();
    let k = inst.n_risky();
    let off = inst.offset();
    let g = inst.gains();
    let s = inst.reference.sqrt_cov();

    let (mut ri, mut ci, mut vals) = (Vec::new(), Vec::new(), Vec::new());
    let mut push = |r: usize, col: usize, v: f64| {
        if v != 0.0 {
            ri.push(r);
            ci.push(col);
            vals.push(v);
        }
    };
    for j in 0..n {
        push(0, j, 1.0);
        push(1 + j, j, -1.0);
        push(1 + n, j, -g[j]);
    }
    for r in 0..k {
        for j in 0..k {
            push(2 + n + r, off + j, -c * s[(r, j)]);
        }
    }
    let rows = 2 + n + k;
    let a = CscMatrix::new_from_triplets(rows, n, ri, ci, vals);
    let mut b = vec![0.0; rows];
    b[0] = 1.0;
    b[1 + n] = -inst.target_return;
    let p = CscMatrix::zeros((n, n));
    let q: Vec<f64> = g.iter().map(|v| -v).collect();
    let cones = [
        SupportedConeT::ZeroConeT(1),
        SupportedConeT::NonnegativeConeT(n),
        SupportedConeT::SecondOrderConeT(1 + k),
    ];
    let settings = DefaultSettings {
        verbose: false,
        presolve_enable: false,
        tol_gap_abs: 1e-11,
        tol_gap_rel: 1e-11,
        tol_feas: 1e-11,
        max_iter: 400,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
        .map_err(|e| Error::NoConvergence(format!("solver setup: {e:?}")))?;
    solver.solve();
    let sol = &solver.solution;
    match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {}
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            return Err(Error::Infeasible(
                "no simplex point satisfies the return constraint".into(),
            ))
        }
        other => return Err(Error::NoConvergence(format!("solver status {other:?}"))),
    }

    let mut x = DVector::from_iterator(n, sol.x.iter().map(|&v| if v < 1e-9 { 0.0 } else { v }));
    let total = x.sum();
    if !(total > 0.0) {
        return Err(Error::NoConvergence("solver returned a null allocation".into()));
    }
    x /= total;
    let margin = inst.margin_with(&x, c);
    if margin < -tol {
        return Err(Error::NoConvergence(format!(
            "returned allocation violates the constraint by {}",
            -margin
        )));
    }
    let objective = g.dot(&x);
    let gmax = g.max();
    let degenerate = margin > tol && g.iter().filter(|&&v| v >= gmax - 1e-12).count() > 1;
    let z = &sol.z;
    let duals = ConicDuals {
        eq: z[0],
        nonneg: DVector::from_column_slice(&z[1..1 + n]),
        soc_head: z[1 + n],
        soc_tail: DVector::from_column_slice(&z[2 + n..rows]),
    };
    Ok(PortfolioSolution {
        allocation: x,
        objective,
        margin,
        coefficient: c,
        degenerate,
        duals: Some(duals),
    })
}

/// Best feasible point of the `1/GRID_STEP` simplex grid (n <= 3).
fn grid_solve(inst: &PortfolioInstance, c: f64) -> Result<PortfolioSolution> {
    let n = inst.n_assets();
    let g = inst.gains();
    let h = 1.0 / GRID_STEP as f64;
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut consider = |x: DVector<f64>| {
        if inst.margin_with(&x, c) >= 0.0 {
            let obj = g.dot(&x);
            if best.as_ref().is_none_or(|(b, _)| obj > *b) {
                best = Some((obj, x));
            }
        }
    };
    match n {
        1 => consider(DVector::from_element(1, 1.0)),
        2 => {
            for i in 0..=GRID_STEP {
                let a = i as f64 * h;
                consider(DVector::from_vec(vec![a, 1.0 - a]));
            }
        }
        3 => {
            for i in 0..=GRID_STEP {
                for j in 0..=GRID_STEP - i {
                    let (a, b) = (i as f64 * h, j as f64 * h);
                    consider(DVector::from_vec(vec![a, b, (1.0 - a - b).max(0.0)]));
                }
            }
        }
        _ => unreachable!("guarded by the caller"),
    }
    let (objective, x) = best.ok_or_else(|| {
        Error::Infeasible("no simplex grid point satisfies the return constraint".into())
    })?;
    Ok(PortfolioSolution {
        margin: inst.margin_with(&x, c),
        allocation: x,
        objective,
        coefficient: c,
        degenerate: false,
        duals: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    pub stationarity: f64,
    pub complementarity: f64,
    pub dual_feasibility: f64,
    pub primal_violation: f64,
    pub ok: bool,
}

/// First-order optimality of `sol` at tolerance `tol`.
///
/// Away from the cone apex the multipliers are recomputed from the gradient
/// of the constraint; at the apex (no risky holdings) the solver's conic
/// multipliers are checked instead.
pub fn kkt_check(inst: &PortfolioInstance, sol: &PortfolioSolution, tol: f64) -> KktReport {
    let x = &sol.allocation;
    let c = sol.coefficient;
    let primal_violation = (-sol.margin).max(0.0)
        + (x.sum() - 1.0).abs()
        + x.iter().map(|&v| (-v).max(0.0)).sum::<f64>();
    let risk = inst.risk(x);
    let (stationarity, complementarity, dual_feasibility) = if risk > 1e-7 {
        smooth_kkt(inst, x, c, sol.margin, risk, tol)
    } else if let Some(d) = &sol.duals {
        conic_kkt(inst, x, c, sol.margin, d)
    } else {
        (f64::INFINITY, f64::INFINITY, f64::INFINITY)
    };
    KktReport {
        stationarity,
        complementarity,
        dual_feasibility,
        primal_violation,
        ok: stationarity <= tol
            && complementarity <= tol
            && dual_feasibility <= tol
            && primal_violation <= tol,
    }
}

/// Multipliers `(lambda, nu)` with `g + lambda h = nu` on the support and
/// `g + lambda h <= nu` off it, where `h` is the constraint gradient.
fn smooth_kkt(
    inst: &PortfolioInstance,
    x: &DVector<f64>,
    c: f64,
    margin: f64,
    risk: f64,
    tol: f64,
) -> (f64, f64, f64) {
    let n = x.len();
    let off = inst.offset();
    let g = inst.gains();
    let cov = inst.reference.cov();
    let sx = cov * x.rows(off, inst.n_risky());
    let mut h = g.clone();
    for i in 0..inst.n_risky() {
        h[off + i] -= c * sx[i] / risk;
    }
    let support: Vec<usize> = (0..n).filter(|&j| x[j] > 1e-9).collect();
    let active = margin.abs() <= tol;

    let residuals = |lambda: f64, nu: f64| -> (f64, f64) {
        let mut stat: f64 = 0.0;
        let mut dual: f64 = (-lambda).max(0.0);
        for j in 0..n {
            let r = g[j] + lambda * h[j] - nu;
            if x[j] > 1e-9 {
                stat = stat.max(r.abs());
            } else {
                dual = dual.max(r);
            }
        }
        (stat, dual)
    };

    if !active {
        let nu = support.iter().map(|&j| g[j]).fold(f64::NEG_INFINITY, f64::max);
        let (stat, dual) = residuals(0.0, nu);
        return (stat, 0.0, dual);
    }

    if support.len() >= 2 {
        // Least squares for g_j + lambda h_j - nu = 0 over the support.
        let m = support.len();
        let a = DMatrix::from_fn(m, 2, |r, col| if col == 0 { h[support[r]] } else { -1.0 });
        let rhs = DVector::from_iterator(m, support.iter().map(|&j| -g[j]));
        let ata = a.transpose() * &a;
        if let Some(inv) = ata.try_inverse() {
            let sol = inv * a.transpose() * rhs;
            let (stat, dual) = residuals(sol[0], sol[1]);
            return (stat, (sol[0] * margin).abs(), dual);
        }
    }

    // Single support point: any lambda >= 0 making every off-support
    // (g_j - g_s) + lambda (h_j - h_s) <= 0 works.
    let s = support[0];
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for j in (0..n).filter(|&j| j != s) {
        let (dg, dh) = (g[j] - g[s], h[j] - h[s]);
        if dh > 0.0 {
            hi = hi.min(-dg / dh);
        } else if dh < 0.0 {
            lo = lo.max(-dg / dh);
        } else if dg > 0.0 {
            hi = f64::NEG_INFINITY;
        }
    }
    let lambda = if lo <= hi { lo } else { 0.5 * (lo + hi) };
    let nu = g[s] + lambda * h[s];
    let (stat, dual) = residuals(lambda, nu);
    (stat, (lambda * margin).abs(), dual)
}

fn conic_kkt(
    inst: &PortfolioInstance,
    x: &DVector<f64>,
    c: f64,
    margin: f64,
    d: &ConicDuals,
) -> (f64, f64, f64) {
    let off = inst.offset();
    let g = inst.gains();
    let tail = inst.reference.sqrt_cov() * &d.soc_tail;
    let mut r = -&g * (1.0 + d.soc_head) - &d.nonneg;
    r.add_scalar_mut(d.eq);
    for i in 0..inst.n_risky() {
        r[off + i] -= c * tail[i];
    }
    let stationarity = r.amax();
    let compl = d
        .nonneg
        .iter()
        .zip(x.iter())
        .map(|(w, v)| (w * v).abs())
        .fold((d.soc_head * margin).abs(), f64::max);
    let dual = d
        .nonneg
        .iter()
        .map(|&w| (-w).max(0.0))
        .fold((d.soc_tail.norm() - d.soc_head).max(0.0), f64::max);
    (stationarity, compl, dual)
}
