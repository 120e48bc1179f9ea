use nalgebra::DVector;

use super::phi::phi_and_grad;
use super::{survival_b, ProductionInstance};
use crate::error::{Error, Result};
use crate::gaussian::{log_std_cdf, pdf_over_cdf};

/// Default feasibility thresholds tried in order by [`initial_point`].
pub const DEFAULT_EPS0: [f64; 6] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

const ARMIJO_BETA: f64 = 0.5;
const ARMIJO_SIGMA: f64 = 1e-4;
const MAX_STEPS: usize = 50_000;
const DOMAIN_SLACK: f64 = 1e-12;
const PHI_FLOOR: f64 = 1e-300;

/// `{0 <= x <= U, c' x <= u}` with `c >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    cost: DVector<f64>,
    upper: f64,
    budget: f64,
}

impl Polytope {
    pub fn new(cost: DVector<f64>, upper: f64, budget: f64) -> Result<Self> {
        if budget < 0.0 || !budget.is_finite() || cost.iter().any(|&c| c < 0.0) || upper < 0.0 {
            return Err(Error::EmptyPolytope);
        }
        Ok(Self {
            cost,
            upper,
            budget,
        })
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    fn clip(&self, v: &DVector<f64>, lambda: f64) -> DVector<f64> {
        DVector::from_fn(v.len(), |j, _| {
            (v[j] - lambda * self.cost[j]).clamp(0.0, self.upper)
        })
    }

    /// Euclidean projection; the halfspace multiplier is found by bisection
    /// and the feasible end of the final bracket is returned.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        let x = self.clip(v, 0.0);
        if self.cost.dot(&x) <= self.budget {
            return x;
        }
        let mut hi = v
            .iter()
            .zip(self.cost.iter())
            .filter(|(_, &c)| c > 0.0)
            .map(|(&vj, &c)| vj / c)
            .fold(0.0f64, f64::max);
        let mut lo = 0.0;
        // At `hi` every priced coordinate is clipped to zero.
        while self.cost.dot(&self.clip(v, hi)) > self.budget {
            hi = 2.0 * hi + 1.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cost.dot(&self.clip(v, mid)) > self.budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.clip(v, hi)
    }

    /// `max {g' z : z in the polytope}` (fractional knapsack).
    pub fn linear_max(&self, g: &DVector<f64>) -> f64 {
        let mut value = 0.0;
        let mut left = self.budget;
        let mut priced: Vec<usize> = Vec::new();
        for j in 0..g.len() {
            if g[j] <= 0.0 {
                continue;
            }
            if self.cost[j] == 0.0 {
                value += g[j] * self.upper;
            } else {
                priced.push(j);
            }
        }
        priced.sort_by(|&a, &b| (g[b] / self.cost[b]).total_cmp(&(g[a] / self.cost[a])));
        for j in priced {
            if left <= 0.0 {
                break;
            }
            let take = self.upper.min(left / self.cost[j]);
            value += g[j] * take;
            left -= take * self.cost[j];
        }
        value
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.iter().all(|&v| v >= -tol && v <= self.upper + tol) && self.cost.dot(x) <= self.budget + tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub x: DVector<f64>,
    pub value: f64,
    pub steps: usize,
    /// Norm of the unit-step gradient mapping at `x`.
    pub grad_map_norm: f64,
    /// Frank-Wolfe gap of the ascended (concave) objective at `x`.
    pub dual_gap: f64,
}

/// Projected gradient ascent with Barzilai-Borwein trial steps and Armijo
/// backtracking. `eval` returns `None` outside the domain; `done` receives
/// the point, value and Frank-Wolfe gap.
fn ascend<E, S>(poly: &Polytope, x0: DVector<f64>, eval: E, done: S) -> Option<OracleResult>
where
    E: Fn(&DVector<f64>) -> Option<(f64, DVector<f64>)>,
    S: Fn(&DVector<f64>, f64, f64) -> bool,
{
    let mut x = x0;
    let (mut f, mut g) = eval(&x)?;
    let mut step = 1.0;
    let mut prev: Option<(DVector<f64>, DVector<f64>)> = None;
    let mut steps = 0;
    loop {
        let gm_norm = (&poly.project(&(&x + &g)) - &x).norm();
        let gap = (poly.linear_max(&g) - g.dot(&x)).max(0.0);
        if steps >= MAX_STEPS || done(&x, f, gap) {
            return Some(OracleResult {
                x,
                value: f,
                steps,
                grad_map_norm: gm_norm,
                dual_gap: gap,
            });
        }
        if let Some((px, pg)) = &prev {
            let s = &x - px;
            let yv = &g - pg;
            let sy = -s.dot(&yv);
            if sy > 0.0 {
                step = (s.dot(&s) / sy).clamp(1e-12, 1e12);
            }
        }
        let mut accepted = None;
        let mut a = step;
        while a > 1e-20 {
            let cand = poly.project(&(&x + &g * a));
            if let Some((fc, gc)) = eval(&cand) {
                if fc >= f + ARMIJO_SIGMA * g.dot(&(&cand - &x)) {
                    accepted = Some((cand, fc, gc, a));
                    break;
                }
            }
            a *= ARMIJO_BETA;
        }
        steps += 1;
        match accepted {
            Some((cand, fc, gc, a)) => {
                prev = Some((std::mem::replace(&mut x, cand), std::mem::replace(&mut g, gc)));
                f = fc;
                step = a;
            }
            None => {
                return Some(OracleResult {
                    x,
                    value: f,
                    steps,
                    grad_map_norm: gm_norm,
                    dual_gap: gap,
                })
            }
        }
    }
}

/// Approximate maximizer of `phi(., y)` over the budget polytope, by ascent
/// on `ln phi` inside `dom phi = {x : survival(x, y) >= 1 - eps}`.
///
/// Stops once `phi(x) (exp(gap) - 1) <= tol`, where `gap` is the
/// Frank-Wolfe gap of `ln phi`; by concavity of `ln phi` this bounds
/// `max phi - phi(x)`.
///
/// `start` must lie in the domain; otherwise the projection of `U 1` is
/// tried.
pub fn oracle_max_x(
    inst: &ProductionInstance,
    y: f64,
    budget: f64,
    tol: f64,
    start: Option<&DVector<f64>>,
) -> Result<OracleResult> {
    let poly = inst.polytope(budget)?;
    let level = 1.0 - inst.amb.eps.get();
    let in_domain = |x: &DVector<f64>| survival_b(inst, &inst.b(x), y) >= level - DOMAIN_SLACK;
    let x0 = match start {
        Some(s) if poly.contains(s, 1e-12) && in_domain(s) => poly.project(s),
        _ => {
            let top = poly.project(&DVector::from_element(inst.n(), inst.upper));
            if !in_domain(&top) {
                return Err(Error::Infeasible(format!(
                    "no starting point with survival >= {level} at y = {y}"
                )));
            }
            top
        }
    };
    let eval = |x: &DVector<f64>| {
        if !in_domain(x) {
            return None;
        }
        let (p, g) = phi_and_grad(inst, x, y);
        let p = p.max(PHI_FLOOR);
        Some((p.ln(), g / p))
    };
    let done = |_: &DVector<f64>, lnphi: f64, gap: f64| lnphi.exp() * gap.exp_m1() <= tol;
    let mut r = ascend(&poly, x0, eval, done)
        .ok_or_else(|| Error::NoConvergence("oracle start left the domain".into()))?;
    r.value = r.value.exp();
    Ok(r)
}

/// A point with `survival(x, eps0) >= 1 - eps` for the first workable
/// `eps0`, or `None` when every threshold fails.
pub fn initial_point(inst: &ProductionInstance, budget: f64, eps0_sequence: &[f64]) -> Result<Option<(DVector<f64>, f64)>> {
    let poly = inst.polytope(budget)?;
    let level = 1.0 - inst.amb.eps.get();
    let coverage = inst.coverage();
    let start = poly.project(&DVector::from_element(inst.n(), inst.upper));
    for &e0 in eps0_sequence {
        // ln survival(x, e0) is concave in x.
        let eval = |x: &DVector<f64>| {
            let b = inst.b(x);
            let mut v = 0.0;
            let mut db = DVector::zeros(inst.m());
            for i in 0..inst.m() {
                let z = (b[i] - e0 - inst.mean[i]) / inst.std[i];
                v += log_std_cdf(z);
                db[i] = pdf_over_cdf(z) / inst.std[i];
            }
            Some((v, coverage.transpose() * db))
        };
        let feasible = |x: &DVector<f64>| survival_b(inst, &inst.b(x), e0) >= level;
        let done = |_: &DVector<f64>, _: f64, gap: f64| gap <= 1e-10;
        if let Some(r) = ascend(&poly, start.clone(), eval, done) {
            if feasible(&r.x) {
                return Ok(Some((r.x, e0)));
            }
        }
    }
    Ok(None)
}
