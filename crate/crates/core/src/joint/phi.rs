use nalgebra::DVector;

use super::{survival_b, ProductionInstance};
use crate::gaussian::{std_cdf, std_pdf};
use crate::quadrature::{adaptive_simpson, adaptive_simpson_vec};

/// Absolute quadrature tolerance for `phi` and its gradient.
pub const PHI_TOL: f64 = 1e-9;
const MAX_DEPTH: u32 = 20;

/// `phi(x, y) = int_0^y (P[f(x, zeta) >= t] - (1 - eps)) dt`.
pub fn phi(inst: &ProductionInstance, x: &DVector<f64>, y: f64) -> f64 {
    let b = inst.b(x);
    phi_b(inst, &b, y)
}

pub(crate) fn phi_b(inst: &ProductionInstance, b: &DVector<f64>, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let level = 1.0 - inst.amb.eps.get();
    adaptive_simpson(|t| survival_b(inst, b, t) - level, 0.0, y, PHI_TOL, MAX_DEPTH)
}

/// `phi(x, y)` and its gradient in `x`, from one vector quadrature of the
/// integrand and its partial derivatives in `b`.
pub fn phi_and_grad(inst: &ProductionInstance, x: &DVector<f64>, y: f64) -> (f64, DVector<f64>) {
    let n = inst.n();
    if y <= 0.0 {
        return (0.0, DVector::zeros(n));
    }
    let m = inst.m();
    let b = inst.b(x);
    let level = 1.0 - inst.amb.eps.get();
    let integrand = |t: f64, out: &mut [f64]| {
        let mut cdf = vec![0.0; m];
        let mut pdf = vec![0.0; m];
        for i in 0..m {
            let z = (b[i] - t - inst.mean[i]) / inst.std[i];
            cdf[i] = std_cdf(z);
            pdf[i] = std_pdf(z) / inst.std[i];
        }
        // Products of all factors but one, via prefix and suffix products.
        let mut prefix = 1.0;
        for i in 0..m {
            out[1 + i] = prefix;
            prefix *= cdf[i];
        }
        out[0] = prefix - level;
        let mut suffix = 1.0;
        for i in (0..m).rev() {
            out[1 + i] *= suffix * pdf[i];
            suffix *= cdf[i];
        }
    };
    let v = adaptive_simpson_vec(integrand, 0.0, y, 1 + m, PHI_TOL, MAX_DEPTH);
    let db = DVector::from_column_slice(&v[1..]);
    let grad = inst.coverage().transpose() * db;
    (v[0], grad)
}

pub fn grad_x_phi(inst: &ProductionInstance, x: &DVector<f64>, y: f64) -> DVector<f64> {
    phi_and_grad(inst, x, y).1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::ProbLevel;
    use crate::joint::var_f;
    use crate::model::AmbiguitySpec;
    use nalgebra::DMatrix;

    fn inst() -> ProductionInstance {
        ProductionInstance::random(11, 4, 3, 60.0, AmbiguitySpec::new(0.5, 0.15).unwrap()).unwrap()
    }

    #[test]
    fn zero_length_integral() {
        let p = inst();
        let x = DVector::from_element(4, 30.0);
        assert_eq!(phi(&p, &x, 0.0), 0.0);
        assert_eq!(grad_x_phi(&p, &x, 0.0), DVector::zeros(4));
    }

    #[test]
    fn var_maximizes_phi() {
        let p = inst();
        let x = DVector::from_element(4, 40.0);
        let v = var_f(&p, &x, ProbLevel::new(0.15).unwrap()).unwrap();
        let at = phi(&p, &x, v);
        for dy in [-1.0, -0.1, 0.1, 1.0] {
            assert!(phi(&p, &x, v + dy) <= at + 1e-9);
        }
    }

    #[test]
    fn gradient_matches_value_and_ignores_unused_columns() {
        let mut p = inst();
        p.t.column_mut(2).fill(0.0);
        let x = DVector::from_element(4, 40.0);
        let (v, g) = phi_and_grad(&p, &x, 5.0);
        assert!((v - phi(&p, &x, 5.0)).abs() < 1e-9);
        assert_eq!(g[2], 0.0);
        assert!(g.iter().all(|&c| c >= 0.0));
    }

    #[test]
    fn single_factor_closed_form() {
        // int_0^y Phi((b - t - mu)/s) dt = s [G((b - mu)/s) - G((b - mu - y)/s)],
        // G(z) = z Phi(z) + pdf(z).
        let p = ProductionInstance::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 1.0),
            10.0,
            DVector::from_element(1, 2.0),
            DVector::from_element(1, 0.7),
            AmbiguitySpec::new(0.1, 0.2).unwrap(),
        )
        .unwrap();
        let x = DVector::from_element(1, 5.0);
        let y = 1.5;
        let g = |z: f64| z * std_cdf(z) + std_pdf(z);
        let closed = 0.7 * (g(3.0 / 0.7) - g((3.0 - y) / 0.7)) - 0.8 * y;
        assert!((phi(&p, &x, y) - closed).abs() < 1e-10);
    }
}
