//! Shared data: the Gaussian reference, the Wasserstein ball and the affine
//! safety system.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{domain, Error, Result};
use crate::gaussian::ProbLevel;

/// Radius and risk level of the ambiguity set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbiguitySpec {
    pub delta: f64,
    pub eps: ProbLevel,
}

impl AmbiguitySpec {
    /// `delta = 0` is accepted and denotes the nominal (reference-only) constraint.
    pub fn new(delta: f64, eps: f64) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(domain("delta", delta, "delta >= 0"));
        }
        Ok(Self {
            delta,
            eps: ProbLevel::new(eps)?,
        })
    }
}

/// Multivariate Gaussian reference `N(mean, cov)` with its symmetric square root.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianReference {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    sqrt_cov: DMatrix<f64>,
}

impl GaussianReference {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::Dimension(format!(
                "mean has length {}, covariance is {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        let sqrt_cov = sym_sqrt(&cov)?;
        Ok(Self {
            mean,
            cov,
            sqrt_cov,
        })
    }

    /// Independent components with the given standard deviations.
    pub fn independent(mean: DVector<f64>, std: &DVector<f64>) -> Result<Self> {
        if let Some(i) = std.iter().position(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(domain("sigma", std[i], "sigma > 0"));
        }
        let cov = DMatrix::from_diagonal(&std.map(|s| s * s));
        Self::new(mean, cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Symmetric `Sigma^{1/2}`.
    pub fn sqrt_cov(&self) -> &DMatrix<f64> {
        &self.sqrt_cov
    }
}

/// Symmetric positive-definite square root by eigendecomposition.
///
/// Eigenvalues at or below `1e-12 * trace` are reported as rank deficiency.
pub fn sym_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if m.ncols() != n || n == 0 {
        return Err(Error::Dimension(format!(
            "covariance must be square and nonempty, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite("non-finite entry".into()));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::NotPositiveDefinite("matrix is not symmetric".into()));
    }
    let trace = m.trace();
    let eig = SymmetricEigen::new(m.clone());
    let min = eig.eigenvalues.min();
    if !(trace > 0.0) || min <= 1e-12 * trace {
        return Err(Error::NotPositiveDefinite(format!(
            "smallest eigenvalue {min:e} with trace {trace:e}"
        )));
    }
    let root = eig.eigenvalues.map(f64::sqrt);
    let v = &eig.eigenvectors;
    let s = v * DMatrix::from_diagonal(&root) * v.transpose();
    Ok((&s + s.transpose()) * 0.5)
}

/// Dual of the norm used by the Wasserstein distance.
#[derive(Debug, Clone, PartialEq)]
pub enum DualNorm {
    /// `||a||_2`.
    Euclidean,
    /// `||W a||_2`; with `W = Sigma^{1/2}` this is the dual of the
    /// `Sigma^{-1/2}`-weighted 2-norm.
    Weighted(DMatrix<f64>),
}

impl DualNorm {
    pub fn eval(&self, a: &DVector<f64>) -> f64 {
        match self {
            DualNorm::Euclidean => a.norm(),
            DualNorm::Weighted(w) => (w * a).norm(),
        }
    }
}

/// Affine safety system `A(x) zeta <= b(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum SafetySystem {
    /// One inequality `a(x)' zeta <= b(x)` with `a(x) = a0 + A_lin x`,
    /// `b(x) = b0 + b_lin' x`.
    Individual {
        a0: DVector<f64>,
        a_lin: DMatrix<f64>,
        b0: f64,
        b_lin: DVector<f64>,
        norm: DualNorm,
    },
    /// Fixed rows `a_i' zeta <= b0_i + (B x)_i`.
    Rhs {
        a: DMatrix<f64>,
        b0: DVector<f64>,
        b_lin: DMatrix<f64>,
        normalized: bool,
    },
}

impl SafetySystem {
    /// Rows `(a_i(x), b_i(x))` at decision `x`.
    pub fn rows(&self, x: &DVector<f64>) -> Vec<(DVector<f64>, f64)> {
        match self {
            SafetySystem::Individual {
                a0, a_lin, b0, b_lin, ..
            } => vec![(a0 + a_lin * x, b0 + b_lin.dot(x))],
            SafetySystem::Rhs { a, b0, b_lin, .. } => {
                let b = b0 + b_lin * x;
                (0..a.nrows())
                    .map(|i| (a.row(i).transpose(), b[i]))
                    .collect()
            }
        }
    }

    pub fn dual_norm(&self, a: &DVector<f64>) -> f64 {
        match self {
            SafetySystem::Individual { norm, .. } => norm.eval(a),
            SafetySystem::Rhs { .. } => a.norm(),
        }
    }

    /// Rescale every RHS row to unit 2-norm on both sides.
    pub fn normalized(self) -> Result<Self> {
        match self {
            SafetySystem::Rhs {
                mut a,
                mut b0,
                mut b_lin,
                ..
            } => {
                for i in 0..a.nrows() {
                    let n = a.row(i).norm();
                    if n == 0.0 {
                        return Err(Error::ZeroRow(i));
                    }
                    a.row_mut(i).scale_mut(1.0 / n);
                    b0[i] /= n;
                    b_lin.row_mut(i).scale_mut(1.0 / n);
                }
                Ok(SafetySystem::Rhs {
                    a,
                    b0,
                    b_lin,
                    normalized: true,
                })
            }
            other => Ok(other),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_squares_back() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let s = sym_sqrt(&m).unwrap();
        assert!((&s * &s - &m).amax() < 1e-13);
    }

    #[test]
    fn sqrt_rejects_singular_and_asymmetric() {
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(sym_sqrt(&singular), Err(Error::NotPositiveDefinite(_))));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(sym_sqrt(&asym).is_err());
    }

    #[test]
    fn ambiguity_validation() {
        assert!(AmbiguitySpec::new(-1.0, 0.1).is_err());
        assert!(AmbiguitySpec::new(0.1, 1.5).is_err());
        assert!(AmbiguitySpec::new(0.0, 0.1).is_ok());
    }

    #[test]
    fn rhs_normalization() {
        let sys = SafetySystem::Rhs {
            a: DMatrix::from_row_slice(2, 2, &[3.0, 4.0, 0.0, 2.0]),
            b0: DVector::from_vec(vec![5.0, 2.0]),
            b_lin: DMatrix::from_row_slice(2, 1, &[10.0, 4.0]),
            normalized: false,
        };
        let n = sys.normalized().unwrap();
        let rows = n.rows(&DVector::from_vec(vec![1.0]));
        assert!((rows[0].0.norm() - 1.0).abs() < 1e-15);
        assert!((rows[0].1 - 3.0).abs() < 1e-15);
        assert!((rows[1].1 - 3.0).abs() < 1e-15);
        let zero = SafetySystem::Rhs {
            a: DMatrix::zeros(1, 2),
            b0: DVector::zeros(1),
            b_lin: DMatrix::zeros(1, 1),
            normalized: false,
        };
        assert_eq!(zero.normalized(), Err(Error::ZeroRow(0)));
    }
}
