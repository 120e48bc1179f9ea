use thiserror::Error;

/// Errors produced by the coefficient engines, solvers and certifier.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("probability level {0} is outside the open interval (0, 1)")]
    InvalidLevel(f64),

    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("row {0} of the safety matrix is zero")]
    ZeroRow(usize),

    #[error("the feasible polytope {{0 <= x <= U, c'x <= u}} is empty")]
    EmptyPolytope,

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("non-convex feasible region: {0}")]
    NonConvex(String),

    #[error("root bracketing failed: {0}")]
    Bracketing(String),

    #[error("target radius {target} is unreachable; rho at the full budget is {best}")]
    Unreachable { target: f64, best: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("cross-check failed: {0}")]
    CrossCheck(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Error {
    Error::Domain {
        name,
        value,
        expected,
    }
}
