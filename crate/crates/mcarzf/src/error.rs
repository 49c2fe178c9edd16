use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// One or more configuration fields are out of range.
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    /// Rejection sampling could not place a user.
    #[error("could not place user ({cell}, {user}) after {attempts} attempts")]
    Geometry { cell: usize, user: usize, attempts: usize },

    /// Input data has the wrong shape.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix is not positive definite in {0}")]
    Singular(&'static str),

    #[error("solve residual {residual:.3e} exceeds {limit:.1e} in {context}")]
    Residual {
        context: &'static str,
        residual: f64,
        limit: f64,
    },

    #[error("fixed point did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// A linear power or second-order system has no nonnegative solution.
    #[error("infeasible {context}: spectral radius {radius:.6}")]
    Infeasible { context: &'static str, radius: f64 },

    /// A user with positive power has (numerically) zero SINR.
    #[error("user {index} has SINR {sinr:.3e} with positive power")]
    IsolatedUser { index: usize, sinr: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure classes, stable enough to map onto process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Config,
    Feasibility,
    Convergence,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Geometry { .. } | Error::Dimension { .. } => ErrorKind::Config,
            Error::Infeasible { .. } | Error::IsolatedUser { .. } => ErrorKind::Feasibility,
            Error::NonConvergence { .. } => ErrorKind::Convergence,
            Error::Singular(_) | Error::Residual { .. } => ErrorKind::Numerical,
        }
    }
}
