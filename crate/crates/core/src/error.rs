use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("evaluation point {z} lies outside the validity disk (|z - center| = {dist} >= radius {radius})")]
    OutOfRange { z: Complex64, dist: f64, radius: f64 },

    #[error("division by a series with vanishing constant term (|g(0)| = {0:e})")]
    SingularDivision(f64),

    #[error("aliasing bound {bound:e} exceeds tolerance {tol:e}; sample more points or shrink the sampling radius")]
    Resolution { bound: f64, tol: f64 },

    #[error("kernel is singular inside the support disk: {0}")]
    SingularKernel(String),

    #[error("Beltrami coefficient sup norm {sup} exceeds the contraction cap {cap}")]
    NotContractive { sup: f64, cap: f64 },

    #[error("Neumann series diverges: term {term} has norm {norm:e} after {prev:e}")]
    Divergence { term: usize, norm: f64, prev: f64 },

    #[error("Gram matrix is ill-conditioned (condition number {0:e})")]
    IllConditioned(f64),

    #[error("Newton iteration did not converge after {iterations} steps (residual trace: {trace:?})")]
    NonConvergence { iterations: usize, trace: Vec<f64> },

    #[error("series is not locally univalent at the origin (|w'(0)| = {0:e})")]
    NotLocallyUnivalent(f64),

    #[error("least-squares system is rank deficient: {0}")]
    RankDeficient(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::InvalidInput(_) | Error::OutOfRange { .. })
    }
}
