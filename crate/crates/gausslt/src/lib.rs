//! Moments of regularized local-time derivatives for the two-parameter
//! Gaussian field `Z(t,s) = X^{H1}_t - X~^{H2}_s`.
//!
//! The crate has three layers:
//!
//! * exact scalar kernels: covariance families ([`covariance`]), the Gaussian
//!   heat kernel and its mixed partials ([`heatkernel`]), and the closed-form
//!   bivariate Gaussian moment integrals with an independent quadrature
//!   oracle ([`lemma_kernels`]);
//! * quadrature-grade second moments of `L^{(k)}_eps(T,x)` ([`moments`]) and
//!   a Monte Carlo ground truth from exactly sampled paths ([`pathsim`]);
//! * rate experiments: divergence-rate normalization, existence predicate,
//!   epsilon sweeps and shape probes ([`ratelab`]).
//!
//! The `gausslt` binary exposes all of it as batch subcommands writing CSV.

pub mod config;
pub mod covariance;
pub mod csvio;
pub mod heatkernel;
pub mod lemma_kernels;
pub mod moments;
pub mod pathsim;
pub mod quad;
pub mod ratelab;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A mathematical precondition does not hold for otherwise well-typed input.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Successive quadrature refinements did not agree to the requested tolerance.
    #[error("quadrature did not converge: successive estimates {prev} and {last}")]
    NonConvergence { prev: f64, last: f64 },

    /// Covariance factorization failed even after jitter escalation.
    #[error("covariance factorization failed; smallest eigenvalue {min_eig}")]
    Factorization { min_eig: f64 },

    /// An internal cross-check failed; indicates a bug, not bad input.
    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
