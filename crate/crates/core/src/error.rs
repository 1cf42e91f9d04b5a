//! Error type shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Parameter validation failed (bad exponents, empty windows, ...).
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A grid is too coarse for the requested field or operation, e.g. the
    /// spectral support touches the Nyquist ring or a cuboid spans fewer
    /// lattice modes than the resolution policy allows.
    #[error("resolution insufficient: {0}")]
    ResolutionInsufficient(String),

    /// Adaptive quadrature failed to reach the requested relative change
    /// within the refinement cap.
    #[error("quadrature did not converge: {0}")]
    QuadratureNoConvergence(String),

    /// The advective CFL bound was violated for the configured time step.
    #[error("CFL violation: {0}")]
    CflViolation(String),

    /// Non-finite values appeared in the state.
    #[error("numerical blow-up: {0}")]
    NumericalBlowup(String),

    /// Malformed on-disk data (bad magic, truncated payload, ...).
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
