//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong across clustering, truncation-set
/// computation, and inference.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Malformed or non-finite input data.
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A cluster pair that is out of range, overlapping, or not part of the
    /// clustering it is being tested against.
    #[error("invalid pair: {0}")]
    InvalidPair(String),

    /// A contrast vector that is identically zero (or of the wrong length).
    #[error("invalid contrast: {0}")]
    InvalidContrast(String),

    /// The two cluster means coincide, so the perturbation direction is
    /// undefined and the conditional test is degenerate.
    #[error("degenerate direction: the cluster means are identical")]
    DegenerateDirection,

    /// The truncation set carries no probability mass, so conditional
    /// probabilities are undefined.
    #[error("degenerate support: truncation set has zero probability mass")]
    DegenerateSupport,

    /// The Monte Carlo estimator had no surviving samples in its denominator.
    #[error(
        "unstable estimate: no samples preserved the clusters \
         ({n_samples} drawn, {n_negative} negative proposals)"
    )]
    UnstableEstimate {
        /// Total proposals drawn.
        n_samples: usize,
        /// Proposals that were negative and therefore carried zero weight.
        n_negative: usize,
    },

    /// A covariance matrix that is not symmetric positive definite.
    #[error("covariance not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// A parameter outside its documented range (K, reps, phi, ...).
    #[error("bad parameter: {0}")]
    BadParameter(String),
}

impl Error {
    /// Stable machine-readable code for this error, used in CLI output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidData(_) => "invalid_data",
            Error::InvalidPair(_) => "invalid_pair",
            Error::InvalidContrast(_) => "invalid_contrast",
            Error::DegenerateDirection => "degenerate_direction",
            Error::DegenerateSupport => "degenerate_support",
            Error::UnstableEstimate { .. } => "unstable_estimate",
            Error::NotPositiveDefinite(_) => "not_positive_definite",
            Error::BadParameter(_) => "bad_parameter",
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
