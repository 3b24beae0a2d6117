use thiserror::Error;

/// Failure modes of the estimators and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum IcaError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Sample covariance has an eigenvalue at or below the rank threshold.
    #[error("covariance is rank deficient: eigenvalue {eigenvalue:e} <= threshold {threshold:e}")]
    RankDeficient { eigenvalue: f64, threshold: f64 },

    #[error("degenerate divergence: {0}")]
    DegenerateDivergence(String),

    #[error("demixing matrix is singular (det = {det:e})")]
    SingularDemixer { det: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
}

pub type Result<T, E = IcaError> = std::result::Result<T, E>;

impl IcaError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        IcaError::InvalidInput(msg.into())
    }
}
