use thiserror::Error;

/// Errors raised by the link, key-rate and post-processing models.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter set is incomplete or violates a structural invariant.
    #[error("configuration error: {0}")]
    Config(String),
    /// An argument lies outside the mathematical domain of the function.
    #[error("domain error: {0}")]
    Domain(String),
    /// A fit or inversion could not be carried out.
    #[error("calibration error: {0}")]
    Calibration(String),
    /// QBER requested for a channel that never clicks.
    #[error("QBER undefined: zero detection probability")]
    UndefinedQber,
    /// Decoy-state estimation produced no usable single-photon bound.
    #[error("decoy estimation failed: {0}")]
    EstimationFailed(String),
    /// A search (bisection, scan) found no qualifying point.
    #[error("not found: {0}")]
    NotFound(String),
    /// No grid point satisfies the plan constraints.
    #[error("infeasible plan: {0}")]
    Infeasible(String),
    /// An interactive protocol had to stop.
    #[error("protocol aborted: {0}")]
    Abort(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
