//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FgError {
    #[error("pole: denominator vanishes in {0}")]
    Pole(String),
    #[error("base does not contract: |q| = {0} >= 1")]
    BaseNotContracting(f64),
    #[error("truncation insufficient: tail magnitude {tail:e} exceeds {tol:e}")]
    TruncationInsufficient { tail: f64, tol: f64 },
    #[error("zero argument to theta function")]
    ZeroArgument,
    #[error("index ({0}, {1}) outside the stored window")]
    IndexOutOfWindow(i64, i64),
    #[error("pivot coefficient vanishes")]
    ZeroPivot,
    #[error("series is not self-orthogonal at the pivot (residual {0:e})")]
    NotSelfOrthogonal(f64),
    #[error("limit did not converge (last change {0:e})")]
    NonconvergentLimit(f64),
    #[error("unknown target: {0}")]
    UnknownTarget(String),
    #[error("parameter `{0}` is not bound")]
    UnboundParam(String),
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, FgError>;
