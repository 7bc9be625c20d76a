use thiserror::Error;

pub type Result<T> = std::result::Result<T, GkpError>;

#[derive(Debug, Error)]
pub enum GkpError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cutoff mismatch: {left} vs {right}")]
    CutoffMismatch { left: usize, right: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("grid captures only {captured:.9} of the probability mass")]
    MassDeficit { captured: f64 },
}

impl GkpError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        GkpError::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        GkpError::NumericalFailure(msg.into())
    }
}
