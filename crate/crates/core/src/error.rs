use alloc::string::String;
use alloc::vec::Vec;

/// Everything that can go wrong inside the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("unknown builtin `{0}`; expected one of interval, sg, sg3, hexagasket, vicsek, filled_sg")]
    UnknownBuiltin(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("structural failure: {0}")]
    Structural(String),
    #[error("unsupported structure: {0}")]
    Unsupported(String),
    #[error("numeric diagnostic: {msg}")]
    Diagnostic { msg: String, sequence: Vec<f64> },
    #[error("sigma = {sigma} lies below the computed ladder of order {order}; rebuild with a larger k")]
    NeedsLargerK { sigma: f64, order: usize },
    #[error("weight {alpha} coincides with ladder magnitude class {class}; use closure_test")]
    Critical { alpha: f64, class: usize },
    #[error("sample level {have} is too shallow, need at least {need}")]
    InsufficientDepth { need: usize, have: usize },
    #[error("incomplete data: {0}")]
    IncompleteData(String),
    #[error("out of scope: {0}")]
    OutOfScope(String),
}

impl Error {
    /// Numeric diagnostics (as opposed to invalid input) map to a distinct CLI exit code.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Structural(_) | Error::Diagnostic { .. } | Error::NeedsLargerK { .. } | Error::Critical { .. }
        )
    }

    pub(crate) fn diag(msg: impl Into<String>, sequence: Vec<f64>) -> Self {
        Error::Diagnostic { msg: msg.into(), sequence }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
