use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape error in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("non-finite value produced by {op}")]
    Numerical { op: &'static str },
    #[error("data error: {0}")]
    Data(String),
    #[error("action {action} out of range for {num_actions} actions")]
    Action { action: usize, num_actions: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parameter set mismatch: expected {expected:?}, found {found:?}")]
    ParamMismatch { expected: Vec<String>, found: Vec<String> },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape { op, detail: detail.into() }
    }
}
