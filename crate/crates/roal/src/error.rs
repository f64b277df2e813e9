use std::io;
use std::path::{Path, PathBuf};

use roal_core::model::ModelKind;

/// Problems with the container layout itself.
#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("not a roal container")]
    BadMagic,
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated file while reading {0}")]
    Truncated(String),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("missing header key {0:?}")]
    MissingKey(String),
    #[error("bad value {value:?} for header key {key:?}")]
    BadValue { key: String, value: String },
    #[error("missing array {0:?}")]
    MissingArray(String),
    #[error("{0} unexpected bytes after the last array")]
    TrailingBytes(usize),
    #[error("config hash mismatch: header says {stored}, contents hash to {computed}")]
    HashMismatch { stored: String, computed: String },
    #[error("wrong container kind {found:?}, expected {expected:?}")]
    WrongKind { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl FormatError {
    pub(crate) fn at(self, path: &Path) -> Error {
        match self {
            FormatError::Io(source) => Error::io(path, source),
            source => Error::Format { path: path.to_path_buf(), source },
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Format { path: PathBuf, source: FormatError },
    #[error("checkpoint holds a {found} model, expected {expected}")]
    ModelKindMismatch { expected: ModelKind, found: ModelKind },
    #[error("data error at {}: {detail}", path.display())]
    Data { path: PathBuf, detail: String },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] roal_core::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn data(path: &Path, detail: impl Into<String>) -> Self {
        Error::Data { path: path.to_path_buf(), detail: detail.into() }
    }

    /// The underlying format error, if any.
    pub fn format_error(&self) -> Option<&FormatError> {
        match self {
            Error::Format { source, .. } => Some(source),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
