//! Error taxonomy shared by the whole crate.
//!
//! Variants map onto process exit codes (see [`Error::exit_code`]):
//! config/budget problems exit 2, data/format problems exit 3, and
//! numeric/dimension problems exit 4.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent configuration (bad schedule horizon, d2 > d1, ...).
    #[error("config error: {0}")]
    Config(String),

    /// A requested exact computation exceeds its combinatorial budget.
    #[error("budget error: {0}")]
    Budget(String),

    /// Input data is semantically unusable (missing file, empty input, label out of range).
    #[error("data error: {0}")]
    Data(String),

    /// A file failed structural parsing. `offset` is the byte position of the defect.
    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Retrieval preconditions violated (empty dataset, k too large).
    #[error("retrieval error: {0}")]
    Retrieval(String),

    /// Matrix/vector shape mismatch.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Non-finite values or degenerate numeric state.
    #[error("numeric error: {0}")]
    Numeric(String),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Budget(_) => 2,
            Error::Data(_) | Error::Format { .. } | Error::Io(_) | Error::Retrieval(_) => 3,
            Error::Dimension(_) | Error::Numeric(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
