use thiserror::Error;

/// Errors raised by the library. The CLI maps them onto exit codes with
/// [`Error::exit_code`].
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("structural error: {0}")]
    Structural(String),
    #[error("singular substitution: {0}")]
    SingularSubstitution(String),
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-rational literal: {0}")]
    NonRational(String),
    #[error("invalid input document: {0}")]
    Document(String),
    #[error("pole: {0}")]
    Pole(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("point is off the Heisenberg hypersurface: {0}")]
    OffHypersurface(String),
    #[error("singular matrix: {0}")]
    SingularMatrix(String),
    #[error("invalid automorphism parameters: {0}")]
    InvalidParameters(String),
    #[error("map is not an embedding: {0}")]
    NonEmbedding(String),
    #[error("normalization failed at weight {weight}: {message}")]
    Normalization { weight: u32, message: String },
    #[error("degenerate Reeb direction: {0}")]
    DegenerateReeb(String),
    #[error("chart error: {0}")]
    Chart(String),
    #[error("internal inconsistency: {0}")]
    Inconsistency(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// 1 usage, 2 parse, 3 math domain, 4 internal inconsistency.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Syntax { .. }
            | Error::Dimension(_)
            | Error::NonRational(_)
            | Error::Document(_)
            | Error::InvalidParameters(_) => 2,
            Error::Io(_) => 1,
            Error::Inconsistency(_) | Error::Structural(_) => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
