use thiserror::Error;

/// Errors raised by the library.
///
/// Variants are grouped so a front end can map them onto exit statuses:
/// parameter problems, I/O problems and numerical breakdowns.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {0} out of range 1..={max}", max = crate::dyadic::MAX_DIM)]
    Dimension(usize),
    #[error("invalid cube: {0}")]
    InvalidCube(String),
    #[error("exponent out of range: {0}")]
    Exponent(String),
    #[error("exponent condition violated: {0}")]
    ExponentCondition(String),
    #[error("resolution mismatch: {0}")]
    Resolution(String),
    #[error("depth exhausted: {0}")]
    Depth(String),
    #[error("invalid figure: {0}")]
    Figure(String),
    #[error("precondition not met: {0}")]
    Precondition(String),
    #[error("mismatched parameters: {0}")]
    Mismatch(String),
    #[error("malformed charge file: {0}")]
    Format(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the caller's parameters or input files rather
    /// than the environment or a numerical breakdown.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
