use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions {0:?}: expected 2 or 3 positive extents")]
    InvalidDims(Vec<usize>),

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimsMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("lattice has {found} values but dims {dims:?} require {expected}")]
    LengthMismatch {
        dims: Vec<usize>,
        expected: usize,
        found: usize,
    },

    #[error("value {value} at site {site} lies outside [0, 1]")]
    NotAProbability { site: usize, value: f64 },

    #[error("invalid neighborhood: {0}")]
    InvalidSpec(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate null distribution: {0}")]
    DegenerateNull(String),

    #[error("no closed form available: {0}")]
    UnsupportedAnalytic(String),

    #[error("malformed lattice file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidDims(_) => "invalid-dims",
            Error::DimsMismatch { .. } | Error::LengthMismatch { .. } => "dims-mismatch",
            Error::NotAProbability { .. } => "not-a-probability",
            Error::InvalidSpec(_) => "invalid-spec",
            Error::InvalidParameter(_) => "bad-config",
            Error::DegenerateNull(_) => "degenerate-null",
            Error::UnsupportedAnalytic(_) => "unsupported-analytic",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
