use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("reference function has zero L2 norm")]
    ZeroNorm,

    #[error("restriction factor {factor} does not divide {size}")]
    NotDivisible { factor: usize, size: usize },

    #[error("grid cannot represent {needed} modes: {reason}")]
    TooFewModes { needed: usize, reason: String },

    #[error("initial condition has nonzero mean {0:e}")]
    NonZeroMean(f64),

    #[error("non-finite value at t = {time}; reduce the time step")]
    NonFinite { time: f64 },

    #[error("coefficient must be strictly positive (found {0})")]
    NonPositiveCoefficient(f64),

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error(
        "Cholesky factorization failed; the system is numerically singular, use lambda = 0 for the pseudoinverse path"
    )]
    Factorization,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("instance too large for dense oracle: {0} unknowns")]
    TooLarge(usize),

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("bad file format in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// True for failures of the numerics, as opposed to bad configuration or input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonFinite { .. } | Error::CgNotConverged { .. } | Error::Factorization | Error::ZeroNorm => true,
            Error::Sample { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
