use thiserror::Error;

/// Errors produced while building networks, evolving states or certifying reductions.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate chain label `{0}`")]
    DuplicateLabel(String),

    #[error("unknown chain `{0}`")]
    UnknownChain(String),

    #[error("site {index} out of range for chain `{chain}` (valid 1..={len})")]
    SiteOutOfRange {
        chain: String,
        index: usize,
        len: usize,
    },

    #[error("global site {0} out of range")]
    GlobalSiteOutOfRange(usize),

    #[error("invalid chain `{label}`: {reason}")]
    InvalidChain { label: String, reason: String },

    #[error("joint {0} has zero amplitude")]
    ZeroAmplitude(String),

    #[error("duplicate bond between global sites {0} and {1}")]
    DuplicateBond(usize, usize),

    #[error("invalid loop: {0}")]
    InvalidLoop(String),

    #[error("matrix is not Hermitian (max |H - H^dag| = {0:e})")]
    NonHermitian(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("wave packet does not fit chain `{chain}`: tail mass {tail:e} lies outside the chain")]
    PacketOverflow { chain: String, tail: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("eigendecomposition did not converge")]
    EigenFailure,

    #[error("scheme {scheme} does not match network: {reason}")]
    SchemeMismatch { scheme: String, reason: String },

    #[error("scheme {scheme} is not decoupled (inter-block residual {residual:e})")]
    NotDecoupled { scheme: String, residual: f64 },

    #[error("time window {window} is shorter than {required} (1.5x ballistic arrival time)")]
    WindowTooShort { window: f64, required: f64 },

    #[error("network file, line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
