use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("spectrum `{name}` does not overlap any detection band")]
    NoOverlap { name: String },

    #[error("malformed spectrum `{name}`: {reason}")]
    MalformedSpectrum { name: String, reason: String },

    #[error("spectrum file for fluorophore `{name}` not readable at {path}: {reason}")]
    MissingSpectrum { name: String, path: String, reason: String },

    #[error("invalid band layout: {0}")]
    InvalidLayout(String),

    #[error("invalid mixing matrix: {0}")]
    InvalidMixingMatrix(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate clustering: {k} clusters requested but only {distinct} distinct spectra")]
    DegenerateClustering { k: usize, distinct: usize },

    #[error("invalid phantom spec: {0}")]
    InvalidSpec(String),

    #[error("invalid band partition: {0}")]
    InvalidPartition(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("prediction is identically zero")]
    ZeroPrediction,

    #[error("ground truth has no dynamic range")]
    DegenerateGT,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("image too small: {0}")]
    TooSmall(String),

    #[error("too few background patches: {patches} tiles of {patch}x{patch}, need at least 50")]
    TooFewPatches { patches: usize, patch: usize },

    #[error("bad magic: not an SPMX1 container")]
    BadMagic,

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("unsupported dtype `{0}`")]
    UnsupportedDtype(String),

    #[error("header mismatch: {0}")]
    HeaderMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
