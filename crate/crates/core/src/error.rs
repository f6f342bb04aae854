use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("radius {0} outside the domain")]
    Domain(f64),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("unsupported closure p = {0} (only 1 and 2 are modelled)")]
    UnsupportedClosure(u32),

    #[error("invalid mode: {0}")]
    Mode(String),

    #[error("neck match failed: {0}")]
    Match(String),

    #[error("coefficient extraction failed: residual {residual:.3e} above {tolerance:.1e}")]
    Extraction { residual: f64, tolerance: f64 },

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("missing modes: {0}")]
    MissingModes(String),

    #[error("rate fit needs at least 5 samples, got {0}")]
    TooFewSamples(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
