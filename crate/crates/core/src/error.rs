use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{solver} did not converge within {iterations} iterations")]
    Convergence { solver: &'static str, iterations: usize },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("metric is numerically singular (condition number {0:e})")]
    SingularMetric(f64),

    #[error("geodesic left the parameter domain at t = {t}")]
    LeftDomain { t: f64 },

    #[error("shooting method did not converge: {0}")]
    NoConvergence(String),

    #[error("quadrature did not reach tolerance (error estimate {estimate:e})")]
    QuadratureFailure { estimate: f64 },

    #[error("structure mismatch: {0}")]
    StructureMismatch(String),

    #[error("family mismatch: {0:?} vs {1:?}")]
    FamilyMismatch(crate::Family, crate::Family),

    #[error("negative cycle through vertex {0}")]
    NegativeCycle(usize),

    #[error("failed to decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("image too small: {width}x{height} cannot support {levels} levels")]
    ImageTooSmall { width: usize, height: usize, levels: usize },

    #[error("degenerate subband: {0}")]
    DegenerateSubband(String),

    #[error("subband (level {level}, orientation {orientation}): {source}")]
    Subband {
        level: usize,
        orientation: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("empty dataset at {0}")]
    EmptyDataset(PathBuf),

    #[error("missing signatures for {0} item(s), first: {1}")]
    MissingSignatures(usize, String),

    #[error("version mismatch: {0}")]
    VersionMismatch(String),

    #[error("corrupt file: {0}")]
    CorruptFile(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
