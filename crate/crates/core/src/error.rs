use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, GaitError>;

#[derive(Debug, Error)]
pub enum GaitError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("degenerate cycle: {0}")]
    DegenerateCycle(String),

    #[error("heading is degenerate: flattened acceleration is isotropic (eigenvalue ratio {ratio:.9})")]
    HeadingDegenerate { ratio: f64 },

    #[error("no gait detected: {0}")]
    NoGaitDetected(String),

    #[error("no walking cycles: {0}")]
    NoCycles(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("solver did not converge after {iterations} iterations (KKT violation {violation:.3e})")]
    Convergence { iterations: usize, violation: f64 },

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported {kind} version {found} (expected {expected})")]
    UnsupportedVersion {
        kind: String,
        found: String,
        expected: String,
    },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl GaitError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GaitError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            GaitError::Parse { .. }
            | GaitError::Validation(_)
            | GaitError::Parameter(_)
            | GaitError::Format(_)
            | GaitError::UnsupportedVersion { .. }
            | GaitError::ShapeMismatch(_)
            | GaitError::Usage(_) => 2,
            GaitError::InsufficientData(_)
            | GaitError::NoGaitDetected(_)
            | GaitError::NoCycles(_)
            | GaitError::DegenerateInput(_)
            | GaitError::DegenerateCycle(_)
            | GaitError::HeadingDegenerate { .. } => 3,
            GaitError::Convergence { .. } => 4,
            GaitError::Io { .. } => 1,
        }
    }
}
