use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the pipeline. Validation-class errors map to CLI exit code 2,
/// numeric failures to exit code 3.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    #[error("non-finite matrix element at ({m}, {n})")]
    NumericRange { m: usize, n: usize },

    #[error("overlap matrix is ill-conditioned (condition estimate {condition:e}); prune the most diffuse or most compact basis functions")]
    IllConditionedOverlap { condition: f64 },

    #[error("eigensolver failed: {0}")]
    Solver(String),

    #[error("root tracking ambiguous at grid step {step} (overlap {quality:.3}); use a denser grid")]
    TrackingAmbiguity { step: usize, quality: f64 },

    #[error("root tracking collapsed at theta = {theta} (overlap {quality:.3})")]
    TrackingFailure { theta: f64, quality: f64 },

    #[error("continued fraction breakdown at point alpha = {alpha} even after reordering")]
    DegenerateData { alpha: f64 },

    #[error("trajectory degenerate: {poles} of {total} points are poles")]
    TrajectoryDegenerate { poles: usize, total: usize },

    #[error("no convergence after {rounds} rounds: {trace}")]
    NonConvergence { rounds: usize, trace: String },

    #[error("parse error at line {line}, field {field}: {message}")]
    Parse { line: usize, field: String, message: String },

    #[error("unsupported session schema version {found} (this build reads version {supported})")]
    Migration { found: u32, supported: u32 },

    #[error("{0} not found")]
    NotFound(String),

    #[error("region contains avoided crossing at alpha = {alpha}")]
    CrossingInWindow { alpha: f64 },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation { field: field.into(), message: message.into() }
    }

    /// True for errors caused by bad input rather than failed numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation { .. }
                | Error::Parse { .. }
                | Error::Migration { .. }
                | Error::NotFound(_)
                | Error::CrossingInWindow { .. }
                | Error::Io(_)
        )
    }

    /// Remediation hint shown by the CLI.
    pub fn hint(&self) -> Option<&'static str> {
        match self {
            Error::TrackingAmbiguity { .. } | Error::TrackingFailure { .. } => {
                Some("increase the grid density")
            }
            Error::IllConditionedOverlap { .. } => Some("reduce the basis size or the exponent ratio"),
            Error::DegenerateData { .. } => Some("use fewer or better separated fit points"),
            Error::TrajectoryDegenerate { .. } => Some("move the fixed parameter away from the fraction's poles"),
            Error::NonConvergence { .. } => Some("seed closer to the stationary point"),
            Error::CrossingInWindow { .. } => Some("pick a window clear of the crossing or pass force=true"),
            Error::Migration { .. } => Some("re-create the session with this version"),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
