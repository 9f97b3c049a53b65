use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} values, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("fields are defined on different grids")]
    GridMismatch,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("singular system: zero pivot at row {row}")]
    SingularSystem { row: usize },

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("sweep failed at time level {level}: {source}")]
    Sweep {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("negative density {value:e} at node {node}")]
    NegativeDensity { node: usize, value: f64 },

    #[error("potential is not defined for this coupling: {0}")]
    UnsupportedPotential(&'static str),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("time level {index} out of range 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("unknown scenario `{0}` (expected test1, test2, test3, test2d or a config file)")]
    UnknownScenario(String),

    #[error("{path}:{line}: {message}")]
    Config {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("parameter out of domain: {0}")]
    Parameter(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn at_level(self, level: usize) -> Self {
        Error::Sweep {
            level,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
