use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite cart-pole state: {0:?}")]
    NonFiniteState([f64; 4]),

    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("parameter `{0}` has no gradient")]
    MissingGradient(String),

    #[error("duplicate parameter name `{0}`")]
    DuplicateParameter(String),

    #[error("parameter sets differ: {0}")]
    ParameterMismatch(String),

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error("invalid architecture config: {0}")]
    InvalidArchitecture(String),

    #[error("window has length {got}, expected {expected}")]
    WindowLength { expected: usize, got: usize },

    #[error("invalid trainer config: {0}")]
    InvalidConfig(String),

    #[error("batch has {got} transitions, expected {expected}")]
    BatchSize { expected: usize, got: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("run {algorithm} seed {seed} failed: {source}")]
    Run {
        algorithm: String,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Invalid(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
