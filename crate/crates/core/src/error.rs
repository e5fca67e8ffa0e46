use thiserror::Error;

/// Failures raised by constructions, norm evaluation and audits.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid measure space: {0}")]
    InvalidSpace(String),
    #[error("measure spaces differ")]
    SpaceMismatch,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid norm expression: {0}")]
    InvalidNorm(String),
    #[error("basis is rank deficient")]
    RankDeficient,
    #[error("not a morphism: operator norm {norm} > 1 on atom {atom}")]
    NotAMorphism { atom: String, norm: f64 },
    #[error("morphisms are not composable")]
    NotComposable,
    #[error("invalid category: {0}")]
    InvalidCategory(String),
    #[error("invalid diagram: {0}")]
    InvalidDiagram(String),
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("inconsistent linear system (residual {0:e})")]
    Inconsistent(f64),
    #[error("no computable route: {0}")]
    NoRoute(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("unknown construction: {0}")]
    UnknownConstruction(String),
    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
