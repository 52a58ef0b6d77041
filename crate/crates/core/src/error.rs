use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("operator undefined at zero gradient")]
    ZeroGradient,
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("point is not on the boundary (distance {0:e})")]
    NotOnBoundary(f64),
    #[error("stability condition violated: {0}")]
    Cfl(String),
    #[error("non-finite value at step {step}, node {node}: {value}")]
    NonFinite { step: usize, node: usize, value: f64 },
    #[error("node {0} is not an interior node with a previous time level")]
    NotInterior(usize),
    #[error("grids do not match")]
    GridMismatch,
    #[error("envelope is not certified: {0}")]
    Uncertified(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
