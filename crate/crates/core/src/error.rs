use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scales: {0}")]
    InvalidScales(String),
    #[error("invalid slope: {0}")]
    InvalidSlope(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("inadmissible boundary: {0}")]
    InadmissibleBoundary(String),
    #[error("invalid quadrature rule: {0}")]
    InvalidRule(String),
    #[error("unsupported shape: {0}")]
    UnsupportedShape(String),
    #[error("series order {order} exceeds maximum {max}")]
    SeriesOrder { order: usize, max: usize },
    #[error("assembly inconsistency: hermitian defect {defect:e} exceeds tolerance")]
    AssemblyInconsistency { defect: f64 },
    #[error("eigensolver failed after {iterations} iterations (residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("incompatible operands: {0}")]
    IncompatibleOperands(String),
    #[error("momentum window too narrow: edge amplitude {edge:e}")]
    WindowTooNarrow { edge: f64 },
    #[error("probability leakage {leak:e} exceeds tolerance")]
    Leakage { leak: f64 },
    #[error("invalid time: {0}")]
    InvalidTime(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
