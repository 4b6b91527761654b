use thiserror::Error;

/// Errors produced by grid construction, kernel compilation, flux
/// evaluation and the stationary/time-stepping solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid shift: {0}")]
    InvalidShift(String),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid flux: {0}")]
    InvalidFlux(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("field mismatch: {0}")]
    FieldMismatch(String),
    #[error("horizon unresolved: {0}")]
    HorizonUnresolved(String),
    #[error("CFL violated: dt = {dt} but the monotone bound is dt <= {dt_max}")]
    CflViolated { dt: f64, dt_max: f64 },
    #[error("solver diverged after {iterations} iterations, residual {residual:.3e} (target {target:.3e})")]
    SolverDiverged {
        iterations: usize,
        residual: f64,
        target: f64,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
