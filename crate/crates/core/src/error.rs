use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch in {context}: expected {expected} values, got {got}")]
    GridMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("phase Newton did not converge at time level {level}: residual {residual:.3e} after {iterations} iterations")]
    NewtonDiverged {
        level: usize,
        residual: f64,
        iterations: usize,
    },

    #[error("active set cycling at time level {level}: no stable set after {iterations} iterations")]
    ActiveSetCycling { level: usize, iterations: usize },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("time step too large for the adjoint system: dt = {dt:.3e} exceeds the positivity bound {bound:.3e}")]
    TimestepBound { dt: f64, bound: f64 },

    #[error("non-finite value detected in {0}")]
    NonFinite(String),

    #[error("optimizer error at gamma = {gamma}: {source}")]
    QuenchStage {
        gamma: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit status the command line surface maps this error to.
    /// 1 = configuration/validation, 2 = solver failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::GridMismatch { .. }
            | Error::Domain(_)
            | Error::Config(_)
            | Error::Json(_)
            | Error::Io(_) => 1,
            _ => 2,
        }
    }
}
