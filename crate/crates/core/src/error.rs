use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("{solver} did not converge: residual {residual:.3e} after {iterations} iterations")]
    SolverFailure {
        solver: &'static str,
        residual: f64,
        iterations: usize,
    },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("step size stagnated at t = {t}: tau = {tau:.3e}")]
    Stagnation { t: f64, tau: f64 },

    #[error("non-finite state after step {step} (t = {t})")]
    NonFinite { step: usize, t: f64 },

    #[error("evolution aborted by observer at step {step}")]
    Aborted { step: usize },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid value for `{field}`: {msg}")]
    Validation { field: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
