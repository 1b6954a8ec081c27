use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("order k = {k} must be smaller than extent {extent} on axis {axis}")]
    Order { k: usize, extent: usize, axis: usize },

    #[error("index error: {0}")]
    Index(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("certification failed: {0}")]
    Certification(String),

    #[error("solver did not converge after {iterations} iterations (kkt residual {kkt_residual:.3e})")]
    Convergence {
        iterations: usize,
        kkt_residual: f64,
        partial: Box<crate::solver::FitResult>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
