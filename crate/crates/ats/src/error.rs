use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("argument {re}{im:+}i lies on the branch cut (-inf, -{b}]")]
    BranchCut { re: f64, im: f64, b: f64 },

    #[error("transform overflows: log value {log_value}")]
    Overflow { log_value: f64 },

    #[error("quadrature did not converge: value {value}, error estimate {error}")]
    Quadrature { value: f64, error: f64 },

    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("{0}")]
    Domain(String),

    #[error("optimizer failed: {0}")]
    Optimizer(String),

    #[error("input line {line}: {message}")]
    Input { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
