use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("unknown identifier '{name}' at position {pos}")]
    UnknownIdentifier { pos: usize, name: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("step size underflow at x = {x} (h = {h:e})")]
    StepUnderflow { x: f64, h: f64 },

    #[error("quadrature did not converge on [{lo}, {hi}]")]
    Quadrature { lo: f64, hi: f64 },

    #[error("trace intervals differ: [{0}, {1}] vs [{2}, {3}]")]
    IntervalMismatch(f64, f64, f64, f64),

    #[error("root search failed: {0}")]
    RootSearch(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("solvability violated in {stage}: residual {residual:e}")]
    Solvability { stage: String, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
