//! Problem data and the coefficient expression language.

mod expr;
mod problem;

pub use expr::{parse_coeff, CoeffExpr, Func, Node};
pub use problem::{
    validate_problem, Coefficient, ProblemSource, ProblemSpec, ValidationReport, VALIDATION_SAMPLES,
};
