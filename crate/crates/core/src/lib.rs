//! Spectral analysis of a stiff/flexible transmission eigenproblem.
//!
//! The problem couples `(k u')' + mu r u = 0` on `(a, 0)` with
//! `(kappa u')' + mu rho u = 0` on `(0, b)`, Dirichlet ends, continuity of
//! `u` at the interface and the flux condition `(k u')(-0) = eps (kappa u')(+0)`.
//! Eigenvalues of the original problem are `lambda = eps * mu`.

// Negated comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coeffs;
pub mod error;
pub mod expand;
pub mod limit;
pub mod ode;
pub mod perturbed;
mod roots;
pub mod verify;

pub use coeffs::{parse_coeff, validate_problem, CoeffExpr, Coefficient, ProblemSource, ProblemSpec};
pub use error::{Error, Result};
