//! Asymptotic expansions of the perturbed eigenvalues and eigenfunctions.

pub mod bvp;
pub mod series;

pub use bvp::{integral_residual, solve_bvp, solve_constrained_bvp, BvpSolution, BvpSpec, EndCondition, Orthogonality};
pub use series::{
    coefficient_sign_law_defect, corrector, expand_branch, expand_double, expand_mode, expand_simple_a1,
    expand_simple_a2, partial_sum, sign_law_defect, Branch, ExpandOptions, ExpansionSeries, PartialSum, MAX_ORDER,
};
