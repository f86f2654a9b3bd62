//! Two-point problems for `(p u')' + mu q u = f`, including the resonant
//! case where `mu` is an eigenvalue of the homogeneous problem.

use crate::coeffs::Coefficient;
use crate::error::{Error, Result};
use crate::ode::{integrate_cells, integrate_pair, FunctionTrace};

/// A boundary condition: prescribed value `u` or prescribed flux `p u'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EndCondition {
    Value(f64),
    Flux(f64),
}

/// Orthogonality constraint `∫ weight · u · against = 0` selecting one
/// solution of a resonant problem.
#[derive(Clone, Copy)]
pub struct Orthogonality<'a> {
    pub against: &'a FunctionTrace,
    pub weight: &'a Coefficient,
}

pub struct BvpSpec<'a> {
    pub p: &'a Coefficient,
    pub q: &'a Coefficient,
    pub mu: f64,
    pub lo: f64,
    pub hi: f64,
    pub forcing: &'a dyn Fn(f64) -> f64,
    pub left: EndCondition,
    pub right: EndCondition,
    /// Present for resonant problems.
    pub ortho: Option<Orthogonality<'a>>,
}

#[derive(Debug, Clone)]
pub struct BvpSolution {
    pub trace: FunctionTrace,
    /// Relative mismatch of the far-end condition before deflation; only
    /// meaningful for resonant problems, zero otherwise.
    pub solvability_residual: f64,
}

fn far_end(trace: &FunctionTrace, p: &Coefficient, cond: EndCondition) -> (f64, f64) {
    let x = trace.hi();
    let (u, du) = trace.last();
    match cond {
        EndCondition::Value(t) => (u, t),
        EndCondition::Flux(t) => (p.value(x) * du, t),
    }
}

fn sup_of(trace: &FunctionTrace, p: &Coefficient, cond: EndCondition) -> f64 {
    match cond {
        EndCondition::Value(_) => trace.values().iter().fold(0.0f64, |m, v| m.max(v.abs())),
        EndCondition::Flux(_) => trace
            .nodes()
            .iter()
            .zip(trace.derivatives())
            .fold(0.0f64, |m, (&x, d)| m.max((p.value(x) * d).abs())),
    }
}

/// Solves the two-point problem. Returns the solution together with the
/// solvability residual; the caller decides whether a residual above its
/// threshold is fatal (see [`solve_constrained_bvp`]).
pub fn solve_bvp(spec: &BvpSpec<'_>, tol: f64) -> Result<BvpSolution> {
    let (forced0, homog0) = match spec.left {
        EndCondition::Value(v) => ((v, 0.0), (0.0, 1.0)),
        EndCondition::Flux(f) => ((0.0, f), (1.0, 0.0)),
    };
    let (part, homog) = integrate_pair(
        spec.p,
        spec.q,
        spec.mu,
        spec.lo,
        spec.hi,
        forced0,
        homog0,
        spec.forcing,
        tol,
    )?;
    let (g_part, target) = far_end(&part, spec.p, spec.right);
    let (g_homog, _) = far_end(&homog, spec.p, spec.right);
    match spec.ortho {
        None => {
            let scale = sup_of(&homog, spec.p, spec.right);
            if g_homog.abs() <= 1e-10 * scale {
                return Err(Error::Degenerate(format!(
                    "mu = {} is (nearly) an eigenvalue of the homogeneous problem on [{}, {}]",
                    spec.mu, spec.lo, spec.hi
                )));
            }
            let c = (target - g_part) / g_homog;
            let trace = crate::ode::trace_combine(1.0, &part, c, &homog)?;
            Ok(BvpSolution {
                trace,
                solvability_residual: 0.0,
            })
        }
        Some(o) => {
            let scale = target.abs() + sup_of(&part, spec.p, spec.right);
            let residual = if scale > 0.0 { (target - g_part).abs() / scale } else { 0.0 };
            let num = part.dot_coeff(o.against, o.weight);
            let den = homog.dot_coeff(o.against, o.weight);
            if den.abs() < 1e-300 {
                return Err(Error::Degenerate("orthogonality target is orthogonal to the kernel".into()));
            }
            let trace = crate::ode::trace_combine(1.0, &part, -num / den, &homog)?;
            Ok(BvpSolution {
                trace,
                solvability_residual: residual,
            })
        }
    }
}

/// As [`solve_bvp`], failing when the solvability residual of a resonant
/// problem exceeds `solv_tol`.
pub fn solve_constrained_bvp(spec: &BvpSpec<'_>, tol: f64, solv_tol: f64, stage: &str) -> Result<FunctionTrace> {
    let sol = solve_bvp(spec, tol)?;
    if sol.solvability_residual > solv_tol {
        return Err(Error::Solvability {
            stage: stage.to_string(),
            residual: sol.solvability_residual,
        });
    }
    Ok(sol.trace)
}

/// Largest violation of the integrated equation
/// `(p u')(x) - (p u')(lo) = ∫_lo^x (f - mu q u)` over the trace nodes,
/// relative to the sizes of the flux and of the integrand.
pub fn integral_residual(
    p: &Coefficient,
    q: &Coefficient,
    mu: f64,
    trace: &FunctionTrace,
    forcing: &dyn Fn(f64) -> f64,
) -> f64 {
    let nodes = trace.nodes();
    let flux = |i: usize| p.value(nodes[i]) * trace.derivatives()[i];
    let rhs = |x: f64| forcing(x) - mu * q.value(x) * trace.eval(x);
    let (mut acc, mut mass, mut worst, mut flux_max) = (0.0f64, 0.0f64, 0.0f64, flux(0).abs());
    for i in 1..nodes.len() {
        let cell = [nodes[i - 1], nodes[i]];
        acc += integrate_cells(&cell, rhs);
        mass += integrate_cells(&cell, |x| rhs(x).abs());
        worst = worst.max((flux(i) - flux(0) - acc).abs());
        flux_max = flux_max.max(flux(i).abs());
    }
    let scale = flux_max + mass;
    if scale > 0.0 {
        worst / scale
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn one(lo: f64, hi: f64) -> Coefficient {
        Coefficient::constant(1.0, lo, hi)
    }

    #[test]
    fn homogeneous_nonresonant_gives_zero() {
        let c = one(0.0, 2.0);
        let zero = |_: f64| 0.0;
        let spec = BvpSpec {
            p: &c,
            q: &c,
            mu: 1.0,
            lo: 0.0,
            hi: 2.0,
            forcing: &zero,
            left: EndCondition::Value(0.0),
            right: EndCondition::Value(0.0),
            ortho: None,
        };
        let sol = solve_bvp(&spec, 1e-12).unwrap();
        assert_eq!(sol.trace.sup_norm(), 0.0);
    }

    #[test]
    fn nonresonant_matches_closed_form() {
        // u'' + u = 1, u(0) = 0, u(2) = 0: u = 1 - cos x - (1 - cos 2) sin x / sin 2.
        let c = one(0.0, 2.0);
        let f = |_: f64| 1.0;
        let spec = BvpSpec {
            p: &c,
            q: &c,
            mu: 1.0,
            lo: 0.0,
            hi: 2.0,
            forcing: &f,
            left: EndCondition::Value(0.0),
            right: EndCondition::Value(0.0),
            ortho: None,
        };
        let sol = solve_bvp(&spec, 1e-12).unwrap();
        let exact = |x: f64| 1.0 - x.cos() - (1.0 - 2f64.cos()) * x.sin() / 2f64.sin();
        for x in [0.3, 1.0, 1.7] {
            assert_relative_eq!(sol.trace.eval(x), exact(x), epsilon = 1e-10);
        }
    }

    // With e = sin(pi x/2) on (0, 2), the problem u'' + mu u = -s e,
    // u(0) = g0, u(2) = 0 is solvable iff e'(0) g0 = -s ∫ e^2, i.e.
    // g0 = -2 s / pi.
    #[test]
    fn resonant_balanced_by_boundary_value() {
        let c = one(0.0, 2.0);
        let mu = FRAC_PI_2 * FRAC_PI_2;
        let e = FunctionTrace::sample(0.0, 2.0, 2000, |x| ((FRAC_PI_2 * x).sin(), FRAC_PI_2 * (FRAC_PI_2 * x).cos()));
        let s = 1.0;
        let f = |x: f64| -s * (FRAC_PI_2 * x).sin();
        let g0 = -2.0 * s / PI;
        let spec = BvpSpec {
            p: &c,
            q: &c,
            mu,
            lo: 0.0,
            hi: 2.0,
            forcing: &f,
            left: EndCondition::Value(g0),
            right: EndCondition::Value(0.0),
            ortho: Some(Orthogonality { against: &e, weight: &c }),
        };
        let sol = solve_bvp(&spec, 1e-12).unwrap();
        assert!(sol.solvability_residual < 1e-9, "{}", sol.solvability_residual);
        let u = &sol.trace;
        assert!(u.dot_coeff(&e, &c).abs() < 1e-9);
        // Particular solution: u = (x/pi) cos(pi x/2) + g0 cos(pi x/2) + C sin(pi x/2),
        // with g0 from the left value and the sine part fixed by orthogonality.
        let w = FRAC_PI_2;
        let base = |x: f64| (x / PI) * (w * x).cos() + g0 * (w * x).cos();
        let proj = crate::ode::quad(|x| base(x) * (w * x).sin(), 0.0, 2.0, 1e-14).unwrap();
        let exact = |x: f64| base(x) - proj * (w * x).sin();
        for x in [0.2, 0.9, 1.5, 2.0] {
            assert_relative_eq!(u.eval(x), exact(x), epsilon = 1e-9);
        }
        // Adding the kernel keeps the equation but breaks orthogonality by c.
        let shifted = crate::ode::trace_combine(1.0, u, 0.25, &e).unwrap();
        assert_relative_eq!(shifted.dot_coeff(&e, &c), 0.25, epsilon = 1e-9);
    }

    #[test]
    fn unbalanced_resonant_problem_is_rejected() {
        let c = one(0.0, 2.0);
        let mu = FRAC_PI_2 * FRAC_PI_2;
        let e = FunctionTrace::sample(0.0, 2.0, 400, |x| ((FRAC_PI_2 * x).sin(), FRAC_PI_2 * (FRAC_PI_2 * x).cos()));
        let f = |x: f64| -(FRAC_PI_2 * x).sin();
        let spec = BvpSpec {
            p: &c,
            q: &c,
            mu,
            lo: 0.0,
            hi: 2.0,
            forcing: &f,
            left: EndCondition::Value(0.0),
            right: EndCondition::Value(0.0),
            ortho: Some(Orthogonality { against: &e, weight: &c }),
        };
        let err = solve_constrained_bvp(&spec, 1e-12, 1e-8, "test").unwrap_err();
        assert!(matches!(err, Error::Solvability { .. }));
    }

    #[test]
    fn flux_condition_on_the_right() {
        // u'' = 1 on (-1, 0), u(-1) = 0, u'(0) = 2: u = x^2/2 + 2x + 3/2.
        let c = one(-1.0, 0.0);
        let f = |_: f64| 1.0;
        let spec = BvpSpec {
            p: &c,
            q: &c,
            mu: 0.0,
            lo: -1.0,
            hi: 0.0,
            forcing: &f,
            left: EndCondition::Value(0.0),
            right: EndCondition::Flux(2.0),
            ortho: None,
        };
        let sol = solve_bvp(&spec, 1e-12).unwrap();
        assert_relative_eq!(sol.trace.eval(0.0), 1.5, epsilon = 1e-11);
        assert_relative_eq!(sol.trace.deriv(0.0), 2.0, epsilon = 1e-11);
        assert!(integral_residual(&c, &c, 0.0, &sol.trace, &f) < 1e-11);
        let off = |_: f64| 1.1;
        assert!(integral_residual(&c, &c, 0.0, &sol.trace, &off) > 1e-3);
    }
}
