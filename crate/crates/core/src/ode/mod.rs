//! Initial-value solvers for `(p u')' + mu q u = f` in flux form, plus
//! quadrature and trace arithmetic.

mod quad;
mod rk;
mod trace;

pub use quad::quad;
pub(crate) use trace::integrate_cells;
pub use trace::{merge_nodes, trace_combine, FunctionTrace};

use crate::coeffs::Coefficient;
use crate::error::{Error, Result};

/// Default local error tolerance.
pub const DEFAULT_TOL: f64 = 1e-11;

/// Largest phase advance `omega * h` allowed per step. Keeps the Hermite
/// interpolant of the stored nodes close to integrator accuracy.
const MAX_PHASE_STEP: f64 = 0.01;

fn check_tol(tol: f64) -> Result<()> {
    if (1e-14..=1e-6).contains(&tol) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("tolerance {tol:e} outside [1e-14, 1e-6]")))
    }
}

fn check_span(c: &Coefficient, from: f64, to: f64) -> Result<()> {
    if c.contains(from) && c.contains(to) {
        Ok(())
    } else {
        let (lo, hi) = c.interval();
        Err(Error::Domain(format!(
            "integration span [{from}, {to}] leaves coefficient interval [{lo}, {hi}]"
        )))
    }
}

/// Step cap from the local oscillation frequency `sqrt(|mu| q / p)`.
pub(crate) fn step_cap(p: &Coefficient, q: &Coefficient, mu: f64, from: f64, to: f64) -> f64 {
    let mut w2 = 0.0f64;
    for i in 0..=32 {
        let x = from + (to - from) * i as f64 / 32.0;
        w2 = w2.max(mu.abs() * q.value(x) / p.value(x));
    }
    MAX_PHASE_STEP / w2.sqrt().max(1.0)
}

/// Trace of a solution of `(p u')' + mu q u = f` from `(u, p u')` at the
/// nodes; the second derivative comes from the equation.
fn to_trace(
    (p, q, mu): (&Coefficient, &Coefficient, f64),
    f: &dyn Fn(f64) -> f64,
    xs: &[f64],
    us: impl Iterator<Item = (f64, f64)>,
) -> Result<FunctionTrace> {
    let mut u = Vec::with_capacity(xs.len());
    let mut du = Vec::with_capacity(xs.len());
    let mut ddu = Vec::with_capacity(xs.len());
    for (&x, (v, flux)) in xs.iter().zip(us) {
        let pv = p.value(x);
        let dv = flux / pv;
        u.push(v);
        du.push(dv);
        ddu.push((f(x) - mu * q.value(x) * v - p.derivative(x) * dv) / pv);
    }
    FunctionTrace::new(xs.to_vec(), u, du)?.with_second(ddu)
}

/// Solves `(p u')' + mu q u = 0` with `u(from) = u0`, `(p u')(from) = pu0`.
#[allow(clippy::too_many_arguments)]
pub fn integrate_ivp(
    p: &Coefficient,
    q: &Coefficient,
    mu: f64,
    from: f64,
    to: f64,
    u0: f64,
    pu0: f64,
    tol: f64,
) -> Result<FunctionTrace> {
    integrate_ivp_forced(p, q, mu, from, to, u0, pu0, &|_| 0.0, tol)
}

/// Solves `(p u')' + mu q u = f` with the given initial data. `f` is the
/// full right-hand side, density factors included.
#[allow(clippy::too_many_arguments)]
pub fn integrate_ivp_forced(
    p: &Coefficient,
    q: &Coefficient,
    mu: f64,
    from: f64,
    to: f64,
    u0: f64,
    pu0: f64,
    f: &dyn Fn(f64) -> f64,
    tol: f64,
) -> Result<FunctionTrace> {
    check_tol(tol)?;
    check_span(p, from, to)?;
    check_span(q, from, to)?;
    if from == to {
        return Err(Error::InvalidArgument("empty integration span".into()));
    }
    let h_max = step_cap(p, q, mu, from, to);
    let path = rk::dopri(
        |x, y: &[f64; 2]| [y[1] / p.value(x), f(x) - mu * q.value(x) * y[0]],
        from,
        to,
        [u0, pu0],
        tol,
        h_max,
    )?;
    to_trace((p, q, mu), f, &path.xs, path.ys.iter().map(|y| (y[0], y[1])))
}

/// Integrates a forced solution and a homogeneous solution of the same
/// operator on shared nodes. Returns `(forced, homogeneous)`.
#[allow(clippy::too_many_arguments)]
pub fn integrate_pair(
    p: &Coefficient,
    q: &Coefficient,
    mu: f64,
    from: f64,
    to: f64,
    forced0: (f64, f64),
    homog0: (f64, f64),
    f: &dyn Fn(f64) -> f64,
    tol: f64,
) -> Result<(FunctionTrace, FunctionTrace)> {
    check_tol(tol)?;
    check_span(p, from, to)?;
    check_span(q, from, to)?;
    let h_max = step_cap(p, q, mu, from, to);
    let path = rk::dopri(
        |x, y: &[f64; 4]| {
            let pinv = 1.0 / p.value(x);
            let mq = mu * q.value(x);
            [y[1] * pinv, f(x) - mq * y[0], y[3] * pinv, -mq * y[2]]
        },
        from,
        to,
        [forced0.0, forced0.1, homog0.0, homog0.1],
        tol,
        h_max,
    )?;
    let forced = to_trace((p, q, mu), f, &path.xs, path.ys.iter().map(|y| (y[0], y[1])))?;
    let homog = to_trace((p, q, mu), &|_| 0.0, &path.xs, path.ys.iter().map(|y| (y[2], y[3])))?;
    Ok((forced, homog))
}

/// Number of sign changes of the homogeneous solution at its nodes,
/// measured against the starting value, together with the end state `(u, p u')`.
/// The step cap guarantees that no two zeros share a step.
#[allow(clippy::too_many_arguments)]
pub fn shoot_count(
    p: &Coefficient,
    q: &Coefficient,
    mu: f64,
    from: f64,
    to: f64,
    u0: f64,
    pu0: f64,
    tol: f64,
) -> Result<(usize, f64, f64)> {
    check_tol(tol)?;
    let h_max = step_cap(p, q, mu, from, to);
    let path = rk::dopri(
        |x, y: &[f64; 2]| [y[1] / p.value(x), -mu * q.value(x) * y[0]],
        from,
        to,
        [u0, pu0],
        tol,
        h_max,
    )?;
    let mut ys = path.ys;
    if to < from {
        ys.reverse();
    }
    let mut count = 0;
    let mut prev = u0;
    for y in ys.iter().skip(1) {
        if y[0] != 0.0 {
            if prev != 0.0 && prev.signum() != y[0].signum() {
                count += 1;
            }
            prev = y[0];
        }
    }
    let end = ys[ys.len() - 1];
    Ok((count, end[0], end[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn one(lo: f64, hi: f64) -> Coefficient {
        Coefficient::constant(1.0, lo, hi)
    }

    #[test]
    fn quarter_wave_on_left_interval() {
        let tol = 1e-11;
        let c = one(-1.0, 0.0);
        let t = integrate_ivp(&c, &c, PI * PI / 4.0, -1.0, 0.0, 0.0, 1.0, tol).unwrap();
        let (u, du) = t.last();
        assert!((u - 2.0 / PI).abs() < 10.0 * tol);
        assert!(du.abs() < 10.0 * tol);
        assert_relative_eq!(t.eval(-0.5), (2.0 / PI) * (PI / 4.0).sin(), epsilon = 1e-10);
    }

    #[test]
    fn zero_frequency_keeps_constant() {
        let c = one(0.0, 1.0);
        let t = integrate_ivp(&c, &c, 0.0, 0.0, 1.0, 1.0, 0.0, 1e-11).unwrap();
        assert!(t.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn sine_solution() {
        let tol = 1e-11;
        let c = one(0.0, 2.0);
        let t = integrate_ivp(&c, &c, 1.0, 0.0, 2.0, 0.0, 1.0, tol).unwrap();
        assert!((t.last().0 - 2f64.sin()).abs() < 10.0 * tol);
    }

    #[test]
    fn forced_reduces_to_homogeneous() {
        let p = Coefficient::parse("2 + x*x", -1.0, 0.0).unwrap();
        let q = Coefficient::parse("1 + sin(x)", -1.0, 0.0).unwrap();
        let a = integrate_ivp(&p, &q, 3.0, -1.0, 0.0, 0.0, 1.0, 1e-12).unwrap();
        let b = integrate_ivp_forced(&p, &q, 3.0, -1.0, 0.0, 0.0, 1.0, &|_| 0.0, 1e-12).unwrap();
        assert!(a.sup_distance(&b) <= 1e-14);
    }

    #[test]
    fn double_integration() {
        let c = one(0.0, 1.0);
        let t = integrate_ivp_forced(&c, &c, 0.0, 0.0, 1.0, 0.0, 0.0, &|_| 1.0, 1e-12).unwrap();
        for x in [0.25, 0.5, 1.0] {
            assert_relative_eq!(t.eval(x), 0.5 * x * x, epsilon = 1e-12);
        }
    }

    #[test]
    fn resonant_forcing_grows_secularly() {
        // u'' + u = -sin x, u(0) = u'(0) = 0 has u = (x cos x - sin x) / 2.
        let c = one(0.0, PI);
        let t = integrate_ivp_forced(&c, &c, 1.0, 0.0, PI, 0.0, 0.0, &|x| -x.sin(), 1e-12).unwrap();
        assert_relative_eq!(t.last().0, -PI / 2.0, epsilon = 1e-10);
        let x: f64 = 1.3;
        assert_relative_eq!(t.eval(x), 0.5 * (x * x.cos() - x.sin()), epsilon = 1e-10);
    }

    #[test]
    fn wronskian_is_conserved() {
        let tol = 1e-11;
        let p = Coefficient::parse("2 + x*x", -1.0, 0.0).unwrap();
        let q = Coefficient::parse("1", -1.0, 0.0).unwrap();
        let (u, v) = integrate_pair(&p, &q, 5.0, -1.0, 0.0, (0.0, 1.0), (1.0, 0.0), &|_| 0.0, tol).unwrap();
        let w0 = p.value(-1.0) * (u.values()[0] * v.derivatives()[0] - u.derivatives()[0] * v.values()[0]);
        for (i, &x) in u.nodes().iter().enumerate() {
            let w = p.value(x) * (u.values()[i] * v.derivatives()[i] - u.derivatives()[i] * v.values()[i]);
            assert!((w - w0).abs() <= 100.0 * tol * w0.abs(), "{w} vs {w0}");
        }
    }

    #[test]
    fn halving_tolerance_is_self_consistent() {
        let p = Coefficient::parse("1 + x/4", 0.0, 2.0).unwrap();
        let q = Coefficient::parse("exp(-x)", 0.0, 2.0).unwrap();
        let a = integrate_ivp(&p, &q, 20.0, 2.0, 0.0, 0.0, -1.0, 1e-8).unwrap();
        let b = integrate_ivp(&p, &q, 20.0, 2.0, 0.0, 0.0, -1.0, 5e-9).unwrap();
        assert!((a.first().0 - b.first().0).abs() < 1e-8);
    }

    #[test]
    fn forward_then_backward_recovers_data() {
        let tol = 1e-11;
        let p = Coefficient::parse("2 + sin(x)", -1.0, 0.0).unwrap();
        let q = Coefficient::parse("1 + x*x", -1.0, 0.0).unwrap();
        let fwd = integrate_ivp(&p, &q, 7.0, -1.0, 0.0, 0.3, -0.2, tol).unwrap();
        let (u1, du1) = fwd.last();
        let back = integrate_ivp(&p, &q, 7.0, 0.0, -1.0, u1, p.value(0.0) * du1, tol).unwrap();
        let (u0, du0) = back.first();
        assert!((u0 - 0.3).abs() < 100.0 * tol);
        assert!((p.value(-1.0) * du0 + 0.2).abs() < 100.0 * tol);
    }

    #[test]
    fn zero_count_matches_sine() {
        let c = one(0.0, 2.0);
        for (mu, zeros) in [(0.5, 0), (3.0, 1), (11.0, 2), (40.0, 4)] {
            let (n, _, _) = shoot_count(&c, &c, mu, 0.0, 2.0, 0.0, 1.0, 1e-10).unwrap();
            let expected = (mu.sqrt() * 2.0 / PI).floor() as usize;
            assert_eq!(n, expected);
            assert_eq!(n, zeros);
        }
    }

    #[test]
    fn zero_in_first_step_is_counted() {
        // u = 1e-3 cos x - sin x vanishes near x = 1e-3.
        let c = one(0.0, 1.0);
        let (n, _, _) = shoot_count(&c, &c, 1.0, 0.0, 1.0, 1e-3, -1.0, 1e-10).unwrap();
        assert_eq!(n, 1);
        let (n, _, _) = shoot_count(&c, &c, 1.0, 1.0, 0.0, 1e-3, 1.0, 1e-10).unwrap();
        assert_eq!(n, 1);
    }

    #[test]
    fn rejects_bad_arguments() {
        let c = one(0.0, 1.0);
        assert!(integrate_ivp(&c, &c, 1.0, 0.0, 1.0, 0.0, 1.0, 1e-3).is_err());
        assert!(integrate_ivp(&c, &c, 1.0, 0.0, 2.0, 0.0, 1.0, 1e-10).is_err());
    }
}
