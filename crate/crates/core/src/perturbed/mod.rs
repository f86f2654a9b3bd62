//! Eigenvalues and eigenfunctions of the perturbed transmission problem
//! for a fixed `eps`, in the rescaled parameter `mu = lambda / eps`.

use serde::Serialize;

use crate::coeffs::ProblemSpec;
use crate::error::{Error, Result};
use crate::limit::{dirichlet_eigenvalues, TracePair};
use crate::ode::{integrate_ivp, shoot_count, FunctionTrace};
use crate::roots::{eigenvalues_below, SturmCount};

/// Integrator tolerance used by the solver unless overridden.
pub const SOLVER_TOL: f64 = 1e-13;

/// Relative tolerance on `mu` for root refinement.
pub const ROOT_RTOL: f64 = 1e-14;

/// Ratio between the search window and the Dirichlet upper bound.
pub const WINDOW_FACTOR: f64 = 1.25;

/// An eigenvalue `lambda_j` together with its normalized eigenfunction,
/// when computed.
#[derive(Debug, Clone, Serialize)]
pub struct EigenPair {
    pub j: usize,
    pub epsilon: f64,
    pub lambda: f64,
    pub mu: f64,
    #[serde(skip)]
    pub u: Option<TracePair>,
}

impl EigenPair {
    pub fn traces(&self) -> Result<&TracePair> {
        self.u
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("eigenfunction {} not computed", self.j)))
    }

    pub fn left(&self) -> Result<&FunctionTrace> {
        Ok(&self.traces()?.0)
    }

    pub fn right(&self) -> Result<&FunctionTrace> {
        Ok(&self.traces()?.1)
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1], got {eps}")));
    }
    Ok(())
}

/// Left shot from `a` with `y(a) = 0`, `(k y')(a) = 1`: returns `(y, k y')` at 0.
fn left_shot(p: &ProblemSpec, mu: f64, tol: f64) -> Result<(usize, f64, f64)> {
    shoot_count(&p.k, &p.r, mu, p.a, 0.0, 0.0, 1.0, tol)
}

/// Right shot from `b` with `z(b) = 0`, `(kappa z')(b) = -1`: returns `(z, kappa z')` at 0.
fn right_shot(p: &ProblemSpec, mu: f64, tol: f64) -> Result<(f64, f64)> {
    let (_, z, pz) = shoot_count(&p.kappa, &p.rho, mu, p.b, 0.0, 0.0, -1.0, tol)?;
    Ok((z, pz))
}

/// Matching determinant at the interface,
/// `D(mu) = (k y')(0) z(0) - eps (kappa z')(0) y(0)`.
pub fn characteristic(p: &ProblemSpec, eps: f64, mu: f64, tol: f64) -> Result<f64> {
    check_eps(eps)?;
    let (_, y, py) = left_shot(p, mu, tol)?;
    let (z, pz) = right_shot(p, mu, tol)?;
    Ok(py * z - eps * pz * y)
}

struct PerturbedCount<'a> {
    p: &'a ProblemSpec,
    eps: f64,
    tol: f64,
}

impl SturmCount for PerturbedCount<'_> {
    // The solution from `a` continued across the interface with the flux
    // jump is a Sturm–Liouville solution with stiffness k/eps on the left;
    // its zeros in (a, b] count the eigenvalues below mu.
    fn count(&self, mu: f64) -> Result<usize> {
        let (n1, y, py) = left_shot(self.p, mu, self.tol)?;
        let (n2, _, _) = shoot_count(&self.p.kappa, &self.p.rho, mu, 0.0, self.p.b, y, py / self.eps, self.tol)?;
        Ok(n1 + n2)
    }

    fn det(&self, mu: f64) -> Result<f64> {
        characteristic(self.p, self.eps, mu, self.tol)
    }
}

/// Number of eigenvalues `lambda < eps * mu`.
pub fn count_below(p: &ProblemSpec, eps: f64, mu: f64, tol: f64) -> Result<usize> {
    check_eps(eps)?;
    PerturbedCount { p, eps, tol }.count(mu)
}

/// The first `count` eigenvalues, strictly increasing, without eigenfunctions.
pub fn eigenvalues(p: &ProblemSpec, eps: f64, count: usize, tol: f64) -> Result<Vec<EigenPair>> {
    check_eps(eps)?;
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let mu_d = dirichlet_eigenvalues(p, count, tol)?;
    let window = WINDOW_FACTOR * mu_d[count - 1];
    let s = PerturbedCount { p, eps, tol };
    let found = s.count(window)?;
    if found < count {
        return Err(Error::RootSearch(format!(
            "window exhausted: (0, {window}] holds {found} of {count} eigenvalues at eps = {eps}"
        )));
    }
    let mus = eigenvalues_below(&s, count, window, ROOT_RTOL)?;
    if mus.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::RootSearch(format!("eigenvalues not strictly increasing at eps = {eps}: {mus:?}")));
    }
    Ok(mus
        .into_iter()
        .enumerate()
        .map(|(i, mu)| EigenPair {
            j: i + 1,
            epsilon: eps,
            lambda: eps * mu,
            mu,
            u: None,
        })
        .collect())
}

/// Sign changes of a trace pair across `(a, b)`, ignoring exact zeros.
pub fn sign_changes(u: &TracePair) -> usize {
    let mut last = 0.0f64;
    let mut n = 0;
    for &v in u.0.values().iter().chain(u.1.values()) {
        if v != 0.0 {
            if last != 0.0 && v.signum() != last.signum() {
                n += 1;
            }
            last = v;
        }
    }
    n
}

/// Builds the eigenfunction by matching the two shots at the interface,
/// normalized to `∫ R u² = 1` with `u'(b) > 0`; checks that it has
/// `j - 1` interior zeros.
pub fn eigenfunction(p: &ProblemSpec, pair: &EigenPair, tol: f64) -> Result<EigenPair> {
    let eps = pair.epsilon;
    check_eps(eps)?;
    let mu = pair.mu;
    let yl = integrate_ivp(&p.k, &p.r, mu, p.a, 0.0, 0.0, 1.0, tol)?;
    let zr = integrate_ivp(&p.kappa, &p.rho, mu, p.b, 0.0, 0.0, -1.0, tol)?;
    let (y0, dy0) = yl.last();
    let (z0, dz0) = zr.first();
    let left_state = [y0, p.k.value(0.0) * dy0];
    let right_state = [z0, eps * p.kappa.value(0.0) * dz0];
    let bb = right_state[0].powi(2) + right_state[1].powi(2);
    let aa = left_state[0].powi(2) + left_state[1].powi(2);
    if bb == 0.0 || aa == 0.0 {
        return Err(Error::Degenerate(format!("matching at 0 is degenerate for mu = {mu}")));
    }
    let t = (left_state[0] * right_state[0] + left_state[1] * right_state[1]) / bb;
    let mismatch = ((left_state[0] - t * right_state[0]).powi(2) + (left_state[1] - t * right_state[1]).powi(2)).sqrt();
    if mismatch > 1e-6 * aa.sqrt() {
        return Err(Error::Degenerate(format!(
            "shots do not match at 0 (relative mismatch {:e}); mu = {mu} is not an eigenvalue",
            mismatch / aa.sqrt()
        )));
    }
    let norm2 = yl.dot_coeff(&yl, &p.r) + t * t * zr.dot_coeff(&zr, &p.rho);
    if t == 0.0 || norm2 <= 0.0 {
        return Err(Error::Degenerate(format!("eigenfunction vanishes on the right for mu = {mu}")));
    }
    // u'(b) = t z'(b) = -t / kappa(b) must be positive.
    let s = -t.signum() / norm2.sqrt();
    let u = (yl.scaled(s), zr.scaled(s * t));
    let zeros = sign_changes(&u);
    if zeros + 1 != pair.j {
        return Err(Error::RootSearch(format!(
            "eigenfunction {} has {zeros} interior zeros (expected {})",
            pair.j,
            pair.j - 1
        )));
    }
    let mut out = pair.clone();
    out.u = Some(u);
    Ok(out)
}

/// Eigenvalues and eigenfunctions `1..=count`.
pub fn eigenpairs(p: &ProblemSpec, eps: f64, count: usize, tol: f64) -> Result<Vec<EigenPair>> {
    eigenvalues(p, eps, count, tol)?
        .iter()
        .map(|e| eigenfunction(p, e, tol))
        .collect()
}

/// The `eps`-weighted inner product `eps⁻¹ ∫ r φ ψ + ∫ rho φ ψ` and the
/// matching energy product `∫ k φ' ψ' + eps ∫ kappa φ' ψ'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedMetric {
    pub epsilon: f64,
}

impl WeightedMetric {
    pub fn new(epsilon: f64) -> Self {
        WeightedMetric { epsilon }
    }

    pub fn inner(&self, p: &ProblemSpec, f: &TracePair, g: &TracePair) -> f64 {
        f.0.dot_coeff(&g.0, &p.r) / self.epsilon + f.1.dot_coeff(&g.1, &p.rho)
    }

    pub fn norm(&self, p: &ProblemSpec, f: &TracePair) -> f64 {
        self.inner(p, f, f).max(0.0).sqrt()
    }

    pub fn energy(&self, p: &ProblemSpec, f: &TracePair, g: &TracePair) -> f64 {
        f.0.weighted_dot_deriv(&g.0, |x| p.k.value(x)) + self.epsilon * f.1.weighted_dot_deriv(&g.1, |x| p.kappa.value(x))
    }
}

pub fn inner_eps(m: &WeightedMetric, p: &ProblemSpec, f: &TracePair, g: &TracePair) -> f64 {
    m.inner(p, f, g)
}

/// `∫ R φ ψ` over `(a, b)`.
pub fn inner_r(p: &ProblemSpec, f: &TracePair, g: &TracePair) -> f64 {
    f.0.dot_coeff(&g.0, &p.r) + f.1.dot_coeff(&g.1, &p.rho)
}

/// Plain `∫ φ ψ` over `(a, b)`.
pub fn inner_plain(f: &TracePair, g: &TracePair) -> f64 {
    f.0.weighted_dot(&g.0, |_| 1.0) + f.1.weighted_dot(&g.1, |_| 1.0)
}

/// `∫ φ' ψ'` over `(a, b)`.
pub fn inner_plain_deriv(f: &TracePair, g: &TracePair) -> f64 {
    f.0.weighted_dot_deriv(&g.0, |_| 1.0) + f.1.weighted_dot_deriv(&g.1, |_| 1.0)
}

fn constant_char(a: f64, b: f64, eps: f64, w: f64) -> f64 {
    (w * a).cos() * (w * b).sin() - eps * (w * a).sin() * (w * b).cos()
}

/// The first `count` positive roots of
/// `cos(w a) sin(w b) = eps sin(w a) cos(w b)` (unit coefficients). For
/// `eps = 0` the roots of `cos(w a) sin(w b) = 0` are listed with
/// multiplicity.
pub fn constant_case_roots(a: f64, b: f64, eps: f64, count: usize) -> Result<Vec<f64>> {
    if !(a < 0.0 && b > 0.0) {
        return Err(Error::InvalidArgument(format!("need a < 0 < b, got a = {a}, b = {b}")));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!("eps must lie in [0, 1], got {eps}")));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    if eps == 0.0 {
        let mut roots = Vec::with_capacity(2 * count);
        let (mut l, mut n) = (1usize, 1usize);
        while roots.len() < count {
            let left = (l as f64 - 0.5) * std::f64::consts::PI / -a;
            let right = n as f64 * std::f64::consts::PI / b;
            if (left - right).abs() <= 1e-12 * left {
                roots.push(left);
                roots.push(left);
                l += 1;
                n += 1;
            } else if left < right {
                roots.push(left);
                l += 1;
            } else {
                roots.push(right);
                n += 1;
            }
        }
        roots.truncate(count);
        return Ok(roots);
    }
    let h = 1e-3f64.min(0.1 * eps.sqrt()) / (-a).max(b);
    let f = |w: f64| constant_char(a, b, eps, w);
    let mut roots = Vec::with_capacity(count);
    let mut lo = h;
    let mut flo = f(lo);
    while roots.len() < count {
        let hi = lo + h;
        let fhi = f(hi);
        if fhi == 0.0 {
            roots.push(hi);
            lo = hi + 0.5 * h;
            flo = f(lo);
            continue;
        }
        if flo.signum() != fhi.signum() {
            let (mut x0, mut x1, mut f0) = (lo, hi, flo);
            while x1 - x0 > 1e-14 {
                let m = 0.5 * (x0 + x1);
                if m <= x0 || m >= x1 {
                    break;
                }
                let fm = f(m);
                if fm == 0.0 {
                    x0 = m;
                    x1 = m;
                    break;
                }
                if fm.signum() == f0.signum() {
                    x0 = m;
                    f0 = fm;
                } else {
                    x1 = m;
                }
            }
            roots.push(0.5 * (x0 + x1));
        }
        lo = hi;
        flo = fhi;
    }
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn demo_mu(eps: f64, sign: f64) -> f64 {
        (FRAC_PI_2 + sign * (eps / (2.0 + 2.0 * eps)).sqrt().asin()).powi(2)
    }

    #[test]
    fn closed_form_pair_values() {
        assert_relative_eq!(demo_mu(0.01, -1.0), 2.2511353132140646, max_relative = 1e-15);
        assert_relative_eq!(demo_mu(0.01, 1.0), 2.6935842589722223, max_relative = 1e-15);
    }

    #[test]
    fn characteristic_brackets_first_root() {
        let p = ProblemSpec::demo();
        let d1 = characteristic(&p, 0.01, 2.2, SOLVER_TOL).unwrap();
        let d2 = characteristic(&p, 0.01, 2.3, SOLVER_TOL).unwrap();
        assert!(d1 * d2 < 0.0);
        // D vanishes on the closed-form root.
        let d = characteristic(&p, 0.01, demo_mu(0.01, -1.0), SOLVER_TOL).unwrap();
        assert!(d.abs() < 1e-11, "{d}");
    }

    #[test]
    fn characteristic_matches_trigonometric_form() {
        // y = sin(w (x + 1)) / w, z = -sin(w (x - 2)) / w for unit coefficients.
        let p = ProblemSpec::demo();
        let eps = 0.3;
        for mu in [0.7f64, 3.1, 12.0] {
            let w = mu.sqrt();
            let y = w.sin() / w;
            let py = w.cos();
            let z = -(-2.0 * w).sin() / w;
            let pz = -(-2.0 * w).cos();
            let expected = py * z - eps * pz * y;
            assert_relative_eq!(characteristic(&p, eps, mu, SOLVER_TOL).unwrap(), expected, epsilon = 1e-11);
        }
    }

    #[test]
    fn demo_eigenvalues_match_closed_form() {
        let p = ProblemSpec::demo();
        for eps in [1e-2, 1e-3, 1e-4, 1e-5] {
            let ev = eigenvalues(&p, eps, 2, SOLVER_TOL).unwrap();
            assert_relative_eq!(ev[0].mu, demo_mu(eps, -1.0), max_relative = 1e-11);
            assert_relative_eq!(ev[1].mu, demo_mu(eps, 1.0), max_relative = 1e-11);
            assert_relative_eq!(ev[0].lambda, eps * ev[0].mu, max_relative = 1e-15);
        }
    }

    #[test]
    fn unit_eps_is_classical_string() {
        let p = ProblemSpec::demo();
        let ev = eigenvalues(&p, 1.0, 4, SOLVER_TOL).unwrap();
        for e in &ev {
            assert_relative_eq!(e.mu, (e.j as f64 * PI / 3.0).powi(2), max_relative = 1e-11);
        }
        assert_relative_eq!(ev[0].mu, 1.0966227112321507, max_relative = 1e-11);
    }

    #[test]
    fn symmetric_problem_has_eps_independent_eigenvalue() {
        let p = ProblemSpec::constant(-2.0, 2.0).unwrap();
        for eps in [0.5, 1e-2, 1e-4] {
            let ev = eigenvalues(&p, eps, 3, SOLVER_TOL).unwrap();
            assert!(ev.iter().any(|e| (e.mu - PI * PI / 16.0).abs() < 1e-11), "{eps}: {ev:?}");
        }
    }

    #[test]
    fn eigenfunction_invariants() {
        let p = ProblemSpec::new(-1.0, 2.0, "2 + x*x", "1", "1", "1 + x/4").unwrap();
        let eps = 0.05;
        let pairs = eigenpairs(&p, eps, 5, SOLVER_TOL).unwrap();
        let m = WeightedMetric::new(eps);
        for e in &pairs {
            let u = e.traces().unwrap();
            assert_relative_eq!(inner_r(&p, u, u), 1.0, epsilon = 1e-9);
            assert!(u.1.last().1 > 0.0);
            assert!((u.0.last().0 - u.1.first().0).abs() < 1e-9);
            let jump = p.k.value(0.0) * u.0.last().1 - eps * p.kappa.value(0.0) * u.1.first().1;
            let scale = (p.k.value(0.0) * u.0.last().1).abs() + 1.0;
            assert!(jump.abs() < 1e-9 * scale, "{jump}");
            assert_eq!(sign_changes(u) + 1, e.j);
        }
        for i in 0..pairs.len() {
            for j in 0..i {
                let ip = m.inner(&p, pairs[i].traces().unwrap(), pairs[j].traces().unwrap());
                assert!(ip.abs() < 1e-8, "({i},{j}) {ip}");
            }
        }
    }

    #[test]
    fn demo_eigenfunction_matches_closed_form_ratio() {
        let p = ProblemSpec::demo();
        let eps = 0.01;
        let pairs = eigenpairs(&p, eps, 2, SOLVER_TOL).unwrap();
        for e in &pairs {
            let w = e.mu.sqrt();
            let sign = if e.j % 2 == 0 { 1.0 } else { -1.0 };
            let expected = sign * (2.0 * eps / (1.0 + eps)).sqrt() * (0.5 * w).sin() / (-w).sin();
            let (l, r) = e.traces().unwrap();
            assert_relative_eq!(l.eval(-0.5) / r.eval(1.0), expected, max_relative = 1e-8);
        }
    }

    #[test]
    fn symmetric_eigenfunction_is_eps_independent() {
        let p = ProblemSpec::constant(-2.0, 2.0).unwrap();
        let norm = 1.0 / (2.0f64).sqrt();
        for eps in [1e-1, 1e-3] {
            let ev = eigenvalues(&p, eps, 3, SOLVER_TOL).unwrap();
            let e = ev.iter().find(|e| (e.mu - PI * PI / 16.0).abs() < 1e-10).unwrap();
            let e = eigenfunction(&p, e, SOLVER_TOL).unwrap();
            let (l, r) = e.traces().unwrap();
            for x in [0.4, 1.3] {
                assert_relative_eq!(r.eval(x).abs(), norm * (PI * x / 4.0).cos(), epsilon = 1e-9);
                assert_relative_eq!(l.eval(-x).abs(), norm * (PI * x / 4.0).cos(), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn metric_basics() {
        let p = ProblemSpec::demo();
        let z = (FunctionTrace::zero(-1.0, 0.0), FunctionTrace::zero(0.0, 2.0));
        let m = WeightedMetric::new(0.1);
        assert_eq!(m.inner(&p, &z, &z), 0.0);
        let f = (
            FunctionTrace::sample(-1.0, 0.0, 200, |x| (x + 1.0, 1.0)),
            FunctionTrace::sample(0.0, 2.0, 200, |x| (1.0 - x / 2.0, -0.5)),
        );
        // eps⁻¹ ∫(x+1)² + ∫(1-x/2)² = 10/3 + 2/3.
        assert_relative_eq!(inner_eps(&m, &p, &f, &f), 4.0, max_relative = 1e-12);
        assert_relative_eq!(m.energy(&p, &f, &f), 1.0 + 0.1 * 0.5, max_relative = 1e-12);
    }

    #[test]
    fn constant_roots_examples() {
        let lim = constant_case_roots(-1.0, 2.0, 0.0, 6).unwrap();
        let expected = [FRAC_PI_2, FRAC_PI_2, PI, 1.5 * PI, 1.5 * PI, 2.0 * PI];
        for (r, e) in lim.iter().zip(expected) {
            assert_relative_eq!(*r, e, max_relative = 1e-14);
        }
        let r = constant_case_roots(-1.0, 2.0, 0.02, 2).unwrap();
        assert_relative_eq!(r[0], FRAC_PI_2 - (0.02f64 / 2.04).sqrt().asin(), max_relative = 1e-13);
        let r = constant_case_roots(-1.0, 2.0, 1.0, 4).unwrap();
        for (n, w) in r.iter().enumerate() {
            assert_relative_eq!(*w, (n + 1) as f64 * PI / 3.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn solver_agrees_with_trigonometric_roots() {
        for (a, b) in [(-1.0, 2.0), (-1.0, 2f64.sqrt()), (-0.7, 1.9)] {
            let p = ProblemSpec::constant(a, b).unwrap();
            for eps in [0.3, 1e-2, 1e-4] {
                let ev = eigenvalues(&p, eps, 5, SOLVER_TOL).unwrap();
                let roots = constant_case_roots(a, b, eps, 5).unwrap();
                for (e, w) in ev.iter().zip(roots) {
                    assert_relative_eq!(e.lambda, eps * w * w, max_relative = 1e-10);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = ProblemSpec::demo();
        assert!(eigenvalues(&p, 0.0, 1, SOLVER_TOL).is_err());
        assert!(eigenvalues(&p, 1.5, 1, SOLVER_TOL).is_err());
        assert!(eigenvalues(&p, 0.1, 0, SOLVER_TOL).is_err());
        assert!(constant_case_roots(1.0, 2.0, 0.1, 1).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        // Dirichlet comparison from above, strict increase, eps-orthogonality.
        #[test]
        fn spectrum_properties(c in 0.5f64..3.0, d in 0.5f64..2.0, log_eps in -4.0f64..-1.0) {
            let eps = 10f64.powf(log_eps);
            let k = format!("{c} + x*x");
            let rho = format!("{d} + x/4");
            let p = ProblemSpec::new(-1.0, 2.0, &k, "1", "1", &rho).unwrap();
            let pairs = eigenpairs(&p, eps, 4, SOLVER_TOL).unwrap();
            let dir = dirichlet_eigenvalues(&p, 4, SOLVER_TOL).unwrap();
            let m = WeightedMetric::new(eps);
            for (i, e) in pairs.iter().enumerate() {
                prop_assert!(e.mu <= dir[i] * (1.0 + 1e-10));
                if i > 0 {
                    prop_assert!(e.mu > pairs[i - 1].mu);
                    let ip = m.inner(&p, e.traces().unwrap(), pairs[i - 1].traces().unwrap());
                    prop_assert!(ip.abs() < 1e-8, "{}", ip);
                }
            }
        }
    }
}
