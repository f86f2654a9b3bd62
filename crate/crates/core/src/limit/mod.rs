//! The limit problem: spectra of the two one-sided operators, their
//! merger into the spectrum of the nonself-adjoint limit operator, and
//! the eigenfunctions and adjoined functions of its root spaces.

use serde::Serialize;

use crate::coeffs::ProblemSpec;
use crate::error::{Error, Result};
use crate::expand::bvp::{solve_constrained_bvp, BvpSpec, EndCondition, Orthogonality};
use crate::ode::{integrate_ivp, shoot_count, FunctionTrace};
use crate::roots::{eigenvalues_below, upper_bound, SturmCount};

/// Default relative tolerance for merging coincident one-sided eigenvalues.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-8;

/// Threshold on `|(kappa z0')(0)|` (relative) below which a simple mode of
/// the left operator is flagged as exact for every `eps`.
pub const EXACT_FLUX_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ModeKind {
    /// Eigenvalue of the Dirichlet–Neumann problem on `(a, 0)` only.
    SimpleA1,
    /// Eigenvalue of the Dirichlet problem on `(0, b)` only.
    SimpleA2,
    /// Common eigenvalue: a two-dimensional root space.
    Double,
}

impl std::fmt::Display for ModeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModeKind::SimpleA1 => "SimpleA1",
            ModeKind::SimpleA2 => "SimpleA2",
            ModeKind::Double => "Double",
        };
        f.write_str(s)
    }
}

/// A pair of traces on `[a, 0]` and `[0, b]`.
pub type TracePair = (FunctionTrace, FunctionTrace);

#[derive(Debug, Clone)]
pub struct LimitMode {
    pub mu: f64,
    pub kind: ModeKind,
    /// Left eigenfunction, `∫ r w² = 1`, `w(0) > 0`.
    pub w: Option<FunctionTrace>,
    /// Right Dirichlet eigenfunction, `∫ rho v² = 1`, `v'(0) > 0`.
    pub v: Option<FunctionTrace>,
    /// Limit eigenfunction.
    pub u: Option<TracePair>,
    /// Adjoined function, `(A - mu) U* = U`, orthogonal to `U` in `L2(R)`.
    pub ustar: Option<TracePair>,
    /// Coupling `(kappa w v')(0)` of a double point.
    pub omega: Option<f64>,
    /// Measured `c` in `(A - mu) U* = c U`.
    pub adjoined_ratio: Option<f64>,
    /// Set when `(kappa z0')(0)` vanishes: the eigenvalue `eps * mu` is exact.
    pub exact: bool,
}

impl LimitMode {
    pub fn bare(mu: f64, kind: ModeKind) -> Self {
        LimitMode {
            mu,
            kind,
            w: None,
            v: None,
            u: None,
            ustar: None,
            omega: None,
            adjoined_ratio: None,
            exact: false,
        }
    }
}

/// Limit spectrum with multiplicity: a double point occupies two
/// consecutive entries, so index `j` maps to `modes[j - 1]`.
#[derive(Debug, Clone)]
pub struct LimitSpectrum {
    pub modes: Vec<LimitMode>,
}

impl LimitSpectrum {
    /// Distinct modes with their first index (1-based).
    pub fn distinct(&self) -> Vec<(usize, &LimitMode)> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.modes.len() {
            out.push((i + 1, &self.modes[i]));
            i += if self.modes[i].kind == ModeKind::Double { 2 } else { 1 };
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LimitOptions {
    pub tol: f64,
    pub cluster_tol: f64,
    /// Tolerance on Fredholm solvability residuals.
    pub solv_tol: f64,
}

impl Default for LimitOptions {
    fn default() -> Self {
        LimitOptions {
            tol: 1e-13,
            cluster_tol: DEFAULT_CLUSTER_TOL,
            solv_tol: 1e-8,
        }
    }
}

const ROOT_RTOL: f64 = 1e-14;

struct LeftCount<'a> {
    p: &'a ProblemSpec,
    tol: f64,
}

impl SturmCount for LeftCount<'_> {
    // Zeros in (a, 0) plus one when the phase has passed the Neumann
    // condition at 0, i.e. when u(0) and (k u')(0) have opposite signs.
    fn count(&self, mu: f64) -> Result<usize> {
        let (n, u, pu) = shoot_count(&self.p.k, &self.p.r, mu, self.p.a, 0.0, 0.0, 1.0, self.tol)?;
        Ok(n + usize::from(u * pu < 0.0))
    }

    fn det(&self, mu: f64) -> Result<f64> {
        let (_, _, pu) = shoot_count(&self.p.k, &self.p.r, mu, self.p.a, 0.0, 0.0, 1.0, self.tol)?;
        Ok(pu)
    }
}

struct RightCount<'a> {
    p: &'a ProblemSpec,
    tol: f64,
}

impl SturmCount for RightCount<'_> {
    fn count(&self, mu: f64) -> Result<usize> {
        let (n, _, _) = shoot_count(&self.p.kappa, &self.p.rho, mu, 0.0, self.p.b, 0.0, 1.0, self.tol)?;
        Ok(n)
    }

    fn det(&self, mu: f64) -> Result<f64> {
        let (_, u, _) = shoot_count(&self.p.kappa, &self.p.rho, mu, 0.0, self.p.b, 0.0, 1.0, self.tol)?;
        Ok(u)
    }
}

fn below<S: SturmCount>(s: &S, mu_max: f64) -> Result<Vec<f64>> {
    if !(mu_max > 0.0) {
        return Ok(Vec::new());
    }
    let n = s.count(mu_max)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut ev = eigenvalues_below(s, n, mu_max, ROOT_RTOL)?;
    ev.retain(|&m| m <= mu_max);
    Ok(ev)
}

/// Eigenvalues `<= mu_max` of `(k y')' + mu r y = 0`, `y(a) = 0`, `y'(0) = 0`.
pub fn spectrum_a1(p: &ProblemSpec, mu_max: f64, tol: f64) -> Result<Vec<f64>> {
    below(&LeftCount { p, tol }, mu_max)
}

/// Eigenvalues `<= mu_max` of `(kappa v')' + mu rho v = 0`, `v(0) = v(b) = 0`.
pub fn spectrum_a2hat(p: &ProblemSpec, mu_max: f64, tol: f64) -> Result<Vec<f64>> {
    below(&RightCount { p, tol }, mu_max)
}

/// The first `n` Dirichlet eigenvalues on `(0, b)`.
pub fn dirichlet_eigenvalues(p: &ProblemSpec, n: usize, tol: f64) -> Result<Vec<f64>> {
    let s = RightCount { p, tol };
    let hi = upper_bound(&s, n, 1.0)?;
    eigenvalues_below(&s, n, hi, ROOT_RTOL)
}

/// The first `n` eigenvalues on `(a, 0)` with the Neumann condition at 0.
pub fn left_eigenvalues(p: &ProblemSpec, n: usize, tol: f64) -> Result<Vec<f64>> {
    let s = LeftCount { p, tol };
    let hi = upper_bound(&s, n, 1.0)?;
    eigenvalues_below(&s, n, hi, ROOT_RTOL)
}

/// Merges the two sorted one-sided spectra. Values closer than
/// `cluster_tol · (1 + mu)` become a double point listed twice.
pub fn classify(sa1: &[f64], sa2: &[f64], cluster_tol: f64) -> LimitSpectrum {
    let mut modes = Vec::with_capacity(sa1.len() + sa2.len());
    let (mut i, mut j) = (0, 0);
    while i < sa1.len() || j < sa2.len() {
        match (sa1.get(i), sa2.get(j)) {
            (Some(&x), Some(&y)) if (x - y).abs() <= cluster_tol * (1.0 + 0.5 * (x + y)) => {
                let mu = 0.5 * (x + y);
                modes.push(LimitMode::bare(mu, ModeKind::Double));
                modes.push(LimitMode::bare(mu, ModeKind::Double));
                i += 1;
                j += 1;
            }
            (Some(&x), Some(&y)) if x < y => {
                modes.push(LimitMode::bare(x, ModeKind::SimpleA1));
                i += 1;
            }
            (Some(_), Some(&y)) => {
                modes.push(LimitMode::bare(y, ModeKind::SimpleA2));
                j += 1;
            }
            (Some(&x), None) => {
                modes.push(LimitMode::bare(x, ModeKind::SimpleA1));
                i += 1;
            }
            (None, Some(&y)) => {
                modes.push(LimitMode::bare(y, ModeKind::SimpleA2));
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    LimitSpectrum { modes }
}

/// Left eigenfunction at `mu`, normalized `∫ r w² = 1`, `w(0) > 0`.
pub fn left_eigenfunction(p: &ProblemSpec, mu: f64, tol: f64) -> Result<FunctionTrace> {
    let y = integrate_ivp(&p.k, &p.r, mu, p.a, 0.0, 0.0, 1.0, tol)?;
    let norm = y.dot_coeff(&y, &p.r).sqrt();
    let sign = if y.last().0 < 0.0 { -1.0 } else { 1.0 };
    if y.last().0.abs() <= 1e-10 * y.sup_norm() {
        return Err(Error::Degenerate(format!("left eigenfunction vanishes at 0 (mu = {mu})")));
    }
    Ok(y.scaled(sign / norm))
}

/// Right Dirichlet eigenfunction at `mu`, normalized `∫ rho v² = 1`, `v'(0) > 0`.
pub fn right_eigenfunction(p: &ProblemSpec, mu: f64, tol: f64) -> Result<FunctionTrace> {
    let v = integrate_ivp(&p.kappa, &p.rho, mu, 0.0, p.b, 0.0, 1.0, tol)?;
    let norm = v.dot_coeff(&v, &p.rho).sqrt();
    Ok(v.scaled(1.0 / norm))
}

/// Fills `w`, `v` and the limit eigenfunction `U`.
pub fn limit_eigenfunction(p: &ProblemSpec, mode: &LimitMode, opts: &LimitOptions) -> Result<LimitMode> {
    let mut m = mode.clone();
    match mode.kind {
        ModeKind::SimpleA1 => {
            let w = left_eigenfunction(p, mode.mu, opts.tol)?;
            // Intertwining extension: (kappa z')' + mu rho z = 0, z(0) = w(0), z(b) = 0.
            let zr = integrate_ivp(&p.kappa, &p.rho, mode.mu, p.b, 0.0, 0.0, -1.0, opts.tol)?;
            let z_at_0 = zr.first().0;
            if z_at_0.abs() <= 1e-8 * zr.sup_norm() {
                return Err(Error::Degenerate(format!(
                    "mu = {} is too close to the right Dirichlet spectrum; reclassify",
                    mode.mu
                )));
            }
            let z0 = zr.scaled(w.last().0 / z_at_0);
            let flux0 = p.kappa.value(0.0) * z0.first().1;
            let flux_scale = z0
                .nodes()
                .iter()
                .zip(z0.derivatives())
                .fold(0.0f64, |acc, (&x, d)| acc.max((p.kappa.value(x) * d).abs()));
            m.exact = flux0.abs() <= EXACT_FLUX_TOL * flux_scale.max(f64::MIN_POSITIVE);
            m.u = Some((w.clone(), z0));
            m.w = Some(w);
        }
        ModeKind::SimpleA2 => {
            let v = right_eigenfunction(p, mode.mu, opts.tol)?;
            // If mu is also a Dirichlet eigenvalue on the left, the first
            // left correction vanishes at 0 and the series terminates.
            let y = integrate_ivp(&p.k, &p.r, mode.mu, p.a, 0.0, 0.0, 1.0, opts.tol)?;
            m.exact = y.last().0.abs() <= EXACT_FLUX_TOL * y.sup_norm();
            m.u = Some((FunctionTrace::zero(p.a, 0.0), v.clone()));
            m.v = Some(v);
        }
        ModeKind::Double => {
            let v = right_eigenfunction(p, mode.mu, opts.tol)?;
            let w = left_eigenfunction(p, mode.mu, opts.tol)?;
            m.u = Some((FunctionTrace::zero(p.a, 0.0), v.clone()));
            m.v = Some(v);
            m.w = Some(w);
        }
    }
    Ok(m)
}

/// Fills `omega` and the adjoined function of a double point.
///
/// The left part is `-w / omega`, which makes `kappa(0) v'(0) U*(0) = -1`,
/// the solvability condition of the right part
/// `(kappa v2')' + mu rho v2 = -rho v`, `v2(0) = U*(0)`, `v2(b) = 0`.
/// The right part is made `rho`-orthogonal to `v`, which is the same as
/// `L2(R)`-orthogonality to `U`. With this scaling `(A - mu) U* = U`.
pub fn adjoined_vector(p: &ProblemSpec, mode: &LimitMode, opts: &LimitOptions) -> Result<LimitMode> {
    if mode.kind != ModeKind::Double {
        return Err(Error::InvalidArgument("adjoined vector exists only at double points".into()));
    }
    let filled;
    let mode = if mode.v.is_none() || mode.w.is_none() {
        filled = limit_eigenfunction(p, mode, opts)?;
        &filled
    } else {
        mode
    };
    let v = mode.v.as_ref().expect("filled");
    let w = mode.w.as_ref().expect("filled");
    let w0 = w.last().0;
    let dv0 = p.kappa.value(0.0) * v.first().1;
    if w0.abs() < 1e-10 || dv0.abs() < 1e-10 {
        return Err(Error::Degenerate(format!("w(0) = {w0:e}, (kappa v')(0) = {dv0:e}")));
    }
    let omega = w0 * dv0;
    let left = w.scaled(-1.0 / omega);
    let forcing = |x: f64| -p.rho.value(x) * v.eval(x);
    let spec = BvpSpec {
        p: &p.kappa,
        q: &p.rho,
        mu: mode.mu,
        lo: 0.0,
        hi: p.b,
        forcing: &forcing,
        left: EndCondition::Value(left.last().0),
        right: EndCondition::Value(0.0),
        ortho: Some(Orthogonality {
            against: v,
            weight: &p.rho,
        }),
    };
    let right = solve_constrained_bvp(&spec, opts.tol.max(1e-13), opts.solv_tol, "adjoined vector")?;
    // Weak form of the right equation tested with v: equals c ∫ rho v².
    let stiff = right.weighted_dot_deriv(v, |x| p.kappa.value(x));
    let mass = right.dot_coeff(v, &p.rho);
    let ratio = (stiff - mode.mu * mass) / v.dot_coeff(v, &p.rho);
    let mut m = mode.clone();
    m.omega = Some(omega);
    m.adjoined_ratio = Some(ratio);
    m.ustar = Some((left, right));
    Ok(m)
}

/// The first `count` limit eigenvalues (with multiplicity; a double point
/// cut by `count` is completed), eigenfunctions and adjoined functions.
pub fn limit_spectrum(p: &ProblemSpec, count: usize, opts: &LimitOptions) -> Result<LimitSpectrum> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be positive".into()));
    }
    // Both one-sided spectra up to a level holding at least `count` points.
    let mut mu_max = dirichlet_eigenvalues(p, count, opts.tol)?[count - 1] * (1.0 + 1e-6);
    let bare = loop {
        let sa1 = spectrum_a1(p, mu_max, opts.tol)?;
        let sa2 = spectrum_a2hat(p, mu_max, opts.tol)?;
        let s = classify(&sa1, &sa2, opts.cluster_tol);
        if s.modes.len() >= count {
            break s;
        }
        mu_max *= 1.5;
    };
    let mut modes = Vec::new();
    let mut i = 0;
    while i < bare.modes.len() && modes.len() < count {
        let m = limit_eigenfunction(p, &bare.modes[i], opts)?;
        if m.kind == ModeKind::Double {
            let m = adjoined_vector(p, &m, opts)?;
            modes.push(m.clone());
            modes.push(m);
            i += 2;
        } else {
            modes.push(m);
            i += 1;
        }
    }
    Ok(LimitSpectrum { modes })
}
