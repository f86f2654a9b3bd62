//! Recurrent construction of the eigenvalue and eigenfunction series.
//!
//! Simple modes expand in integer powers of `eps`, double points in
//! powers of `sqrt(eps)`, one series per branch. The left coefficient of
//! order `m` is `y_m` on `[a, 0]`, the right one `z_m` on `[0, b]`, and
//! `mu(eps) ~ mu + Σ nu_m s^m` with `s = eps` or `s = sqrt(eps)`.

use serde::Serialize;

use super::bvp::{solve_bvp, BvpSpec, EndCondition, Orthogonality};
use crate::coeffs::{Coefficient, ProblemSpec};
use crate::error::{Error, Result};
use crate::limit::{adjoined_vector, limit_eigenfunction, LimitMode, LimitOptions, ModeKind, TracePair};
use crate::ode::{trace_combine, FunctionTrace};
use crate::perturbed::WeightedMetric;

/// Largest supported expansion order.
pub const MAX_ORDER: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    Single,
    Plus,
    Minus,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Branch::Single => "Single",
            Branch::Plus => "Plus",
            Branch::Minus => "Minus",
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExpandOptions {
    pub tol: f64,
    /// Fatal threshold for the relative solvability residual of each resonant step.
    pub solv_tol: f64,
    /// Added to the first eigenvalue coefficient; zero except for fault injection.
    pub nu1_offset: f64,
}

impl Default for ExpandOptions {
    fn default() -> Self {
        ExpandOptions {
            tol: 1e-13,
            solv_tol: 1e-8,
            nu1_offset: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExpansionSeries {
    pub mode: LimitMode,
    pub branch: Branch,
    pub order: usize,
    pub mu: f64,
    /// `nu[m - 1]` multiplies `s^m`.
    pub nu: Vec<f64>,
    /// `y_0 ..= y_order` on `[a, 0]`.
    pub left_coeffs: Vec<FunctionTrace>,
    /// `z_0 ..= z_order` on `[0, b]`.
    pub right_coeffs: Vec<FunctionTrace>,
    /// Kernel multiples of the double recursion: `z_m = V_m + alpha_m v`,
    /// `y_{m+1} = W_{m+1} + beta_m w`.
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub exact_flag: bool,
    /// Relative solvability residual of every resonant step, in order.
    pub solvability_residuals: Vec<f64>,
    /// `|∫ weight · coeff · kernel|` of every constrained coefficient.
    pub orthogonality_residuals: Vec<f64>,
}

impl ExpansionSeries {
    pub fn half_power(&self) -> bool {
        self.branch != Branch::Single
    }

    /// The expansion variable: `sqrt(eps)` for double points, `eps` otherwise.
    pub fn step(&self, eps: f64) -> f64 {
        if self.half_power() {
            eps.sqrt()
        } else {
            eps
        }
    }

    fn nu_at(&self, i: usize) -> f64 {
        if i == 0 {
            self.mu
        } else {
            self.nu.get(i - 1).copied().unwrap_or(0.0)
        }
    }

    /// `mu + Σ_{m <= n} nu_m s^m`.
    pub fn mu_sum(&self, eps: f64, n: usize) -> f64 {
        let s = self.step(eps);
        let mut acc = 0.0;
        for i in (1..=n.min(self.nu.len())).rev() {
            acc = (acc + self.nu[i - 1]) * s;
        }
        self.mu + acc
    }

    /// `Lambda_{eps,n} = eps · mu_sum`.
    pub fn lambda(&self, eps: f64, n: usize) -> f64 {
        eps * self.mu_sum(eps, n)
    }

    /// Recomputes the coefficients from the stored flux values.
    pub fn recompute_nu(&self, p: &ProblemSpec) -> Vec<f64> {
        match self.mode.kind {
            ModeKind::SimpleA1 => {
                let y00 = self.left_coeffs[0].last().0;
                (1..=self.nu.len())
                    .map(|m| -p.kappa.value(0.0) * self.right_coeffs[m - 1].first().1 * y00)
                    .collect()
            }
            ModeKind::SimpleA2 => {
                let flux = p.kappa.value(0.0) * self.right_coeffs[0].first().1;
                (1..=self.nu.len()).map(|m| -flux * self.left_coeffs[m].last().0).collect()
            }
            ModeKind::Double => self.nu.clone(),
        }
    }
}

/// `Σ c_i t_i` over traces sharing an interval.
pub(crate) fn lin_comb(lo: f64, hi: f64, terms: &[(f64, &FunctionTrace)]) -> Result<FunctionTrace> {
    let mut acc: Option<FunctionTrace> = None;
    for &(c, t) in terms {
        if c == 0.0 {
            continue;
        }
        acc = Some(match acc {
            None => t.scaled(c),
            Some(a) => trace_combine(1.0, &a, c, t)?,
        });
    }
    Ok(acc.unwrap_or_else(|| FunctionTrace::zero(lo, hi)))
}

struct Ctx<'a> {
    p: &'a ProblemSpec,
    mu: f64,
    opts: &'a ExpandOptions,
    solv: Vec<f64>,
    ortho: Vec<f64>,
}

impl Ctx<'_> {
    #[allow(clippy::too_many_arguments)]
    fn solve(
        &mut self,
        left_side: bool,
        forcing_terms: &[(f64, &FunctionTrace)],
        left: EndCondition,
        right: EndCondition,
        kernel: Option<&FunctionTrace>,
        stage: &str,
    ) -> Result<FunctionTrace> {
        let p = self.p;
        let (pc, qc, lo, hi): (&Coefficient, &Coefficient, f64, f64) = if left_side {
            (&p.k, &p.r, p.a, 0.0)
        } else {
            (&p.kappa, &p.rho, 0.0, p.b)
        };
        let forcing = |x: f64| -qc.value(x) * forcing_terms.iter().map(|(c, t)| c * t.eval(x)).sum::<f64>();
        let spec = BvpSpec {
            p: pc,
            q: qc,
            mu: self.mu,
            lo,
            hi,
            forcing: &forcing,
            left,
            right,
            ortho: kernel.map(|k| Orthogonality { against: k, weight: qc }),
        };
        let sol = solve_bvp(&spec, self.opts.tol)?;
        if let Some(k) = kernel {
            if sol.solvability_residual > self.opts.solv_tol {
                return Err(Error::Solvability {
                    stage: stage.to_string(),
                    residual: sol.solvability_residual,
                });
            }
            self.solv.push(sol.solvability_residual);
            self.ortho.push(sol.trace.dot_coeff(k, qc).abs());
        }
        Ok(sol.trace)
    }
}

fn check_order(n: usize) -> Result<()> {
    if n > MAX_ORDER {
        return Err(Error::InvalidArgument(format!("order {n} exceeds the cap {MAX_ORDER}")));
    }
    Ok(())
}

fn filled(p: &ProblemSpec, mode: &LimitMode, opts: &ExpandOptions) -> Result<LimitMode> {
    let lopts = LimitOptions {
        tol: opts.tol,
        ..LimitOptions::default()
    };
    let m = if mode.u.is_none() {
        limit_eigenfunction(p, mode, &lopts)?
    } else {
        mode.clone()
    };
    if m.kind == ModeKind::Double && m.omega.is_none() {
        return adjoined_vector(p, &m, &lopts);
    }
    Ok(m)
}

fn flux_right(p: &ProblemSpec, t: &FunctionTrace) -> f64 {
    p.kappa.value(0.0) * t.first().1
}

/// Integer-power series of a simple eigenvalue of the left operator.
pub fn expand_simple_a1(p: &ProblemSpec, mode: &LimitMode, n: usize, opts: &ExpandOptions) -> Result<ExpansionSeries> {
    check_order(n)?;
    if mode.kind != ModeKind::SimpleA1 {
        return Err(Error::InvalidArgument(format!("expected a SimpleA1 mode, got {}", mode.kind)));
    }
    let mode = filled(p, mode, opts)?;
    let (y0, z0) = mode.u.clone().expect("filled");
    let mut series = ExpansionSeries {
        mu: mode.mu,
        mode: mode.clone(),
        branch: Branch::Single,
        order: n,
        nu: Vec::new(),
        left_coeffs: vec![y0.clone()],
        right_coeffs: vec![z0],
        alpha: Vec::new(),
        beta: Vec::new(),
        exact_flag: mode.exact,
        solvability_residuals: Vec::new(),
        orthogonality_residuals: Vec::new(),
    };
    if mode.exact {
        return Ok(series);
    }
    let mut ctx = Ctx {
        p,
        mu: mode.mu,
        opts,
        solv: Vec::new(),
        ortho: Vec::new(),
    };
    let y00 = y0.last().0;
    for m in 1..=n {
        let flux_prev = flux_right(p, &series.right_coeffs[m - 1]);
        let mut nu_m = -flux_prev * y00;
        if m == 1 {
            nu_m += opts.nu1_offset;
        }
        series.nu.push(nu_m);
        let left_terms: Vec<(f64, &FunctionTrace)> =
            (1..=m).map(|j| (series.nu[j - 1], &series.left_coeffs[m - j])).collect();
        let y_m = ctx.solve(
            true,
            &left_terms,
            EndCondition::Value(0.0),
            EndCondition::Flux(flux_prev),
            Some(&y0),
            &format!("left coefficient {m}"),
        )?;
        let right_terms: Vec<(f64, &FunctionTrace)> =
            (1..=m).map(|j| (series.nu[j - 1], &series.right_coeffs[m - j])).collect();
        let z_m = ctx.solve(
            false,
            &right_terms,
            EndCondition::Value(y_m.last().0),
            EndCondition::Value(0.0),
            None,
            &format!("right coefficient {m}"),
        )?;
        series.left_coeffs.push(y_m);
        series.right_coeffs.push(z_m);
    }
    series.solvability_residuals = ctx.solv;
    series.orthogonality_residuals = ctx.ortho;
    Ok(series)
}

/// Integer-power series of a simple Dirichlet eigenvalue of the right operator.
pub fn expand_simple_a2(p: &ProblemSpec, mode: &LimitMode, n: usize, opts: &ExpandOptions) -> Result<ExpansionSeries> {
    check_order(n)?;
    if mode.kind != ModeKind::SimpleA2 {
        return Err(Error::InvalidArgument(format!("expected a SimpleA2 mode, got {}", mode.kind)));
    }
    let mode = filled(p, mode, opts)?;
    let (y0, z0) = mode.u.clone().expect("filled");
    let mut series = ExpansionSeries {
        mu: mode.mu,
        mode: mode.clone(),
        branch: Branch::Single,
        order: n,
        nu: Vec::new(),
        left_coeffs: vec![y0],
        right_coeffs: vec![z0.clone()],
        alpha: Vec::new(),
        beta: Vec::new(),
        exact_flag: mode.exact,
        solvability_residuals: Vec::new(),
        orthogonality_residuals: Vec::new(),
    };
    let mut ctx = Ctx {
        p,
        mu: mode.mu,
        opts,
        solv: Vec::new(),
        ortho: Vec::new(),
    };
    let flux0 = flux_right(p, &z0);
    if mode.exact {
        // (eps y_1, z_0) is an exact eigenfunction for every eps.
        if n >= 1 {
            let y1 = ctx.solve(
                true,
                &[],
                EndCondition::Value(0.0),
                EndCondition::Flux(flux0),
                None,
                "left coefficient 1",
            )?;
            series.left_coeffs.push(y1);
            series.right_coeffs.push(FunctionTrace::zero(0.0, p.b));
        }
        series.solvability_residuals = ctx.solv;
        series.orthogonality_residuals = ctx.ortho;
        return Ok(series);
    }
    for m in 1..=n {
        let flux_prev = flux_right(p, &series.right_coeffs[m - 1]);
        let left_terms: Vec<(f64, &FunctionTrace)> =
            (1..m).map(|j| (series.nu[j - 1], &series.left_coeffs[m - j])).collect();
        let y_m = ctx.solve(
            true,
            &left_terms,
            EndCondition::Value(0.0),
            EndCondition::Flux(flux_prev),
            None,
            &format!("left coefficient {m}"),
        )?;
        let mut nu_m = -flux0 * y_m.last().0;
        if m == 1 {
            nu_m += opts.nu1_offset;
        }
        series.nu.push(nu_m);
        let right_terms: Vec<(f64, &FunctionTrace)> =
            (1..=m).map(|j| (series.nu[j - 1], &series.right_coeffs[m - j])).collect();
        let z_m = ctx.solve(
            false,
            &right_terms,
            EndCondition::Value(y_m.last().0),
            EndCondition::Value(0.0),
            Some(&z0),
            &format!("right coefficient {m}"),
        )?;
        series.left_coeffs.push(y_m);
        series.right_coeffs.push(z_m);
    }
    series.solvability_residuals = ctx.solv;
    series.orthogonality_residuals = ctx.ortho;
    Ok(series)
}

/// Half-power series of one branch of a double point; `sign = +1` gives
/// the branch with first coefficient `+omega`.
///
/// Writing `z_m = V_m + alpha_m v` and `y_m = W_m + beta_{m-1} w` with
/// `V_m`, `W_m` orthogonal to the kernels, stage `n >= 2` solves for
/// `V_{n-1}` and `W_n`, then fixes `nu_n`, `alpha_{n-1}` and
/// `beta_{n-1} = sign · alpha_{n-1}` from the solvability conditions of
/// the next right and left problems.
pub fn expand_branch(p: &ProblemSpec, mode: &LimitMode, n: usize, sign: f64, opts: &ExpandOptions) -> Result<ExpansionSeries> {
    check_order(n)?;
    if mode.kind != ModeKind::Double {
        return Err(Error::InvalidArgument(format!("expected a Double mode, got {}", mode.kind)));
    }
    let mode = filled(p, mode, opts)?;
    let v = mode.v.clone().expect("filled");
    let w = mode.w.clone().expect("filled");
    let omega = mode.omega.expect("filled");
    if omega.abs() < 1e-10 {
        return Err(Error::Degenerate(format!("coupling {omega:e} vanishes")));
    }
    let sigma = sign.signum();
    let w0 = w.last().0;
    let c_v = flux_right(p, &v);
    let mut ctx = Ctx {
        p,
        mu: mode.mu,
        opts,
        solv: Vec::new(),
        ortho: Vec::new(),
    };
    let (a, b) = (p.a, p.b);
    let mut nu = vec![sigma * omega + opts.nu1_offset];
    let mut alpha = vec![1.0];
    let mut beta = vec![-sigma];
    // Corrections V_m and W_m; V_0 = W_0 = W_1 = 0.
    let mut big_v = vec![FunctionTrace::zero(0.0, b)];
    let mut big_w = vec![FunctionTrace::zero(a, 0.0), FunctionTrace::zero(a, 0.0)];
    let mut z = vec![v.clone()];
    let mut y = vec![FunctionTrace::zero(a, 0.0), w.scaled(beta[0])];
    for stage in 2..=n + 1 {
        // V_{stage-1}: right problem of order stage-1.
        let m = stage - 1;
        let terms: Vec<(f64, &FunctionTrace)> = (1..=m).map(|j| (nu[j - 1], &z[m - j])).collect();
        let vm = ctx.solve(
            false,
            &terms,
            EndCondition::Value(y[m].last().0),
            EndCondition::Value(0.0),
            Some(&v),
            &format!("right correction {m}"),
        )?;
        // W_stage: left problem of order stage.
        let terms: Vec<(f64, &FunctionTrace)> = (1..stage).map(|j| (nu[j - 1], &y[stage - j])).collect();
        let wn = ctx.solve(
            true,
            &terms,
            EndCondition::Value(0.0),
            EndCondition::Flux(flux_right(p, &z[stage - 2])),
            Some(&w),
            &format!("left correction {stage}"),
        )?;
        let tail_a: f64 = (2..stage).map(|j| nu[j - 1] * alpha[stage - j]).sum();
        let tail_b: f64 = (2..stage).map(|j| nu[j - 1] * beta[stage - j]).sum();
        let rb = -c_v * wn.last().0 - tail_a;
        let ra = -w0 * flux_right(p, &vm) - tail_b;
        let nu_n = 0.5 * (rb - sigma * ra);
        let alpha_m = (sigma * rb + ra) / (4.0 * omega);
        let beta_m = sigma * alpha_m;
        alpha.push(alpha_m);
        beta.push(beta_m);
        nu.push(nu_n);
        z.push(lin_comb(0.0, b, &[(1.0, &vm), (alpha_m, &v)])?);
        y.push(lin_comb(a, 0.0, &[(1.0, &wn), (beta_m, &w)])?);
        big_v.push(vm);
        big_w.push(wn);
    }
    nu.truncate(n);
    z.truncate(n + 1);
    y.truncate(n + 1);
    Ok(ExpansionSeries {
        mu: mode.mu,
        mode,
        branch: if sigma > 0.0 { Branch::Plus } else { Branch::Minus },
        order: n,
        nu,
        left_coeffs: y,
        right_coeffs: z,
        alpha,
        beta,
        exact_flag: false,
        solvability_residuals: ctx.solv,
        orthogonality_residuals: ctx.ortho,
    })
}

/// Both branches `(Plus, Minus)` of a double point.
pub fn expand_double(
    p: &ProblemSpec,
    mode: &LimitMode,
    n: usize,
    opts: &ExpandOptions,
) -> Result<(ExpansionSeries, ExpansionSeries)> {
    let mode = filled(p, mode, opts)?;
    Ok((expand_branch(p, &mode, n, 1.0, opts)?, expand_branch(p, &mode, n, -1.0, opts)?))
}

/// All series of a mode: one for simple modes, `[Minus, Plus]` for
/// double points (ordered like the eigenvalues they approximate).
pub fn expand_mode(p: &ProblemSpec, mode: &LimitMode, n: usize, opts: &ExpandOptions) -> Result<Vec<ExpansionSeries>> {
    match mode.kind {
        ModeKind::SimpleA1 => Ok(vec![expand_simple_a1(p, mode, n, opts)?]),
        ModeKind::SimpleA2 => Ok(vec![expand_simple_a2(p, mode, n, opts)?]),
        ModeKind::Double => {
            let (plus, minus) = expand_double(p, mode, n, opts)?;
            Ok(vec![minus, plus])
        }
    }
}

/// Largest `|nu_m^- - (-1)^m nu_m^+|`.
pub fn sign_law_defect(plus: &ExpansionSeries, minus: &ExpansionSeries) -> f64 {
    plus.nu
        .iter()
        .zip(&minus.nu)
        .enumerate()
        .map(|(i, (a, b))| {
            let s = if (i + 1) % 2 == 0 { 1.0 } else { -1.0 };
            (b - s * a).abs()
        })
        .fold(0.0, f64::max)
}

/// Largest pointwise `|c_m^- - (-1)^m c_m^+|` over all coefficient traces.
pub fn coefficient_sign_law_defect(plus: &ExpansionSeries, minus: &ExpansionSeries) -> f64 {
    let mut worst = 0.0f64;
    for m in 0..plus.left_coeffs.len().min(minus.left_coeffs.len()) {
        let s = if m % 2 == 0 { 1.0 } else { -1.0 };
        worst = worst.max(minus.left_coeffs[m].sup_distance(&plus.left_coeffs[m].scaled(s)));
        worst = worst.max(minus.right_coeffs[m].sup_distance(&plus.right_coeffs[m].scaled(s)));
    }
    worst
}

/// Truncated series at a given `eps`, with the corrector that restores
/// the flux condition.
#[derive(Debug, Clone)]
pub struct PartialSum {
    pub epsilon: f64,
    pub order: usize,
    /// `Lambda_{eps,n}`, in the units of the original eigenvalue.
    pub lambda: f64,
    /// Truncated eigenfunction series.
    pub u: TracePair,
    /// `u` plus the corrector; satisfies every boundary and interface condition.
    pub v: TracePair,
    /// Flux mismatch `(k U')(-0) - eps (kappa U')(+0)` of `u`.
    pub beta_resid: f64,
    /// Quasimode residual `‖A_eps V - Lambda V‖_eps / ‖V‖_eps`.
    pub sigma: f64,
}

/// Corrector profile on `[a, 0]`: vanishes at both ends, slope -1 at 0.
pub fn corrector(a: f64, x: f64) -> (f64, f64, f64) {
    (x * (x / a - 1.0), 2.0 * x / a - 1.0, 2.0 / a)
}

/// Builds `Lambda_{eps,n}`, the truncated series and its corrected
/// version, and evaluates the quasimode residual. The residual of the
/// series itself is the tail `Σ_{i + m > n} nu_i s^{i+m} c_m` of the
/// product of the eigenvalue and eigenfunction series (every
/// coefficient solves its own recurrent problem); the corrector adds
/// `c ((k φ')' + M r φ)` on the left.
pub fn partial_sum(p: &ProblemSpec, series: &ExpansionSeries, eps: f64, n: usize) -> Result<PartialSum> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1], got {eps}")));
    }
    if n > series.order {
        return Err(Error::InvalidArgument(format!(
            "order {n} exceeds the series order {}",
            series.order
        )));
    }
    let s = series.step(eps);
    let (a, b) = (p.a, p.b);
    let nl = n.min(series.left_coeffs.len() - 1);
    let nr = n.min(series.right_coeffs.len() - 1);
    let powers: Vec<f64> = (0..=2 * n).map(|i| s.powi(i as i32)).collect();
    let left_terms: Vec<(f64, &FunctionTrace)> = (0..=nl).map(|m| (powers[m], &series.left_coeffs[m])).collect();
    let right_terms: Vec<(f64, &FunctionTrace)> = (0..=nr).map(|m| (powers[m], &series.right_coeffs[m])).collect();
    let ul = lin_comb(a, 0.0, &left_terms)?;
    let ur = lin_comb(0.0, b, &right_terms)?;
    let beta = p.k.value(0.0) * ul.last().1 - eps * p.kappa.value(0.0) * ur.first().1;
    let c = beta / p.k.value(0.0);
    let phi = FunctionTrace::new(
        ul.nodes().to_vec(),
        ul.nodes().iter().map(|&x| corrector(a, x).0).collect(),
        ul.nodes().iter().map(|&x| corrector(a, x).1).collect(),
    )?
    .with_second(vec![corrector(a, 0.0).2; ul.len()])?;
    let vl = trace_combine(1.0, &ul, c, &phi)?;
    let big_m = series.mu_sum(eps, n);
    let lambda = eps * big_m;

    // Tail coefficients: weight of c_m in the residual, divided by the density.
    let tail = |m: usize| -> f64 {
        ((n + 1 - m)..=n).map(|i| series.nu_at(i) * powers[i + m]).sum::<f64>()
    };
    let lt: Vec<f64> = (0..=nl).map(tail).collect();
    let rt: Vec<f64> = (0..=nr).map(tail).collect();
    let gl = |x: f64| {
        let r = p.r.value(x);
        let mut g = r * (0..=nl).map(|m| lt[m] * series.left_coeffs[m].eval(x)).sum::<f64>();
        let (f, df, d2f) = corrector(a, x);
        g += c * (p.k.derivative(x) * df + p.k.value(x) * d2f + big_m * r * f);
        g
    };
    let gr = |x: f64| p.rho.value(x) * (0..=nr).map(|m| rt[m] * series.right_coeffs[m].eval(x)).sum::<f64>();
    let left_sq = vl.integrate_over_nodes(|x| gl(x).powi(2) / p.r.value(x));
    let right_sq = ur.integrate_over_nodes(|x| gr(x).powi(2) / p.rho.value(x));
    let v = (vl, ur.clone());
    let vnorm = WeightedMetric::new(eps).norm(p, &v);
    let sigma = (eps * left_sq + eps * eps * right_sq).sqrt() / vnorm;
    Ok(PartialSum {
        epsilon: eps,
        order: n,
        lambda,
        u: (ul, ur),
        v,
        beta_resid: beta,
        sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expand::bvp::integral_residual;
    use crate::limit::{limit_spectrum, LimitMode};
    use crate::perturbed::{eigenpairs, eigenvalues, SOLVER_TOL};
    use approx::assert_relative_eq;
    use std::f64::consts::{PI, SQRT_2};

    fn demo_double() -> LimitMode {
        let p = ProblemSpec::demo();
        limit_spectrum(&p, 1, &LimitOptions::default()).unwrap().modes[0].clone()
    }

    #[test]
    fn demo_double_coefficients_match_closed_form() {
        // mu_pm(eps) = (pi/2 ± asin sqrt(eps/(2+2eps)))² expanded in sqrt(eps).
        let p = ProblemSpec::demo();
        let (plus, minus) = expand_double(&p, &demo_double(), 4, &ExpandOptions::default()).unwrap();
        let expected_plus = [PI / SQRT_2, 0.5, -5.0 * PI / (12.0 * SQRT_2), -5.0 / 12.0];
        for (m, e) in expected_plus.iter().enumerate() {
            assert_relative_eq!(plus.nu[m], *e, epsilon = 1e-9);
            let s = if (m + 1) % 2 == 0 { 1.0 } else { -1.0 };
            assert_relative_eq!(minus.nu[m], s * e, epsilon = 1e-9);
        }
        assert!(sign_law_defect(&plus, &minus) < 1e-9);
        assert!(coefficient_sign_law_defect(&plus, &minus) < 1e-8);
        assert!(plus.solvability_residuals.iter().all(|r| *r < 1e-8));
        assert!(plus.orthogonality_residuals.iter().all(|r| *r < 1e-9));
    }

    #[test]
    fn double_partial_sum_tracks_closed_form() {
        let p = ProblemSpec::demo();
        let (plus, minus) = expand_double(&p, &demo_double(), 3, &ExpandOptions::default()).unwrap();
        let eps: f64 = 1e-4;
        let t = (eps / (2.0 + 2.0 * eps)).sqrt().asin();
        let exact_plus = (PI / 2.0 + t).powi(2);
        let exact_minus = (PI / 2.0 - t).powi(2);
        assert!((plus.mu_sum(eps, 3) - exact_plus).abs() < 1e-7);
        assert!((minus.mu_sum(eps, 3) - exact_minus).abs() < 1e-7);
    }

    #[test]
    fn partial_sum_restores_flux_condition() {
        let p = ProblemSpec::new(-1.0, 2.0, "2 + x*x", "1", "1", "1 + x/4").unwrap();
        let lim = limit_spectrum(&p, 3, &LimitOptions::default()).unwrap();
        for mode in &lim.modes {
            for s in expand_mode(&p, mode, 2, &ExpandOptions::default()).unwrap() {
                let eps = 1e-2;
                let ps = partial_sum(&p, &s, eps, 2).unwrap();
                let (vl, vr) = &ps.v;
                let jump = p.k.value(0.0) * vl.last().1 - eps * p.kappa.value(0.0) * vr.first().1;
                let scale = 1.0 + (p.k.value(0.0) * vl.last().1).abs();
                assert!(jump.abs() < 1e-10 * scale, "{jump}");
                assert!(vl.first().0.abs() < 1e-12 && vr.last().0.abs() < 1e-12);
                assert!((vl.last().0 - vr.first().0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_mode_truncates() {
        let p = ProblemSpec::constant(-2.0, 2.0).unwrap();
        let lim = limit_spectrum(&p, 1, &LimitOptions::default()).unwrap();
        let s = expand_simple_a1(&p, &lim.modes[0], 3, &ExpandOptions::default()).unwrap();
        assert!(s.exact_flag);
        assert!(s.nu.is_empty());
        let ps = partial_sum(&p, &s, 1e-2, 3).unwrap();
        assert_relative_eq!(ps.lambda, 1e-2 * PI * PI / 16.0, max_relative = 1e-12);
        assert!(ps.sigma < 1e-9, "{}", ps.sigma);
    }

    #[test]
    fn exact_right_mode_keeps_first_left_coefficient() {
        let p = ProblemSpec::demo();
        let lim = limit_spectrum(&p, 3, &LimitOptions::default()).unwrap();
        let s = expand_simple_a2(&p, &lim.modes[2], 3, &ExpandOptions::default()).unwrap();
        assert!(s.exact_flag && s.nu.is_empty());
        assert_eq!(s.left_coeffs.len(), 2);
        let eps = 1e-3;
        let ps = partial_sum(&p, &s, eps, 3).unwrap();
        assert!(ps.beta_resid.abs() < 1e-12 && ps.sigma < 1e-12);
        let e = eigenpairs(&p, eps, 3, SOLVER_TOL).unwrap().remove(2);
        assert_relative_eq!(e.lambda, ps.lambda, max_relative = 1e-12);
        let (u, big_u) = (e.traces().unwrap(), &ps.u);
        let theta = big_u.1.eval(0.5) / u.1.eval(0.5);
        assert!(u.0.scaled(theta).sup_distance(&big_u.0) < 1e-11);
        assert!(u.1.scaled(theta).sup_distance(&big_u.1) < 1e-10);
    }

    #[test]
    fn simple_coefficients_against_solver_differences() {
        // nu_1 ≈ (mu(eps) - mu) / eps, extrapolated in eps.
        let p = ProblemSpec::constant(-1.0, 2f64.sqrt()).unwrap();
        let lim = limit_spectrum(&p, 3, &LimitOptions::default()).unwrap();
        for mode in lim.modes.iter().take(3) {
            let s = &expand_mode(&p, mode, 3, &ExpandOptions::default()).unwrap()[0];
            let j = lim.modes.iter().position(|m| m.mu == mode.mu).unwrap() + 1;
            let truth = |eps: f64| eigenvalues(&p, eps, j, SOLVER_TOL).unwrap()[j - 1].mu;
            let q = |eps: f64| (truth(eps) - s.mu) / eps;
            let (q1, q2) = (q(1e-4), q(5e-5));
            let extrapolated = 2.0 * q2 - q1;
            assert!((extrapolated - s.nu[0]).abs() < 1e-5 * (1.0 + s.nu[0].abs()), "{extrapolated} {}", s.nu[0]);
            // The second-order sum misses the solver by O(eps^3).
            let err = |eps: f64| (truth(eps) - s.mu_sum(eps, 2)).abs();
            let rate = (err(1e-3) / err(5e-4)).log2();
            assert!((rate - 3.0).abs() < 0.3, "{rate}");
        }
    }

    #[test]
    fn simple_invariants() {
        let p = ProblemSpec::new(-1.0, 2.0, "2 + x*x", "1", "1", "1 + x/4").unwrap();
        let lim = limit_spectrum(&p, 4, &LimitOptions::default()).unwrap();
        for mode in lim.modes.iter().filter(|m| m.kind != ModeKind::Double) {
            let s = expand_mode(&p, mode, 3, &ExpandOptions::default()).unwrap().remove(0);
            for (a, b) in s.recompute_nu(&p).iter().zip(&s.nu) {
                assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
            }
            assert!(s.solvability_residuals.iter().all(|r| *r < 1e-8));
            assert!(s.orthogonality_residuals.iter().all(|r| *r < 1e-9), "{:?}", s.orthogonality_residuals);
            // Each coefficient solves its recurrent problem.
            for m in 1..=3 {
                let lf = |x: f64| {
                    -p.r.value(x) * (1..=m).map(|j| s.nu[j - 1] * s.left_coeffs[m - j].eval(x)).sum::<f64>()
                };
                let rf = |x: f64| {
                    -p.rho.value(x) * (1..=m).map(|j| s.nu[j - 1] * s.right_coeffs[m - j].eval(x)).sum::<f64>()
                };
                assert!(integral_residual(&p.k, &p.r, s.mu, &s.left_coeffs[m], &lf) < 1e-8);
                assert!(integral_residual(&p.kappa, &p.rho, s.mu, &s.right_coeffs[m], &rf) < 1e-8);
            }
            if mode.kind == ModeKind::SimpleA2 {
                assert_eq!(s.left_coeffs[0].sup_norm(), 0.0);
            }
        }
    }

    #[test]
    fn corrupted_first_coefficient_breaks_solvability() {
        let p = ProblemSpec::demo();
        let opts = ExpandOptions {
            nu1_offset: 1e-3,
            ..ExpandOptions::default()
        };
        let err = expand_double(&p, &demo_double(), 2, &opts).unwrap_err();
        assert!(matches!(err, Error::Solvability { .. }));
        let q = ProblemSpec::constant(-1.0, SQRT_2).unwrap();
        let lim = limit_spectrum(&q, 3, &LimitOptions::default()).unwrap();
        let a2 = lim.modes.iter().find(|m| m.kind == ModeKind::SimpleA2).unwrap();
        let err = expand_simple_a2(&q, a2, 2, &opts).unwrap_err();
        assert!(matches!(err, Error::Solvability { .. }));
    }

    #[test]
    fn order_cap_and_kind_checks() {
        let p = ProblemSpec::demo();
        let m = demo_double();
        assert!(expand_double(&p, &m, MAX_ORDER + 1, &ExpandOptions::default()).is_err());
        assert!(expand_simple_a1(&p, &m, 1, &ExpandOptions::default()).is_err());
    }

    #[test]
    fn quasimode_residual_decays_for_double_branch() {
        let p = ProblemSpec::demo();
        let (plus, _) = expand_double(&p, &demo_double(), 2, &ExpandOptions::default()).unwrap();
        let s1 = partial_sum(&p, &plus, 1e-3, 2).unwrap().sigma;
        let s2 = partial_sum(&p, &plus, 1e-5, 2).unwrap().sigma;
        let slope = (s1 / s2).log10() / 2.0;
        assert!(slope > 1.0 - 0.15, "{slope}");
    }
}
