use anyhow::Result;
use serde::Serialize;
use stiffflex::expand::{expand_mode, ExpandOptions, ExpansionSeries};
use stiffflex::limit::{limit_spectrum, LimitOptions, ModeKind};
use stiffflex::ode::FunctionTrace;
use stiffflex::perturbed::{eigenpairs, eigenvalues};
use stiffflex::verify::{
    angle_study, bounds_check, containment_study, default_grid, eigenfunction_error_study, h2_study, order_study,
    projector_study, BoundsReport, ContainmentReport, ConvergenceReport, Metric, VerifyOptions,
};
use stiffflex::{Error, ProblemSpec};

use crate::config::{RunConfig, Study, ALL_STUDIES};
use crate::output::{Cell, Header, Table, Writer};

const COEFF_SAMPLES: usize = 21;

fn limit_options(cfg: &RunConfig) -> LimitOptions {
    LimitOptions {
        tol: cfg.run.tol,
        cluster_tol: cfg.run.cluster_tol,
        ..LimitOptions::default()
    }
}

fn expand_options(cfg: &RunConfig) -> ExpandOptions {
    ExpandOptions {
        tol: cfg.run.tol,
        nu1_offset: cfg.run.nu1_offset,
        ..ExpandOptions::default()
    }
}

fn verify_options(cfg: &RunConfig) -> VerifyOptions {
    VerifyOptions {
        tol: cfg.run.tol,
        slope_tol: cfg.run.slope_tol,
        limit: limit_options(cfg),
        expand: expand_options(cfg),
        ..VerifyOptions::default()
    }
}

pub fn solve(p: &ProblemSpec, cfg: &RunConfig, out: &mut Writer) -> Result<()> {
    let header = Header::new("solve", cfg);
    let eps_list = cfg.run.eps.clone().unwrap_or_else(|| vec![1e-2]);
    let mut table = Table::new(&["j", "epsilon", "lambda", "mu"]);
    for (i, &eps) in eps_list.iter().enumerate() {
        let pairs = if cfg.output.samples > 0 {
            eigenpairs(p, eps, cfg.run.count, cfg.run.tol)?
        } else {
            eigenvalues(p, eps, cfg.run.count, cfg.run.tol)?
        };
        for e in &pairs {
            table.push(vec![Cell::Int(e.j), Cell::Float(eps), Cell::Float(e.lambda), Cell::Float(e.mu)]);
            println!("eps={eps:e} j={} lambda={:.12e} mu={:.12}", e.j, e.lambda, e.mu);
        }
        if cfg.output.samples > 0 {
            let mut t = Table::new(&["j", "x", "u", "du"]);
            for e in &pairs {
                let (l, r) = e.traces()?;
                for side in [l, r] {
                    for (x, u, du) in sample(side, cfg.output.samples) {
                        t.push(vec![Cell::Int(e.j), Cell::Float(x), Cell::Float(u), Cell::Float(du)]);
                    }
                }
            }
            out.table(&format!("eigenfunctions_{i}"), &header, &t)?;
        }
    }
    out.table("eigenvalues", &header, &table)
}

fn sample(t: &FunctionTrace, n: usize) -> Vec<(f64, f64, f64)> {
    let n = n.max(2);
    (0..n)
        .map(|i| {
            let x = t.lo() + (t.hi() - t.lo()) * i as f64 / (n - 1) as f64;
            let (u, du) = t.eval_both(x);
            (x, u, du)
        })
        .collect()
}

pub fn limit(p: &ProblemSpec, cfg: &RunConfig, out: &mut Writer) -> Result<()> {
    let header = Header::new("limit", cfg);
    let lim = limit_spectrum(p, cfg.run.count, &limit_options(cfg))?;
    let mut table = Table::new(&["index", "mu", "kind", "omega", "exact"]);
    for (j, m) in lim.modes.iter().enumerate().take(cfg.run.count) {
        let first_of_pair = m.kind == ModeKind::Double && (j == 0 || lim.modes[j - 1].mu != m.mu || {
            let start = lim.modes.iter().position(|o| o.mu == m.mu).unwrap_or(j);
            (j - start) % 2 == 0
        });
        let omega = match m.omega {
            Some(w) if first_of_pair => Cell::Float(w),
            _ => Cell::Empty,
        };
        table.push(vec![
            Cell::Int(j + 1),
            Cell::Float(m.mu),
            Cell::Text(m.kind.to_string()),
            omega,
            Cell::Text(m.exact.to_string()),
        ]);
        println!(
            "{} mu={:.10} {}{}{}",
            j + 1,
            m.mu,
            m.kind,
            m.omega.filter(|_| first_of_pair).map(|w| format!(" omega={w:.10}")).unwrap_or_default(),
            if m.exact { " exact" } else { "" }
        );
    }
    out.table("limit_spectrum", &header, &table)
}

#[derive(Serialize)]
struct SeriesRecord {
    index: usize,
    mu: f64,
    kind: String,
    branch: String,
    order: usize,
    nu: Vec<f64>,
    exact_flag: bool,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    solvability_residuals: Vec<f64>,
    orthogonality_residuals: Vec<f64>,
    coefficients: Vec<SampledCoefficient>,
}

#[derive(Serialize)]
struct SampledCoefficient {
    m: usize,
    left_x: Vec<f64>,
    left: Vec<f64>,
    right_x: Vec<f64>,
    right: Vec<f64>,
}

fn record(index: usize, s: &ExpansionSeries) -> SeriesRecord {
    let split = |t: &FunctionTrace| -> (Vec<f64>, Vec<f64>) {
        sample(t, COEFF_SAMPLES).into_iter().map(|(x, u, _)| (x, u)).unzip()
    };
    let coefficients = s
        .left_coeffs
        .iter()
        .zip(&s.right_coeffs)
        .enumerate()
        .map(|(m, (l, r))| {
            let (left_x, left) = split(l);
            let (right_x, right) = split(r);
            SampledCoefficient {
                m,
                left_x,
                left,
                right_x,
                right,
            }
        })
        .collect();
    SeriesRecord {
        index,
        mu: s.mu,
        kind: s.mode.kind.to_string(),
        branch: s.branch.to_string(),
        order: s.order,
        nu: s.nu.clone(),
        exact_flag: s.exact_flag,
        alpha: s.alpha.clone(),
        beta: s.beta.clone(),
        solvability_residuals: s.solvability_residuals.clone(),
        orthogonality_residuals: s.orthogonality_residuals.clone(),
        coefficients,
    }
}

pub fn expand(p: &ProblemSpec, cfg: &RunConfig, out: &mut Writer) -> Result<()> {
    let header = Header::new("expand", cfg);
    let lim = limit_spectrum(p, cfg.run.count, &limit_options(cfg))?;
    let mut records = Vec::new();
    for (j, mode) in lim.distinct() {
        for (k, s) in expand_mode(p, mode, cfg.run.order, &expand_options(cfg))?.iter().enumerate() {
            let nu: Vec<String> = s.nu.iter().map(|v| format!("{v:.10}")).collect();
            println!(
                "{} mu={:.10} {} {}{}: nu = [{}]",
                j + k,
                s.mu,
                s.mode.kind,
                s.branch,
                if s.exact_flag { " exact" } else { "" },
                nu.join(", ")
            );
            records.push(record(j + k, s));
        }
    }
    out.json("series.json", &header, "series", &records)
}

#[derive(Serialize, Default)]
struct Report {
    pass: bool,
    failures: Vec<String>,
    convergence: Vec<ConvergenceReport>,
    bounds: Option<BoundsReport>,
    containment: Option<ContainmentReport>,
}

impl Report {
    fn convergence(&mut self, r: ConvergenceReport) {
        println!(
            "{} {}: slope {} (expected {}){}",
            if r.pass { "PASS" } else { "FAIL" },
            r.quantity,
            r.fitted_slope.map_or("skipped".to_string(), |s| format!("{s:.3}")),
            r.expected_slope,
            r.note.as_ref().map(|n| format!(" [{n}]")).unwrap_or_default()
        );
        if !r.pass {
            self.failures.push(r.quantity.clone());
        }
        self.convergence.push(r);
    }

    /// Solvability breakdowns are verification failures; any other error aborts.
    fn absorb<T>(&mut self, what: &str, r: stiffflex::Result<T>) -> Result<Option<T>> {
        match r {
            Ok(v) => Ok(Some(v)),
            Err(e @ Error::Solvability { .. }) => {
                println!("FAIL {what}: {e}");
                self.failures.push(format!("{what}: {e}"));
                Ok(None)
            }
            Err(e) => Err(e.into()),
        }
    }
}

/// One row per study and grid point: the error and the fitted power law there.
fn convergence_table(reports: &[ConvergenceReport]) -> Table {
    let mut t = Table::new(&["quantity", "epsilon", "error", "fit"]);
    for r in reports {
        let pts: Vec<(f64, f64)> = r
            .eps_grid
            .iter()
            .zip(&r.errors)
            .filter(|(_, e)| **e > 0.0)
            .map(|(x, e)| (x.log10(), e.log10()))
            .collect();
        let intercept = r.fitted_slope.filter(|_| !pts.is_empty()).map(|s| {
            let n = pts.len() as f64;
            pts.iter().map(|p| p.1).sum::<f64>() / n - s * pts.iter().map(|p| p.0).sum::<f64>() / n
        });
        for (&eps, &err) in r.eps_grid.iter().zip(&r.errors) {
            let fit = match (r.fitted_slope, intercept) {
                (Some(s), Some(c)) => Cell::Float(10f64.powf(c + s * eps.log10())),
                _ => Cell::Empty,
            };
            t.push(vec![Cell::Text(r.quantity.clone()), Cell::Float(eps), Cell::Float(err), fit]);
        }
    }
    t
}

/// Runs the selected studies; returns whether all passed.
pub fn verify(p: &ProblemSpec, cfg: &RunConfig, out: &mut Writer) -> Result<bool> {
    let header = Header::new("verify", cfg);
    let opts = verify_options(cfg);
    let grid = cfg.run.grid.clone().unwrap_or_else(default_grid);
    let studies: Vec<Study> = if cfg.run.studies.is_empty() {
        ALL_STUDIES.to_vec()
    } else {
        cfg.run.studies.clone()
    };
    let wants = |s: Study| studies.contains(&s);
    let (count, order) = (cfg.run.count, cfg.run.order);
    let lim = limit_spectrum(p, count, &opts.limit)?;
    let mut rep = Report::default();

    for j in 1..=count {
        let double = lim.modes[j - 1].kind == ModeKind::Double;
        for n in 0..=order {
            if wants(Study::Order) {
                if let Some(r) = rep.absorb(&format!("order j={j} n={n}"), order_study(p, j, n, &grid, &opts))? {
                    rep.convergence(r);
                }
            }
            if wants(Study::Eigenfunction) {
                let r = eigenfunction_error_study(p, j, n, &grid, &opts);
                if let Some(r) = rep.absorb(&format!("eigenfunction j={j} n={n}"), r)? {
                    rep.convergence(r);
                }
            }
        }
        if !double && wants(Study::H2) {
            let (l, r) = h2_study(p, j, &grid, &opts)?;
            rep.convergence(l);
            rep.convergence(r);
        }
    }
    for (j, mode) in lim.distinct() {
        if mode.kind != ModeKind::Double || j + 1 > lim.modes.len() {
            continue;
        }
        if wants(Study::Angle) {
            rep.convergence(angle_study(p, j, &grid, &opts)?);
        }
        if wants(Study::Projector) {
            rep.convergence(projector_study(p, j, &grid, Metric::Weighted, &opts)?);
        }
    }
    if wants(Study::Bounds) {
        let b = bounds_check(p, &grid, count, &opts)?;
        println!("{} bounds: {} rows", if b.pass { "PASS" } else { "FAIL" }, b.rows.len());
        if !b.pass {
            rep.failures.push("bounds".into());
        }
        rep.bounds = Some(b);
    }
    if wants(Study::Containment) {
        if let Some(c) = rep.absorb("containment", containment_study(p, count, order.min(3), &grid, &opts))? {
            println!(
                "{} containment: {} quasimodes, {} violations",
                if c.violations == 0 { "PASS" } else { "FAIL" },
                c.rows.len(),
                c.violations
            );
            if c.violations > 0 {
                rep.failures.push(format!("containment: {} violations", c.violations));
            }
            rep.containment = Some(c);
        }
    }
    rep.pass = rep.failures.is_empty();
    out.table("convergence", &header, &convergence_table(&rep.convergence))?;
    out.json("report.json", &header, "report", &rep)?;
    Ok(rep.pass)
}
