//! Measurable diagnostics: convergence orders, quasimode residuals,
//! eigenvalue bounds, eigenfunction angles and projector distances.

pub mod fd;
mod studies;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expand::ExpandOptions;
use crate::limit::LimitOptions;
use crate::perturbed::SOLVER_TOL;

pub use fd::{fd_eigenvalues, fd_oracle, Tridiagonal};
pub use studies::{
    angle_study, bounds_check, containment_study, eigenfunction_error_study, h2_study, order_study, projector_study,
    quasimode_residual, series_for_index, subspace_distance, BoundsReport, BoundsRow, ContainmentReport,
    ContainmentRow, Metric,
};

/// Default slope tolerance.
pub const SLOPE_TOL: f64 = 0.15;

/// Fewest grid points above the resolution floor that a slope fit needs.
pub const MIN_RESOLVED: usize = 3;

/// Errors below this multiple of the solver tolerance are treated as noise.
pub const RESOLUTION_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub tol: f64,
    pub slope_tol: f64,
    /// Relative solver uncertainty added to the quasimode radius.
    pub containment_floor: f64,
    pub limit: LimitOptions,
    pub expand: ExpandOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            tol: SOLVER_TOL,
            slope_tol: SLOPE_TOL,
            containment_floor: 1e-11,
            limit: LimitOptions::default(),
            expand: ExpandOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub quantity: String,
    pub eps_grid: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log eps`; absent when
    /// every error sits at the numerical floor.
    pub fitted_slope: Option<f64>,
    pub expected_slope: f64,
    pub slope_tol: f64,
    pub pass: bool,
    /// Further per-point quantities reported alongside the errors.
    pub aux: BTreeMap<String, Vec<f64>>,
    pub note: Option<String>,
}

impl ConvergenceReport {
    /// Fits the slope over the points whose error exceeds `resolution`
    /// and passes iff it is within `slope_tol` of `expected`. Passes
    /// without a fit iff every error is at or below `floor`; fails when
    /// fewer than three points are resolved.
    pub fn new(
        quantity: &str,
        eps_grid: Vec<f64>,
        errors: Vec<f64>,
        expected: f64,
        slope_tol: f64,
        floor: f64,
        resolution: f64,
    ) -> Self {
        let at_floor = errors.iter().all(|e| *e <= floor);
        let (xs, ys): (Vec<f64>, Vec<f64>) = eps_grid
            .iter()
            .zip(&errors)
            .filter(|(_, e)| **e > resolution)
            .map(|(x, e)| (*x, *e))
            .unzip();
        let (fitted, pass, note) = if at_floor {
            (None, true, Some(format!("all errors below {floor:e}; slope fit skipped")))
        } else if xs.len() < MIN_RESOLVED {
            (None, false, Some(format!("only {} errors above {resolution:e}; slope not resolved", xs.len())))
        } else {
            let s = fit_slope(&xs, &ys);
            let note = (xs.len() < errors.len())
                .then(|| format!("fit over {} points above {resolution:e}", xs.len()));
            (Some(s), (s - expected).abs() <= slope_tol, note)
        };
        ConvergenceReport {
            quantity: quantity.to_string(),
            eps_grid,
            errors,
            fitted_slope: fitted,
            expected_slope: expected,
            slope_tol,
            pass,
            aux: BTreeMap::new(),
            note,
        }
    }

    pub fn with_aux(mut self, key: &str, values: Vec<f64>) -> Self {
        self.aux.insert(key.to_string(), values);
        self
    }

    /// True when the errors decrease strictly over the last `tail` grid points.
    pub fn monotone_tail(&self, tail: usize) -> bool {
        let n = self.errors.len();
        let start = n.saturating_sub(tail);
        self.errors[start..].windows(2).all(|w| w[1] < w[0])
    }
}

/// Least-squares slope of `log10 y` against `log10 x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.log10(), b.log10()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `n` log-spaced values from `hi` down to `lo`.
pub fn log_grid(hi: f64, lo: f64, n: usize) -> Result<Vec<f64>> {
    if !(hi > lo && lo > 0.0) || n < 2 {
        return Err(Error::InvalidArgument(format!("bad grid [{lo}, {hi}] with {n} points")));
    }
    let (a, b) = (hi.log10(), lo.log10());
    Ok((0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect())
}

/// Seven log-spaced points from `1e-2` down to `1e-5`.
pub fn default_grid() -> Vec<f64> {
    log_grid(1e-2, 1e-5, 7).expect("valid grid")
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 4 {
        return Err(Error::InvalidArgument(format!("eps grid needs at least 4 points, got {}", grid.len())));
    }
    if grid.iter().any(|e| !(*e > 0.0 && *e <= 0.1)) {
        return Err(Error::InvalidArgument("eps grid must lie in (0, 0.1]".into()));
    }
    if grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("eps grid must be strictly decreasing".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn slope_of_power_law() {
        let x = default_grid();
        let y: Vec<f64> = x.iter().map(|e| 3.0 * e.powf(1.5)).collect();
        assert_relative_eq!(fit_slope(&x, &y), 1.5, epsilon = 1e-12);
        let r = ConvergenceReport::new("t", x.clone(), y, 1.5, 0.15, 0.0, 0.0);
        assert!(r.pass && r.monotone_tail(4));
        let flat = ConvergenceReport::new("t", x.clone(), vec![1e-14; 7], 1.0, 0.15, 1e-12, 0.0);
        assert!(flat.pass && flat.fitted_slope.is_none());
        let wrong: Vec<f64> = x.iter().map(|e| e.powf(0.5)).collect();
        assert!(!ConvergenceReport::new("t", x, wrong, 1.0, 0.15, 0.0, 0.0).pass);
    }

    #[test]
    fn noise_floor_points_are_left_out_of_the_fit() {
        let x = default_grid();
        let y: Vec<f64> = x.iter().map(|e| (e * e * e).max(1e-13)).collect();
        let raw = ConvergenceReport::new("t", x.clone(), y.clone(), 3.0, 0.15, 0.0, 0.0);
        assert!(!raw.pass);
        let r = ConvergenceReport::new("t", x.clone(), y.clone(), 3.0, 0.15, 0.0, 1e-12);
        assert_relative_eq!(r.fitted_slope.unwrap(), 3.0, epsilon = 1e-10);
        assert!(r.pass);
        // Too few resolved points is a failure, not a pass.
        let thin = ConvergenceReport::new("t", x, y, 3.0, 0.15, 0.0, 1e-8);
        assert!(!thin.pass && thin.fitted_slope.is_none());
    }

    #[test]
    fn grids() {
        let g = default_grid();
        assert_eq!(g.len(), 7);
        assert_relative_eq!(g[0], 1e-2, max_relative = 1e-14);
        assert_relative_eq!(g[6], 1e-5, max_relative = 1e-14);
        assert_relative_eq!(g[2], 1e-3, max_relative = 1e-14);
        assert!(check_grid(&g).is_ok());
        assert!(check_grid(&g[..3]).is_err());
        assert!(check_grid(&[1e-2, 1e-3, 1e-3, 1e-4]).is_err());
        assert!(log_grid(1e-5, 1e-2, 4).is_err());
    }

    // A shifted grid changes the fitted slope of a clean power law with a
    // higher-order correction by less than 0.05.
    #[test]
    fn slope_is_stable_under_grid_shift() {
        let f = |e: f64| e * (1.0 + 2.0 * e.sqrt());
        let g1 = default_grid();
        let g2 = log_grid(5e-3, 5e-6, 7).unwrap();
        let s1 = fit_slope(&g1, &g1.iter().map(|e| f(*e)).collect::<Vec<_>>());
        let s2 = fit_slope(&g2, &g2.iter().map(|e| f(*e)).collect::<Vec<_>>());
        assert!((s1 - s2).abs() < 0.05);
    }
}
