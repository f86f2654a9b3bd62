use serde::{Deserialize, Serialize};

use super::expr::{parse_coeff, CoeffExpr};
use crate::error::{Error, Result};

/// Number of subintervals used when sampling a coefficient for validation.
pub const VALIDATION_SAMPLES: usize = 1000;

const ENDPOINT_TOL: f64 = 1e-12;

/// A coefficient expression bound to the closed interval it lives on.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    expr: CoeffExpr,
    lo: f64,
    hi: f64,
}

impl Coefficient {
    pub fn new(expr: CoeffExpr, lo: f64, hi: f64) -> Self {
        Coefficient { expr, lo, hi }
    }

    pub fn parse(source: &str, lo: f64, hi: f64) -> Result<Self> {
        Ok(Coefficient::new(parse_coeff(source)?, lo, hi))
    }

    pub fn constant(value: f64, lo: f64, hi: f64) -> Self {
        Coefficient::new(CoeffExpr::constant(value), lo, hi)
    }

    pub fn expr(&self) -> &CoeffExpr {
        &self.expr
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn is_constant(&self) -> bool {
        self.expr.is_constant()
    }

    pub fn contains(&self, x: f64) -> bool {
        let tol = ENDPOINT_TOL * (1.0 + self.lo.abs().max(self.hi.abs()));
        x >= self.lo - tol && x <= self.hi + tol
    }

    /// Checked evaluation.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::Domain(format!(
                "x = {x} outside [{}, {}] for '{}'",
                self.lo,
                self.hi,
                self.expr.source()
            )));
        }
        let v = self.expr.eval(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain(format!(
                "'{}' is not finite at x = {x}",
                self.expr.source()
            )))
        }
    }

    /// Unchecked evaluation for inner loops, after validation.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.expr.eval(x)
    }

    /// First derivative by fourth-order finite differences, with the
    /// stencil kept inside the interval.
    pub fn derivative(&self, x: f64) -> f64 {
        let h = 1e-3 * (self.hi - self.lo).abs().max(1e-3);
        let f = |t: f64| self.expr.eval(t);
        if x - 2.0 * h >= self.lo && x + 2.0 * h <= self.hi {
            (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
        } else if x - 2.0 * h < self.lo {
            (-25.0 * f(x) + 48.0 * f(x + h) - 36.0 * f(x + 2.0 * h) + 16.0 * f(x + 3.0 * h)
                - 3.0 * f(x + 4.0 * h))
                / (12.0 * h)
        } else {
            (25.0 * f(x) - 48.0 * f(x - h) + 36.0 * f(x - 2.0 * h) - 16.0 * f(x - 3.0 * h)
                + 3.0 * f(x - 4.0 * h))
                / (12.0 * h)
        }
    }

    /// Minimum and maximum over the validation grid.
    pub fn sampled_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..=VALIDATION_SAMPLES {
            let x = self.lo + (self.hi - self.lo) * i as f64 / VALIDATION_SAMPLES as f64;
            let v = self.expr.eval(x);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }
}

/// The two-interval transmission problem: stiff part `(a, 0)` with
/// coefficients `k`, `r` and flexible part `(0, b)` with `kappa`, `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub a: f64,
    pub b: f64,
    pub k: Coefficient,
    pub r: Coefficient,
    pub kappa: Coefficient,
    pub rho: Coefficient,
}

/// Source-text form of a problem, used for configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSource {
    pub a: f64,
    pub b: f64,
    pub k: String,
    pub r: String,
    pub kappa: String,
    pub rho: String,
}

impl ProblemSpec {
    /// Parses the four coefficients without validating them.
    pub fn from_parts(a: f64, b: f64, k: &str, r: &str, kappa: &str, rho: &str) -> Result<Self> {
        Ok(ProblemSpec {
            a,
            b,
            k: Coefficient::parse(k, a, 0.0)?,
            r: Coefficient::parse(r, a, 0.0)?,
            kappa: Coefficient::parse(kappa, 0.0, b)?,
            rho: Coefficient::parse(rho, 0.0, b)?,
        })
    }

    /// Parses and validates.
    pub fn new(a: f64, b: f64, k: &str, r: &str, kappa: &str, rho: &str) -> Result<Self> {
        let p = Self::from_parts(a, b, k, r, kappa, rho)?;
        let report = validate_problem(&p);
        if report.ok {
            Ok(p)
        } else {
            Err(Error::InvalidProblem(report.failures.join("; ")))
        }
    }

    pub fn from_source(src: &ProblemSource) -> Result<Self> {
        Self::new(src.a, src.b, &src.k, &src.r, &src.kappa, &src.rho)
    }

    pub fn to_source(&self) -> ProblemSource {
        ProblemSource {
            a: self.a,
            b: self.b,
            k: self.k.expr().source().to_string(),
            r: self.r.expr().source().to_string(),
            kappa: self.kappa.expr().source().to_string(),
            rho: self.rho.expr().source().to_string(),
        }
    }

    /// Constant unit coefficients on `(a, 0) ∪ (0, b)`.
    pub fn constant(a: f64, b: f64) -> Result<Self> {
        Self::new(a, b, "1", "1", "1", "1")
    }

    /// The constant-coefficient demonstration problem on `(-1, 2)`.
    pub fn demo() -> Self {
        Self::constant(-1.0, 2.0).expect("demo problem is valid")
    }

    pub fn all_constant(&self) -> bool {
        self.k.is_constant() && self.r.is_constant() && self.kappa.is_constant() && self.rho.is_constant()
    }

    /// Piecewise stiffness: `k` on the left, `kappa` on the right.
    pub fn stiffness(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.k.value(x)
        } else {
            self.kappa.value(x)
        }
    }

    /// Piecewise density: `r` on the left, `rho` on the right.
    pub fn density(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.r.value(x)
        } else {
            self.rho.value(x)
        }
    }

    /// Minimum of the piecewise stiffness and maximum of the piecewise
    /// density over the validation grids.
    pub fn stiffness_min_density_max(&self) -> (f64, f64) {
        let kmin = self.k.sampled_range().0.min(self.kappa.sampled_range().0);
        let rmax = self.r.sampled_range().1.max(self.rho.sampled_range().1);
        (kmin, rmax)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub min_k: f64,
    pub min_r: f64,
    pub min_kappa: f64,
    pub min_rho: f64,
    pub failures: Vec<String>,
}

/// Checks interval sanity and strict positivity of every coefficient on a
/// grid of `VALIDATION_SAMPLES + 1` points.
pub fn validate_problem(p: &ProblemSpec) -> ValidationReport {
    let mut failures = Vec::new();
    if !(p.a.is_finite() && p.a < 0.0) {
        failures.push(format!("left endpoint a = {} must be negative", p.a));
    }
    if !(p.b.is_finite() && p.b > 0.0) {
        failures.push(format!("right endpoint b = {} must be positive", p.b));
    }
    let mut margin = |name: &str, c: &Coefficient| -> f64 {
        let (lo, hi) = c.interval();
        if !(lo < hi) {
            return f64::NAN;
        }
        if let Err(e) = c.expr().check_domain(lo, hi, VALIDATION_SAMPLES) {
            failures.push(format!("{name}: {e}"));
            return f64::NAN;
        }
        let (min, _) = c.sampled_range();
        if !(min > 0.0) {
            failures.push(format!("{name} = '{}' is not strictly positive (min {min})", c.expr().source()));
        }
        min
    };
    let min_k = margin("k", &p.k);
    let min_r = margin("r", &p.r);
    let min_kappa = margin("kappa", &p.kappa);
    let min_rho = margin("rho", &p.rho);
    ValidationReport {
        ok: failures.is_empty(),
        min_k,
        min_r,
        min_kappa,
        min_rho,
        failures,
    }
}
