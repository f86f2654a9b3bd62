//! Eigenvalue isolation by oscillation counting plus Brent refinement.

use crate::error::{Error, Result};

/// A Sturm–Liouville-type problem seen through two scalar functions of
/// the spectral parameter.
pub(crate) trait SturmCount {
    /// Number of eigenvalues strictly below `mu` (exact away from
    /// eigenvalues).
    fn count(&self, mu: f64) -> Result<usize>;
    /// A shooting determinant with a simple sign change at each eigenvalue.
    fn det(&self, mu: f64) -> Result<f64>;
}

/// Brent's method on a sign-changing bracket. Stops when the bracket is
/// below `xtol + rtol·|x|`.
pub(crate) fn brent(
    mut f: impl FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    rtol: f64,
    xtol: f64,
) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::RootSearch(format!(
            "no sign change on [{lo}, {hi}] ({fa:e}, {fb:e})"
        )));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 0.5 * (xtol + rtol * b.abs()) + f64::EPSILON * b.abs();
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
    }
    Err(Error::RootSearch(format!("Brent iteration did not converge near {b}")))
}

/// Finds an upper bound `hi` with `count(hi) >= n` by doubling from `start`.
pub(crate) fn upper_bound<S: SturmCount>(s: &S, n: usize, start: f64) -> Result<f64> {
    let mut hi = start.max(1e-3);
    for _ in 0..80 {
        if s.count(hi)? >= n {
            return Ok(hi);
        }
        hi *= 2.0;
    }
    Err(Error::RootSearch(format!("could not enclose {n} eigenvalues")))
}

/// The eigenvalues with indices `1..=n`, all assumed to lie in `(0, hi)`.
pub(crate) fn eigenvalues_below<S: SturmCount>(s: &S, n: usize, hi: f64, rtol: f64) -> Result<Vec<f64>> {
    // Sampled (mu, count) pairs kept sorted by mu.
    let mut samples: Vec<(f64, usize)> = vec![(0.0, 0), (hi, s.count(hi)?)];
    if samples[1].1 < n {
        return Err(Error::RootSearch(format!(
            "window (0, {hi}] holds only {} of {n} eigenvalues",
            samples[1].1
        )));
    }
    let mut out = Vec::with_capacity(n);
    for j in 1..=n {
        loop {
            let lo = samples.iter().rev().find(|(_, c)| *c < j).copied().unwrap_or((0.0, 0));
            let up = samples.iter().find(|(_, c)| *c >= j).copied().expect("upper sample exists");
            if lo.1 == j - 1 && up.1 == j {
                let root = brent(|m| s.det(m), lo.0, up.0, rtol, 1e-300)?;
                out.push(root);
                break;
            }
            let mid = 0.5 * (lo.0 + up.0);
            if up.0 - lo.0 <= 4.0 * f64::EPSILON * up.0.abs() {
                return Err(Error::RootSearch(format!(
                    "eigenvalues {j}..{} unresolved near {mid}",
                    up.1
                )));
            }
            let c = s.count(mid)?;
            let pos = samples.partition_point(|(m, _)| *m < mid);
            samples.insert(pos, (mid, c));
        }
    }
    Ok(out)
}
