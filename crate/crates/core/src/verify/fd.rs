//! Independent eigenvalue oracle: a second-order flux-form finite
//! difference discretization with lumped mass, solved by Sturm bisection
//! on the symmetric tridiagonal form, then Richardson-extrapolated.

use crate::coeffs::ProblemSpec;
use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix: diagonal and off-diagonal.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiagonal {
    /// Number of eigenvalues strictly below `x` (LDLᵀ inertia).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0f64;
        for i in 0..self.diag.len() {
            let e2 = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] };
            q = self.diag[i] - x - if i == 0 { 0.0 } else { e2 / q };
            if q == 0.0 {
                q = -f64::EPSILON * (self.diag[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `j`-th smallest eigenvalue (1-based) by bisection.
    pub fn eigenvalue(&self, j: usize) -> f64 {
        // Gershgorin bounds.
        let n = self.diag.len();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi.abs().max(lo.abs()) {
                break;
            }
            if self.count_below(mid) >= j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Grid with a node on the interface: `n_left` cells on `(a, 0)` and
/// `n_right` cells on `(0, b)`.
fn grid_sizes(p: &ProblemSpec, n: usize) -> (usize, usize) {
    let len = p.b - p.a;
    let n_left = ((n as f64) * (-p.a) / len).round().max(2.0) as usize;
    let n_right = n.saturating_sub(n_left).max(2);
    (n_left, n_right)
}

/// Assembles `-(P u')' = mu W u` with `P = k / eps`, `W = r / eps` on the
/// left and `P = kappa`, `W = rho` on the right, Dirichlet at both ends,
/// and returns the symmetrized tridiagonal `M^{-1/2} A M^{-1/2}`.
pub fn assemble(p: &ProblemSpec, eps: f64, n: usize) -> Result<Tridiagonal> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1], got {eps}")));
    }
    let (nl, nr) = grid_sizes(p, n);
    let hl = -p.a / nl as f64;
    let hr = p.b / nr as f64;
    let x: Vec<f64> = (0..=nl)
        .map(|i| p.a + i as f64 * hl)
        .chain((1..=nr).map(|i| i as f64 * hr))
        .map(|v| if v.abs() < 1e-15 { 0.0 } else { v })
        .collect();
    let total = nl + nr;
    // Cell stiffness P_{i+1/2} / h for cells 0..total.
    let cell = |i: usize| -> f64 {
        let mid = 0.5 * (x[i] + x[i + 1]);
        if i < nl {
            p.k.value(mid) / eps / hl
        } else {
            p.kappa.value(mid) / hr
        }
    };
    let mass = |i: usize| -> f64 {
        let xi = x[i];
        if i < nl {
            p.r.value(xi) / eps * hl
        } else if i > nl {
            p.rho.value(xi) * hr
        } else {
            0.5 * (p.r.value(0.0) / eps * hl + p.rho.value(0.0) * hr)
        }
    };
    // Unknowns are the interior nodes 1..total-1.
    let m = total - 1;
    let mut diag = Vec::with_capacity(m);
    let mut off = Vec::with_capacity(m.saturating_sub(1));
    let s: Vec<f64> = (1..total).map(|i| mass(i).sqrt()).collect();
    for (k, i) in (1..total).enumerate() {
        diag.push((cell(i - 1) + cell(i)) / (s[k] * s[k]));
        if i + 1 < total {
            off.push(-cell(i) / (s[k] * s[k + 1]));
        }
    }
    Ok(Tridiagonal { diag, off })
}

/// First `count` values of `mu` on a grid of about `n` cells.
pub fn fd_eigenvalues(p: &ProblemSpec, eps: f64, count: usize, n: usize) -> Result<Vec<f64>> {
    let t = assemble(p, eps, n)?;
    Ok((1..=count).map(|j| t.eigenvalue(j)).collect())
}

/// Richardson extrapolation of the second-order values from grids of
/// `n` and `2n` cells.
pub fn fd_oracle(p: &ProblemSpec, eps: f64, count: usize, n: usize) -> Result<Vec<f64>> {
    let coarse = fd_eigenvalues(p, eps, count, n)?;
    let fine = fd_eigenvalues(p, eps, count, 2 * n)?;
    Ok(coarse.iter().zip(&fine).map(|(c, f)| (4.0 * f - c) / 3.0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn tridiagonal_counts() {
        // Discrete Laplacian on 4 nodes: eigenvalues 2 - 2 cos(k pi / 5).
        let t = Tridiagonal {
            diag: vec![2.0; 4],
            off: vec![-1.0; 3],
        };
        for k in 1..=4 {
            let e = 2.0 - 2.0 * (k as f64 * PI / 5.0).cos();
            assert_relative_eq!(t.eigenvalue(k), e, max_relative = 1e-13);
        }
        assert_eq!(t.count_below(0.0), 0);
        assert_eq!(t.count_below(5.0), 4);
    }

    #[test]
    fn unit_eps_string_is_second_order() {
        let p = ProblemSpec::demo();
        let exact = (PI / 3.0).powi(2);
        let e1 = (fd_eigenvalues(&p, 1.0, 1, 300).unwrap()[0] - exact).abs();
        let e2 = (fd_eigenvalues(&p, 1.0, 1, 600).unwrap()[0] - exact).abs();
        assert!((e1 / e2 - 4.0).abs() < 0.05, "{}", e1 / e2);
        let extrap = fd_oracle(&p, 1.0, 3, 600).unwrap();
        for (j, v) in extrap.iter().enumerate() {
            assert_relative_eq!(*v, ((j + 1) as f64 * PI / 3.0).powi(2), max_relative = 1e-8);
        }
    }

    #[test]
    fn demo_pair_from_the_oracle() {
        let p = ProblemSpec::demo();
        let eps: f64 = 0.01;
        let t = (eps / (2.0 + 2.0 * eps)).sqrt().asin();
        let v = fd_oracle(&p, eps, 2, 3000).unwrap();
        assert_relative_eq!(v[0], (PI / 2.0 - t).powi(2), max_relative = 1e-8);
        assert_relative_eq!(v[1], (PI / 2.0 + t).powi(2), max_relative = 1e-8);
    }
}
