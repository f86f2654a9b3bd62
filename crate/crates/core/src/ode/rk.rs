//! Dormand–Prince 5(4) with mixed absolute/relative error control.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

pub(crate) struct Path<const N: usize> {
    pub xs: Vec<f64>,
    pub ys: Vec<[f64; N]>,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, ks: &[&[f64; N]], coef: &[f64]) -> [f64; N] {
    let mut out = *y;
    for (k, &c) in ks.iter().zip(coef) {
        if c != 0.0 {
            for i in 0..N {
                out[i] += h * c * k[i];
            }
        }
    }
    out
}

/// Integrates `y' = f(x, y)` from `from` to `to` (either direction).
/// Accepted steps are returned in increasing `x` order.
pub(crate) fn dopri<const N: usize, F>(
    mut f: F,
    from: f64,
    to: f64,
    y0: [f64; N],
    tol: f64,
    h_max: f64,
) -> Result<Path<N>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let span = to - from;
    let dir = span.signum();
    let length = span.abs();
    let mut xs = vec![from];
    let mut ys = vec![y0];
    if length == 0.0 {
        return Ok(Path { xs, ys });
    }
    let h_max = h_max.min(length);
    let h_min = 1e-14 * (from.abs().max(to.abs()) + length);
    let mut h = h_max.min(length / 100.0).max(h_min * 10.0);
    let mut x = from;
    let mut y = y0;
    let mut k1 = f(x, &y);
    loop {
        let remaining = (to - x) * dir;
        let last = h >= remaining * (1.0 - 1e-12);
        let step = if last { remaining } else { h };
        let hs = dir * step;
        let k2 = f(x + C[1] * hs, &axpy(&y, hs, &[&k1], &A2));
        let k3 = f(x + C[2] * hs, &axpy(&y, hs, &[&k1, &k2], &A3));
        let k4 = f(x + C[3] * hs, &axpy(&y, hs, &[&k1, &k2, &k3], &A4));
        let k5 = f(x + C[4] * hs, &axpy(&y, hs, &[&k1, &k2, &k3, &k4], &A5));
        let k6 = f(x + C[5] * hs, &axpy(&y, hs, &[&k1, &k2, &k3, &k4, &k5], &A6));
        let y_new = axpy(&y, hs, &[&k1, &k2, &k3, &k4, &k5, &k6], &B);
        let x_new = if last { to } else { x + hs };
        let k7 = f(x_new, &y_new);
        let mut err = 0.0;
        for i in 0..N {
            let e = hs
                * (E[0] * k1[i] + E[2] * k3[i] + E[3] * k4[i] + E[4] * k5[i] + E[5] * k6[i] + E[6] * k7[i]);
            let sc = tol * (1.0 + y[i].abs().max(y_new[i].abs()));
            err += (e / sc) * (e / sc);
        }
        let err = (err / N as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::StepUnderflow { x, h: step });
        }
        if err <= 1.0 {
            x = x_new;
            y = y_new;
            k1 = k7;
            xs.push(x);
            ys.push(y);
            if last {
                break;
            }
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (step * factor).min(h_max);
        if h < h_min {
            return Err(Error::StepUnderflow { x, h });
        }
    }
    if dir < 0.0 {
        xs.reverse();
        ys.reverse();
    }
    Ok(Path { xs, ys })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_growth() {
        let path = dopri(|_, y: &[f64; 1]| [y[0]], 0.0, 1.0, [1.0], 1e-12, 1.0).unwrap();
        assert_relative_eq!(path.ys.last().unwrap()[0], std::f64::consts::E, max_relative = 1e-11);
        assert_eq!(*path.xs.last().unwrap(), 1.0);
    }

    #[test]
    fn backward_direction_is_reordered() {
        let path = dopri(|_, y: &[f64; 2]| [y[1], -y[0]], 1.0, 0.0, [1f64.sin(), 1f64.cos()], 1e-12, 0.1).unwrap();
        assert_eq!(path.xs[0], 0.0);
        assert_eq!(*path.xs.last().unwrap(), 1.0);
        assert!(path.xs.windows(2).all(|w| w[1] > w[0]));
        assert!(path.ys[0][0].abs() < 1e-11);
        assert_relative_eq!(path.ys[0][1], 1.0, epsilon = 1e-11);
    }

    #[test]
    fn blow_up_is_reported() {
        let res = dopri(|_, y: &[f64; 1]| [y[0] * y[0]], 0.0, 2.0, [1.0], 1e-10, 1.0);
        assert!(res.is_err());
    }
}
