use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: u32 = 50;

fn gk15(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod (7, 15) quadrature with absolute error target
/// `tol · (1 + |result|)`.
pub fn quad(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if lo == hi {
        return Ok(0.0);
    }
    let (whole, _) = gk15(&f, lo, hi);
    let target = tol * (1.0 + whole.abs());
    let mut total = 0.0;
    let mut stack = vec![(lo, hi, 0u32, target)];
    while let Some((a, b, depth, budget)) = stack.pop() {
        let (v, err) = gk15(&f, a, b);
        if !v.is_finite() {
            return Err(Error::Quadrature { lo, hi });
        }
        if err <= budget {
            total += v;
        } else if depth >= MAX_DEPTH {
            return Err(Error::Quadrature { lo, hi });
        } else {
            let m = 0.5 * (a + b);
            stack.push((a, m, depth + 1, 0.5 * budget));
            stack.push((m, b, depth + 1, 0.5 * budget));
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_integrals() {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let v = quad(|x| (half_pi * x).sin().powi(2), 0.0, 2.0, 1e-13).unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-13);
        assert_eq!(quad(|_| 1.0, -1.0, 0.0, 1e-13).unwrap(), 1.0);
        assert_relative_eq!(quad(|x| x.powi(3), 0.0, 1.0, 1e-13).unwrap(), 0.25, epsilon = 1e-15);
        assert_relative_eq!(quad(|x| x.sqrt(), 0.0, 1.0, 1e-10).unwrap(), 2.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let a = quad(|x| x.exp(), 0.0, 1.0, 1e-13).unwrap();
        let b = quad(|x| x.exp(), 1.0, 0.0, 1e-13).unwrap();
        assert_relative_eq!(a, -b, epsilon = 1e-15);
    }

    #[test]
    fn non_finite_fails() {
        assert!(quad(|x| 1.0 / x, 0.0, 1.0, 1e-10).is_err());
    }
}
