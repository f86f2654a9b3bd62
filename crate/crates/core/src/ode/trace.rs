use crate::coeffs::Coefficient;
use crate::error::{Error, Result};

/// A C¹ function on `[lo, hi]` stored as values and first derivatives at
/// increasing nodes, evaluated in between by cubic Hermite interpolation,
/// or quintic when second derivatives are stored as well.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionTrace {
    nodes: Vec<f64>,
    u: Vec<f64>,
    du: Vec<f64>,
    ddu: Option<Vec<f64>>,
}

// Five-point Gauss–Legendre rule on [-1, 1].
const GL5_X: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL5_W: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

impl FunctionTrace {
    pub fn new(nodes: Vec<f64>, u: Vec<f64>, du: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != u.len() || nodes.len() != du.len() {
            return Err(Error::InvalidArgument(format!(
                "trace needs at least two nodes and matching lengths (got {}, {}, {})",
                nodes.len(),
                u.len(),
                du.len()
            )));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("trace nodes must be strictly increasing".into()));
        }
        Ok(FunctionTrace { nodes, u, du, ddu: None })
    }

    /// Attaches second derivatives at the nodes.
    pub fn with_second(mut self, ddu: Vec<f64>) -> Result<Self> {
        if ddu.len() != self.nodes.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} second derivatives, got {}",
                self.nodes.len(),
                ddu.len()
            )));
        }
        self.ddu = Some(ddu);
        Ok(self)
    }

    /// The identically zero function on `[lo, hi]`.
    pub fn zero(lo: f64, hi: f64) -> Self {
        FunctionTrace {
            nodes: vec![lo, hi],
            u: vec![0.0; 2],
            du: vec![0.0; 2],
            ddu: Some(vec![0.0; 2]),
        }
    }

    /// Samples a function and its derivative on `n + 1` equispaced nodes.
    pub fn sample(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> (f64, f64)) -> Self {
        let n = n.max(1);
        let nodes: Vec<f64> = (0..=n)
            .map(|i| if i == n { hi } else { lo + (hi - lo) * i as f64 / n as f64 })
            .collect();
        let (u, du) = nodes.iter().map(|&x| f(x)).unzip();
        FunctionTrace { nodes, u, du, ddu: None }
    }

    pub fn lo(&self) -> f64 {
        self.nodes[0]
    }

    pub fn hi(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lo(), self.hi())
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn derivatives(&self) -> &[f64] {
        &self.du
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn cell(&self, x: f64) -> usize {
        let n = self.nodes.len();
        match self.nodes.binary_search_by(|t| t.partial_cmp(&x).unwrap_or(std::cmp::Ordering::Less)) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    /// Value and derivative at `x`. Points outside the interval are
    /// extrapolated from the end cells.
    pub fn eval_both(&self, x: f64) -> (f64, f64) {
        let (v, dv, _) = self.eval3(x);
        (v, dv)
    }

    /// Value, first and second derivative at `x`.
    pub fn eval3(&self, x: f64) -> (f64, f64, f64) {
        let i = self.cell(x);
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (u0, u1, d0, d1) = (self.u[i], self.u[i + 1], self.du[i], self.du[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        match &self.ddu {
            Some(dd) => {
                let (s0, s1) = (dd[i] * h * h, dd[i + 1] * h * h);
                let (e0, e1) = (d0 * h, d1 * h);
                let t4 = t3 * t;
                let t5 = t4 * t;
                let v = (1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5) * u0
                    + (t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5) * e0
                    + 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5) * s0
                    + (10.0 * t3 - 15.0 * t4 + 6.0 * t5) * u1
                    + (-4.0 * t3 + 7.0 * t4 - 3.0 * t5) * e1
                    + 0.5 * (t3 - 2.0 * t4 + t5) * s1;
                let dv = (-30.0 * t2 + 60.0 * t3 - 30.0 * t4) * (u0 - u1)
                    + (1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4) * e0
                    + (t - 4.5 * t2 + 6.0 * t3 - 2.5 * t4) * s0
                    + (-12.0 * t2 + 28.0 * t3 - 15.0 * t4) * e1
                    + (1.5 * t2 - 4.0 * t3 + 2.5 * t4) * s1;
                let ddv = (-60.0 * t + 180.0 * t2 - 120.0 * t3) * (u0 - u1)
                    + (-36.0 * t + 96.0 * t2 - 60.0 * t3) * e0
                    + (1.0 - 9.0 * t + 18.0 * t2 - 10.0 * t3) * s0
                    + (-24.0 * t + 84.0 * t2 - 60.0 * t3) * e1
                    + (3.0 * t - 12.0 * t2 + 10.0 * t3) * s1;
                (v, dv / h, ddv / (h * h))
            }
            None => {
                let v = (2.0 * t3 - 3.0 * t2 + 1.0) * u0
                    + (t3 - 2.0 * t2 + t) * h * d0
                    + (-2.0 * t3 + 3.0 * t2) * u1
                    + (t3 - t2) * h * d1;
                let dv =
                    (6.0 * t2 - 6.0 * t) / h * (u0 - u1) + (3.0 * t2 - 4.0 * t + 1.0) * d0 + (3.0 * t2 - 2.0 * t) * d1;
                let ddv = ((12.0 * t - 6.0) * (u0 - u1) / h + (6.0 * t - 4.0) * d0 + (6.0 * t - 2.0) * d1) / h;
                (v, dv, ddv)
            }
        }
    }

    pub fn second_derivatives(&self) -> Option<&[f64]> {
        self.ddu.as_deref()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_both(x).0
    }

    pub fn deriv(&self, x: f64) -> f64 {
        self.eval_both(x).1
    }

    pub fn first(&self) -> (f64, f64) {
        (self.u[0], self.du[0])
    }

    pub fn last(&self) -> (f64, f64) {
        let n = self.u.len() - 1;
        (self.u[n], self.du[n])
    }

    /// Scaled copy.
    pub fn scaled(&self, c: f64) -> Self {
        FunctionTrace {
            nodes: self.nodes.clone(),
            u: self.u.iter().map(|v| c * v).collect(),
            du: self.du.iter().map(|v| c * v).collect(),
            ddu: self.ddu.as_ref().map(|d| d.iter().map(|v| c * v).collect()),
        }
    }

    /// `∫ w · self · other` over the common interval, exact for the
    /// piecewise cubics when `w` is constant.
    pub fn weighted_dot(&self, other: &FunctionTrace, weight: impl Fn(f64) -> f64) -> f64 {
        let nodes = merge_nodes(&self.nodes, &other.nodes);
        integrate_cells(&nodes, |x| weight(x) * self.eval(x) * other.eval(x))
    }

    /// `∫ w · self' · other'` over the common interval.
    pub fn weighted_dot_deriv(&self, other: &FunctionTrace, weight: impl Fn(f64) -> f64) -> f64 {
        let nodes = merge_nodes(&self.nodes, &other.nodes);
        integrate_cells(&nodes, |x| weight(x) * self.deriv(x) * other.deriv(x))
    }

    pub fn dot_coeff(&self, other: &FunctionTrace, weight: &Coefficient) -> f64 {
        self.weighted_dot(other, |x| weight.value(x))
    }

    /// `∫ f` over the trace nodes with a five-point rule per cell.
    pub fn integrate_over_nodes(&self, f: impl Fn(f64) -> f64) -> f64 {
        integrate_cells(&self.nodes, f)
    }

    /// Largest absolute difference of values over both node sets and the
    /// cell midpoints.
    pub fn sup_distance(&self, other: &FunctionTrace) -> f64 {
        let nodes = merge_nodes(&self.nodes, &other.nodes);
        let mut m = 0.0f64;
        for w in nodes.windows(2) {
            for x in [w[0], 0.5 * (w[0] + w[1])] {
                m = m.max((self.eval(x) - other.eval(x)).abs());
            }
        }
        let x = nodes[nodes.len() - 1];
        m.max((self.eval(x) - other.eval(x)).abs())
    }

    /// Largest absolute value at nodes and cell midpoints.
    pub fn sup_norm(&self) -> f64 {
        let mut m = 0.0f64;
        for w in self.nodes.windows(2) {
            m = m.max(self.eval(0.5 * (w[0] + w[1])).abs());
        }
        self.u.iter().fold(m, |acc, v| acc.max(v.abs()))
    }
}

/// Sorted union of two node sets, dropping near-duplicates.
pub fn merge_nodes(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    all.sort_by(|x, y| x.total_cmp(y));
    let scale = all.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for x in all {
        match out.last() {
            Some(&last) if x - last <= 1e-14 * scale => {}
            _ => out.push(x),
        }
    }
    out
}

pub(crate) fn integrate_cells(nodes: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let mut sum = 0.0;
    for w in nodes.windows(2) {
        let c = 0.5 * (w[0] + w[1]);
        let h = 0.5 * (w[1] - w[0]);
        let mut s = 0.0;
        for k in 0..5 {
            s += GL5_W[k] * f(c + h * GL5_X[k]);
        }
        sum += h * s;
    }
    sum
}

/// Pointwise `alpha·t1 + beta·t2` on the merged node set.
pub fn trace_combine(alpha: f64, t1: &FunctionTrace, beta: f64, t2: &FunctionTrace) -> Result<FunctionTrace> {
    let (lo1, hi1) = t1.interval();
    let (lo2, hi2) = t2.interval();
    let tol = 1e-12 * (1.0 + lo1.abs().max(hi1.abs()));
    if (lo1 - lo2).abs() > tol || (hi1 - hi2).abs() > tol {
        return Err(Error::IntervalMismatch(lo1, hi1, lo2, hi2));
    }
    let nodes = merge_nodes(&t1.nodes, &t2.nodes);
    let mut u = Vec::with_capacity(nodes.len());
    let mut du = Vec::with_capacity(nodes.len());
    let mut ddu = Vec::with_capacity(nodes.len());
    for &x in &nodes {
        let (a, da, dda) = t1.eval3(x);
        let (b, db, ddb) = t2.eval3(x);
        u.push(alpha * a + beta * b);
        du.push(alpha * da + beta * db);
        ddu.push(alpha * dda + beta * ddb);
    }
    let t = FunctionTrace::new(nodes, u, du)?;
    if t1.ddu.is_some() && t2.ddu.is_some() {
        t.with_second(ddu)
    } else {
        Ok(t)
    }
}
