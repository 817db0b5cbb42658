//! Numerical building blocks: compensated summation, deterministic Monte
//! Carlo reductions, adaptive Gauss–Kronrod and Gauss–Legendre rules.

use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        iter.into_iter().for_each(|x| s.add(x));
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Sample mean and variance accumulator (Welford), mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl SampleStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan's pairwise merge.
    pub fn merge(&mut self, other: &SampleStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Replicates per reduction block; fixed so that the merge tree never
/// depends on how rayon schedules work.
pub const MC_BLOCK: u64 = 256;

/// Runs `body(r)` for replicates `0..n` and reduces each output coordinate
/// to sample statistics. Blocks are reduced sequentially and merged in block
/// order, so the result is bitwise independent of the thread count.
///
/// Replicates whose body returns `Ok(None)` are counted as excluded.
pub fn mc_reduce<F>(n: u64, width: usize, body: F) -> Result<(Vec<SampleStats>, u64)>
where
    F: Fn(u64, &mut Vec<f64>) -> Result<bool> + Sync,
{
    let blocks = n.div_ceil(MC_BLOCK);
    let partial: Vec<Result<(Vec<SampleStats>, u64)>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut stats = vec![SampleStats::default(); width];
            let mut excluded = 0;
            let mut out = Vec::with_capacity(width);
            for r in b * MC_BLOCK..((b + 1) * MC_BLOCK).min(n) {
                out.clear();
                if body(r, &mut out)? {
                    for (s, &x) in stats.iter_mut().zip(out.iter()) {
                        s.push(x);
                    }
                } else {
                    excluded += 1;
                }
            }
            Ok((stats, excluded))
        })
        .collect();
    let mut total = vec![SampleStats::default(); width];
    let mut excluded = 0;
    for p in partial {
        let (stats, ex) = p?;
        for (t, s) in total.iter_mut().zip(stats.iter()) {
            t.merge(s);
        }
        excluded += ex;
    }
    Ok((total, excluded))
}

// 7-point Gauss / 15-point Kronrod abscissae and weights on [-1, 1].
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

/// One G7/K15 panel: returns the Kronrod estimate and the QUADPACK error
/// estimate derived from `|K − G|`.
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    let mut abs = fc.abs() * WGK[7];
    let mut vals = [(0.0, 0.0); 7];
    for j in 0..7 {
        let x = h * XGK[j];
        let (f1, f2) = (f(c - x), f(c + x));
        vals[j] = (f1, f2);
        k += WGK[j] * (f1 + f2);
        abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * k;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((vals[j].0 - mean).abs() + (vals[j].1 - mean).abs());
    }
    let (abs, asc) = (abs * h.abs(), asc * h.abs());
    let mut err = ((k - g) * h).abs();
    if asc != 0.0 && err != 0.0 {
        err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
    }
    if abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * abs);
    }
    (k * h, err)
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Result of an adaptive quadrature.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
    pub converged: bool,
}

/// Relative accuracy below which the K15 error estimate is rounding noise.
pub const QUAD_REL_FLOOR: f64 = 1e-13;

/// Globally adaptive G7K15 on `[a, b]`, bisecting the worst panel until the
/// summed error estimate is below `max(tol, QUAD_REL_FLOOR·|value|)` or the
/// panel budget is spent. Never fails; see `converged`.
pub fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_panels: usize,
) -> Quadrature {
    if a == b {
        return Quadrature { value: 0.0, error: 0.0, panels: 0, converged: true };
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value: v, err: e });
    let mut total_err = e;
    let mut value = v;
    let mut panels = 1;
    while total_err > tol.max(QUAD_REL_FLOOR * value.abs()) {
        if panels >= max_panels {
            return Quadrature { value, error: total_err, panels, converged: false };
        }
        let worst = heap.pop().expect("non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // panel no longer splittable in floating point
            heap.push(Panel { err: 0.0, ..worst });
        } else {
            let (v1, e1) = gk15(&mut f, worst.a, mid);
            let (v2, e2) = gk15(&mut f, mid, worst.b);
            heap.push(Panel { a: worst.a, b: mid, value: v1, err: e1 });
            heap.push(Panel { a: mid, b: worst.b, value: v2, err: e2 });
            panels += 1;
        }
        total_err = heap.iter().map(|p| p.err).sum();
        value = compensated_sum(heap.iter().map(|p| p.value));
    }
    Quadrature { value, error: total_err, panels, converged: true }
}

/// As [`adaptive`], failing with [`Error::Numerical`] when the budget is
/// spent before the tolerance is met.
pub fn integrate<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_panels: usize,
) -> Result<Quadrature> {
    let q = adaptive(f, a, b, tol, max_panels);
    if !q.converged {
        return Err(stalled(a, b, &q, tol));
    }
    Ok(q)
}

pub(crate) fn stalled(a: f64, b: f64, q: &Quadrature, tol: f64) -> Error {
    Error::Numerical(format!(
        "adaptive quadrature on [{a}, {b}] stalled after {} panels: estimate {:e}, error {:e} > tol {tol:e}",
        q.panels, q.value, q.error
    ))
}

/// Integrates over `[a, b]` after the power substitutions
/// `x = a + (m−a) s^γ` on the left half and `x = b − (b−m) s^γ` on the
/// right half. With `γ = 1/(α+1)` an endpoint factor `|x − e|^α`, `α > −1`,
/// becomes bounded. Never fails; see `converged`.
pub fn adaptive_endpoint_singular<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    gamma: f64,
    tol: f64,
    max_panels: usize,
) -> Quadrature {
    let mid = 0.5 * (a + b);
    let hl = mid - a;
    let hr = b - mid;
    let left = adaptive(
        |s| {
            if s <= 0.0 {
                return 0.0;
            }
            let sp = s.powf(gamma - 1.0);
            let x = a + hl * sp * s;
            if x == a {
                return 0.0;
            }
            f(x) * hl * gamma * sp
        },
        0.0,
        1.0,
        0.5 * tol,
        max_panels,
    );
    let right = adaptive(
        |s| {
            if s <= 0.0 {
                return 0.0;
            }
            let sp = s.powf(gamma - 1.0);
            let x = b - hr * sp * s;
            if x == b {
                return 0.0;
            }
            f(x) * hr * gamma * sp
        },
        0.0,
        1.0,
        0.5 * tol,
        max_panels,
    );
    Quadrature {
        value: left.value + right.value,
        error: left.error + right.error,
        panels: left.panels + right.panels,
        converged: left.converged && right.converged,
    }
}

/// As [`adaptive_endpoint_singular`], failing when the budget is spent.
pub fn integrate_endpoint_singular<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    gamma: f64,
    tol: f64,
    max_panels: usize,
) -> Result<Quadrature> {
    let q = adaptive_endpoint_singular(f, a, b, gamma, tol, max_panels);
    if !q.converged {
        return Err(stalled(a, b, &q, tol));
    }
    Ok(q)
}

/// Fixed quadrature rule on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct FixedRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl FixedRule {
    /// Tanh–sinh rule on `[0, 1]` with step `h`, truncated where the weights
    /// drop below `1e-20` (bounded integrands only).
    pub fn tanh_sinh(h: f64) -> Self {
        use std::f64::consts::FRAC_PI_2;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut k = 0i64;
        loop {
            let t = k as f64 * h;
            let u = FRAC_PI_2 * t.sinh();
            // distance of the node from the nearer endpoint
            let d = 0.5 / (u.exp() * u.cosh());
            let w = 0.5 * h * FRAC_PI_2 * t.cosh() / (u.cosh() * u.cosh());
            if d < 1e-300 || w < 1e-20 {
                break;
            }
            if k == 0 {
                nodes.push(0.5);
                weights.push(w);
            } else {
                nodes.push(d);
                weights.push(w);
                nodes.push(1.0 - d);
                weights.push(w);
            }
            k += 1;
        }
        FixedRule { nodes, weights }
    }

    /// `∫_a^b f` with the rule mapped linearly.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let h = b - a;
        self.nodes.iter().zip(&self.weights).map(|(&s, &w)| w * f(a + h * s)).sum::<f64>() * h
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Ordinary least-squares slope and intercept of `y` on `x`.
pub fn least_squares(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}
