use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::algebra::{build_gamma, operator_expr, GammaEngine, Program, ScalarExpr, VectorField, DEFAULT_NODE_CAP};
use crate::error::{domain, Error, Result};
use crate::fbm::Hurst;
use crate::numeric::{gauss_legendre, mc_reduce, CompensatedSum};
use crate::rng::{stream, Purpose, StreamRng};

pub const DEFAULT_QUADRATURE_ORDER: usize = 64;
const MAX_BOX_DIMENSION: usize = 3;
const NORMALIZATION_TOL: f64 = 1e-6;

type SamplerFn = Arc<dyn Fn(&mut StreamRng) -> Vec<f64> + Send + Sync>;

/// A probability measure on `ℝⁿ` to integrate against.
#[derive(Clone)]
pub enum MeasureSpec {
    /// `density(x) dx` on `[lower, upper]`, tensor Gauss–Legendre of the
    /// given order per axis, `n ≤ 3`.
    DensityOnBox { density: ScalarExpr, lower: Vec<f64>, upper: Vec<f64>, order: usize },
    /// Seeded point generator; integrals by Monte Carlo.
    Sampler { sampler: SamplerFn, dimension: usize, samples: u64, seed: u64 },
    /// Uniform measure on a circle in the `(x1, x2)` plane, periodic
    /// trapezoid rule with `nodes` points.
    Circle { center: [f64; 2], radius: f64, nodes: usize },
    /// Dirac mass.
    Point(Vec<f64>),
}

impl fmt::Debug for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureSpec::DensityOnBox { density, lower, upper, order } => f
                .debug_struct("DensityOnBox")
                .field("density", &density.to_string_limited(80))
                .field("lower", lower)
                .field("upper", upper)
                .field("order", order)
                .finish(),
            MeasureSpec::Sampler { dimension, samples, seed, .. } => f
                .debug_struct("Sampler")
                .field("dimension", dimension)
                .field("samples", samples)
                .field("seed", seed)
                .finish(),
            MeasureSpec::Circle { center, radius, nodes } => f
                .debug_struct("Circle")
                .field("center", center)
                .field("radius", radius)
                .field("nodes", nodes)
                .finish(),
            MeasureSpec::Point(x) => f.debug_tuple("Point").field(x).finish(),
        }
    }
}

impl MeasureSpec {
    pub fn dimension(&self) -> usize {
        match self {
            MeasureSpec::DensityOnBox { lower, .. } => lower.len(),
            MeasureSpec::Sampler { dimension, .. } => *dimension,
            MeasureSpec::Circle { .. } => 2,
            MeasureSpec::Point(x) => x.len(),
        }
    }

    /// Normalised Lebesgue measure on a box.
    pub fn uniform_box(lower: Vec<f64>, upper: Vec<f64>, order: usize) -> Result<Self> {
        let vol: f64 = lower.iter().zip(&upper).map(|(a, b)| b - a).product();
        if !(vol > 0.0) {
            return Err(domain("box must have positive volume"));
        }
        Ok(MeasureSpec::DensityOnBox { density: ScalarExpr::constant(1.0 / vol), lower, upper, order })
    }

    fn validate(&self) -> Result<()> {
        match self {
            MeasureSpec::DensityOnBox { density, lower, upper, order } => {
                let n = lower.len();
                if n == 0 || n != upper.len() {
                    return Err(domain("box bounds must be non-empty and of equal length"));
                }
                if n > MAX_BOX_DIMENSION {
                    return Err(Error::Resource(format!("tensor quadrature limited to n ≤ {MAX_BOX_DIMENSION}")));
                }
                if lower.iter().zip(upper).any(|(a, b)| !(b > a)) {
                    return Err(domain("box must satisfy lower < upper on every axis"));
                }
                if *order < 2 {
                    return Err(domain("quadrature order must be at least 2"));
                }
                if density.max_variable() > n {
                    return Err(domain(format!("density uses x{} on a {n}-dimensional box", density.max_variable())));
                }
                Ok(())
            }
            MeasureSpec::Sampler { dimension, samples, .. } => {
                if *dimension == 0 || *samples < 2 {
                    return Err(domain("sampler needs a positive dimension and at least 2 samples"));
                }
                Ok(())
            }
            MeasureSpec::Circle { radius, nodes, .. } => {
                if !(*radius > 0.0) || *nodes < 4 {
                    return Err(domain("circle needs a positive radius and at least 4 nodes"));
                }
                Ok(())
            }
            MeasureSpec::Point(x) => {
                if x.is_empty() {
                    return Err(domain("point mass needs a location"));
                }
                Ok(())
            }
        }
    }
}

/// One integral `∫ g dμ` with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub value: f64,
    pub error: f64,
}

/// `residuals[k − 1][j] = ∫ (Γ_k f_j) dμ` for `k = 1..=k_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub hurst: f64,
    pub functions: Vec<String>,
    pub residuals: Vec<Vec<ResidualEntry>>,
    /// Total mass of the density by quadrature (1 for other kinds).
    pub mass: f64,
}

impl InvariantReport {
    /// `max_j |∫ Γ_k f_j dμ|`.
    pub fn max_abs(&self, k: usize) -> f64 {
        self.residuals[k - 1].iter().map(|e| e.value.abs()).fold(0.0, f64::max)
    }

    /// Header `k,function,value,error`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,function,value,error\n");
        for (k, row) in self.residuals.iter().enumerate() {
            for (f, e) in self.functions.iter().zip(row) {
                out.push_str(&format!("{},\"{}\",{:.16e},{:.16e}\n", k + 1, f, e.value, e.error));
            }
        }
        out
    }
}

/// Tensor Gauss–Legendre nodes and weights (weights include the density).
fn box_rule(density: &ScalarExpr, lower: &[f64], upper: &[f64], order: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let (x1, w1) = gauss_legendre(order);
    let n = lower.len();
    let dp = Program::compile(std::slice::from_ref(density));
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    let total = order.pow(n as u32);
    let mut idx = vec![0usize; n];
    let mut scratch = Vec::new();
    let mut dv = [0.0];
    for _ in 0..total {
        let mut p = vec![0.0; n];
        let mut w = 1.0;
        for a in 0..n {
            let half = 0.5 * (upper[a] - lower[a]);
            p[a] = lower[a] + half * (x1[idx[a]] + 1.0);
            w *= half * w1[idx[a]];
        }
        dp.run(&p, &mut scratch, &mut dv)?;
        if dv[0] < 0.0 {
            return Err(domain(format!("density is negative ({:e}) at {p:?}", dv[0])));
        }
        pts.push(p);
        wts.push(w * dv[0]);
        for a in 0..n {
            idx[a] += 1;
            if idx[a] < order {
                break;
            }
            idx[a] = 0;
        }
    }
    Ok((pts, wts))
}

fn circle_rule(center: [f64; 2], radius: f64, nodes: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let w = 1.0 / nodes as f64;
    (0..nodes)
        .map(|i| {
            let th = 2.0 * std::f64::consts::PI * i as f64 / nodes as f64;
            (vec![center[0] + radius * th.cos(), center[1] + radius * th.sin()], w)
        })
        .unzip()
}

fn weighted_sum(p: &Program, pts: &[Vec<f64>], wts: &[f64]) -> Result<f64> {
    let mut s = CompensatedSum::default();
    let mut scratch = Vec::new();
    let mut v = [0.0];
    for (x, w) in pts.iter().zip(wts) {
        if *w == 0.0 {
            continue;
        }
        p.run(x, &mut scratch, &mut v)?;
        s.add(w * v[0]);
    }
    Ok(s.value())
}

/// `∫ (Γ_k^H f_j) dμ` for every test function and `k = 1..=k_max`.
/// Deterministic measures report the difference to a half-resolution rule
/// as the error; samplers report the Monte Carlo standard error.
pub fn invariant_residual(
    fields: &[VectorField],
    hurst: Hurst,
    mu: &MeasureSpec,
    test_fns: &[ScalarExpr],
    k_max: usize,
    engine: GammaEngine,
) -> Result<InvariantReport> {
    mu.validate()?;
    let n = fields.first().map(VectorField::dimension).ok_or_else(|| domain("no vector fields"))?;
    if mu.dimension() != n {
        return Err(domain(format!("measure lives in dimension {}, fields in {n}", mu.dimension())));
    }
    if k_max == 0 {
        return Err(domain("k_max must be at least 1"));
    }
    // deterministic rules at full and half resolution
    let rules = match mu {
        MeasureSpec::DensityOnBox { density, lower, upper, order } => {
            let full = box_rule(density, lower, upper, *order)?;
            let half = box_rule(density, lower, upper, (*order / 2).max(2))?;
            Some((full, half))
        }
        MeasureSpec::Circle { center, radius, nodes } => {
            Some((circle_rule(*center, *radius, *nodes), circle_rule(*center, *radius, (*nodes / 2).max(2))))
        }
        MeasureSpec::Point(x) => Some(((vec![x.clone()], vec![1.0]), (vec![x.clone()], vec![1.0]))),
        MeasureSpec::Sampler { .. } => None,
    };
    let mass = match &rules {
        Some(((_, w), _)) => w.iter().sum::<f64>(),
        None => 1.0,
    };
    if (mass - 1.0).abs() > NORMALIZATION_TOL {
        return Err(domain(format!("measure has mass {mass}, not 1 within {NORMALIZATION_TOL:e}")));
    }
    let mut residuals = Vec::new();
    for k in 1..=k_max {
        let op = build_gamma(k, hurst, fields, engine)?;
        let exprs =
            test_fns.iter().map(|f| operator_expr(&op, f, DEFAULT_NODE_CAP)).collect::<Result<Vec<_>>>()?;
        let row = match (&rules, mu) {
            (Some(((p1, w1), (p2, w2))), _) => exprs
                .iter()
                .map(|g| {
                    let prog = Program::compile(std::slice::from_ref(g));
                    let a = weighted_sum(&prog, p1, w1)?;
                    let b = weighted_sum(&prog, p2, w2)?;
                    Ok(ResidualEntry { value: a, error: (a - b).abs() })
                })
                .collect::<Result<Vec<_>>>()?,
            (None, MeasureSpec::Sampler { sampler, samples, seed, .. }) => {
                let prog = Program::compile(&exprs);
                let (stats, _) = mc_reduce(*samples, exprs.len(), |r, out| {
                    let x = sampler(&mut stream(*seed, Purpose::MeasureSampler, r));
                    out.resize(exprs.len(), 0.0);
                    prog.run(&x, &mut Vec::new(), out)?;
                    Ok(true)
                })?;
                stats.iter().map(|s| ResidualEntry { value: s.mean, error: s.std_error() }).collect()
            }
            _ => unreachable!("rules exist for every deterministic kind"),
        };
        residuals.push(row);
    }
    Ok(InvariantReport {
        hurst: hurst.value(),
        functions: test_fns.iter().map(|f| f.to_string_limited(120)).collect(),
        residuals,
        mass,
    })
}

/// Monomials `x^α`, `|α| ≤ max_degree`, windowed by `exp(−|x|²/2)`.
pub fn hermite_dictionary(n: usize, max_degree: usize) -> Vec<ScalarExpr> {
    let r2 = (1..=n).fold(ScalarExpr::zero(), |acc, i| acc.add(&ScalarExpr::var(i).powi(2)));
    let window = r2.scale(-0.5).exp();
    let mut out = Vec::new();
    let mut alpha = vec![0usize; n];
    loop {
        if alpha.iter().sum::<usize>() <= max_degree {
            let mono = alpha
                .iter()
                .enumerate()
                .fold(ScalarExpr::one(), |acc, (i, &a)| acc.mul(&ScalarExpr::var(i + 1).powi(a as i64)));
            out.push(mono.mul(&window));
        }
        let mut i = 0;
        loop {
            if i == n {
                return out;
            }
            alpha[i] += 1;
            if alpha[i] <= max_degree {
                break;
            }
            alpha[i] = 0;
            i += 1;
        }
    }
}
