//! Fractional Brownian motion on dyadic grids of `[0, 1]`.
//!
//! Paths are generated with the exact covariance
//! `R(s, t) = ½ (s^{2H} + t^{2H} − |t − s|^{2H})`, either through a
//! Cholesky factor of the increment covariance (reference route) or by
//! circulant embedding of fractional Gaussian noise (fast route).

use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::{stream, Purpose};

/// Largest supported mesh level; `2^22 + 1` nodes per coordinate.
pub const MAX_MESH_LEVEL: u32 = 22;
/// Largest mesh level for which a dense Cholesky factor is built.
pub const MAX_CHOLESKY_LEVEL: u32 = 12;

/// Hurst index, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Hurst(f64);

impl Hurst {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 && value < 1.0 {
            Ok(Hurst(value))
        } else {
            Err(domain(format!(
                "Hurst parameter must lie in the open interval (0, 1), got {value}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `H > 1/2`: Young integration applies.
    pub fn is_young(self) -> bool {
        self.0 > 0.5
    }

    /// `1/3 < H ≤ 1/2`: level-2 rough path regime.
    pub fn is_rough(self) -> bool {
        self.0 > 1.0 / 3.0 && self.0 <= 0.5
    }

    /// `H > 1/4`: the closed-form second-order coefficients are valid.
    pub fn has_analytic_gamma2(self) -> bool {
        self.0 > 0.25
    }
}

impl TryFrom<f64> for Hurst {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Hurst::new(v)
    }
}

impl From<Hurst> for f64 {
    fn from(h: Hurst) -> f64 {
        h.0
    }
}

/// The fBm covariance function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceKernel {
    pub hurst: Hurst,
}

impl CovarianceKernel {
    pub fn new(hurst: Hurst) -> Self {
        CovarianceKernel { hurst }
    }

    /// `R(s, t)`; both times must be nonnegative.
    pub fn covariance(&self, s: f64, t: f64) -> Result<f64> {
        if !(s >= 0.0 && t >= 0.0) {
            return Err(domain(format!("negative time in covariance: s={s}, t={t}")));
        }
        Ok(self.cov(s, t))
    }

    pub(crate) fn cov(&self, s: f64, t: f64) -> f64 {
        let h2 = 2.0 * self.hurst.0;
        0.5 * (s.powf(h2) + t.powf(h2) - (t - s).abs().powf(h2))
    }

    /// `E[(B_b − B_a)(B_e − B_c)]` for `a ≤ b`, `c ≤ e` in `[0, 1]`.
    pub fn increment_covariance(&self, a: f64, b: f64, c: f64, e: f64) -> Result<f64> {
        let inside = |x: f64| (0.0..=1.0).contains(&x);
        if !(a <= b && c <= e) {
            return Err(domain(format!("unordered interval: [{a}, {b}] or [{c}, {e}]")));
        }
        if ![a, b, c, e].into_iter().all(inside) {
            return Err(domain("increment endpoints must lie in [0, 1]"));
        }
        Ok(self.inc_cov(a, b, c, e))
    }

    /// Stationary-increment form `½(|e−a|^{2H} + |c−b|^{2H} − |e−b|^{2H} − |c−a|^{2H})`,
    /// free of the `t^{2H}` terms that cancel in the four-term difference.
    pub(crate) fn inc_cov(&self, a: f64, b: f64, c: f64, e: f64) -> f64 {
        let h2 = 2.0 * self.hurst.0;
        let p = |x: f64| x.abs().powf(h2);
        0.5 * (p(e - a) + p(c - b) - p(e - b) - p(c - a))
    }
}

/// Autocovariance of unit-step fractional Gaussian noise at lag `k`.
///
/// For large lags the second difference is evaluated through the binomial
/// series of `(1 ± 1/k)^{2H}` to avoid cancellation.
pub fn fgn_autocovariance(hurst: Hurst, k: usize) -> f64 {
    let h2 = 2.0 * hurst.0;
    if k < 32 {
        let k = k as f64;
        return 0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2));
    }
    let x2 = (k as f64).powi(-2);
    // Σ_{j≥1} C(2H, 2j) x^{2j}
    let mut binom = 1.0;
    let mut power = 1.0;
    let mut sum = 0.0;
    for j in 1..=10 {
        let (a, b) = ((2 * j - 2) as f64, (2 * j - 1) as f64);
        binom *= (h2 - a) * (h2 - b) / ((a + 1.0) * (b + 1.0));
        power *= x2;
        sum += binom * power;
    }
    (k as f64).powf(h2) * sum
}

/// Sampled fBm values at `t_i = i 2^{-m}`, row `i` holding all coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmGrid {
    pub hurst: Hurst,
    pub mesh_level: u32,
    pub dimension: usize,
    /// row-major, `(2^m + 1) × dimension`
    values: Vec<f64>,
}

impl FbmGrid {
    /// Builds a grid from explicit node values; row 0 must be zero.
    pub fn from_samples(hurst: Hurst, mesh_level: u32, samples: Vec<Vec<f64>>) -> Result<Self> {
        let n = (1usize << mesh_level) + 1;
        if samples.len() != n {
            return Err(domain(format!("expected {n} rows, got {}", samples.len())));
        }
        let dimension = samples[0].len();
        if dimension == 0 || samples.iter().any(|r| r.len() != dimension) {
            return Err(domain("ragged or empty sample rows"));
        }
        if samples[0].iter().any(|&x| x != 0.0) {
            return Err(domain("first sample must be the zero vector"));
        }
        let values = samples.concat();
        Ok(FbmGrid { hurst, mesh_level, dimension, values })
    }

    /// Values at node `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dimension..(i + 1) * self.dimension]
    }

    /// Node rows in time order.
    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.dimension)
    }

    /// All node values, row-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cells(&self) -> usize {
        1 << self.mesh_level
    }

    pub fn node_time(&self, i: usize) -> f64 {
        i as f64 / self.cells() as f64
    }

    /// Increment `B_{t_{i+1}} − B_{t_i}` of every coordinate.
    pub fn increment(&self, i: usize) -> Vec<f64> {
        self.row(i + 1)
            .iter()
            .zip(self.row(i))
            .map(|(b, a)| b - a)
            .collect()
    }

    /// The same draw observed on the coarser mesh `level ≤ mesh_level`.
    pub fn coarsen(&self, level: u32) -> Result<FbmGrid> {
        if level > self.mesh_level {
            return Err(domain(format!("cannot coarsen level {} to finer level {level}", self.mesh_level)));
        }
        let stride = 1usize << (self.mesh_level - level);
        let values = self.rows().step_by(stride).flatten().copied().collect();
        Ok(FbmGrid { hurst: self.hurst, mesh_level: level, dimension: self.dimension, values })
    }

    /// Piecewise-linear interpolant `B^m_t`.
    pub fn interpolate(&self, t: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&t) {
            return Err(domain(format!("time {t} outside [0, 1]")));
        }
        let n = self.cells();
        let scaled = t * n as f64;
        let i = (scaled.floor() as usize).min(n - 1);
        let frac = scaled - i as f64;
        if frac == 0.0 {
            return Ok(self.row(i).to_vec());
        }
        Ok(self.row(i)
            .iter()
            .zip(self.row(i + 1))
            .map(|(a, b)| a + frac * (b - a))
            .collect())
    }

    /// Path dump: header `t,b1,...,bd`, one row per node, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for j in 1..=self.dimension {
            let _ = write!(out, ",b{j}");
        }
        out.push('\n');
        for (i, row) in self.rows().enumerate() {
            let _ = write!(out, "{:.16e}", self.node_time(i));
            for x in row {
                let _ = write!(out, ",{x:.16e}");
            }
            out.push('\n');
        }
        out
    }
}

/// Generation route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMethod {
    Cholesky,
    Circulant,
    /// Cholesky below [`AUTO_CIRCULANT_LEVEL`], circulant from there on.
    Auto,
}

/// Mesh level from which [`SamplerMethod::Auto`] switches to circulant embedding.
pub const AUTO_CIRCULANT_LEVEL: u32 = 8;

enum Factor {
    /// Packed lower-triangular Cholesky factor of the increment covariance.
    Cholesky(Vec<f64>),
    /// `sqrt(λ_k / N)` for the length-`N = 2n` circulant embedding.
    Circulant { scale: Vec<f64>, fft: Arc<dyn Fft<f64>> },
}

/// Precomputed generator for repeated draws at a fixed `(H, m, d)`.
pub struct FbmSampler {
    hurst: Hurst,
    mesh_level: u32,
    dimension: usize,
    factor: Factor,
}

impl std::fmt::Debug for FbmSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FbmSampler")
            .field("hurst", &self.hurst)
            .field("mesh_level", &self.mesh_level)
            .field("dimension", &self.dimension)
            .field("method", &self.method())
            .finish()
    }
}

impl FbmSampler {
    pub fn new(hurst: Hurst, mesh_level: u32, dimension: usize, method: SamplerMethod) -> Result<Self> {
        if mesh_level > MAX_MESH_LEVEL {
            return Err(Error::Resource(format!(
                "mesh level {mesh_level} exceeds the limit {MAX_MESH_LEVEL}"
            )));
        }
        if dimension == 0 {
            return Err(domain("dimension must be at least 1"));
        }
        let method = match method {
            SamplerMethod::Auto if mesh_level >= AUTO_CIRCULANT_LEVEL => SamplerMethod::Circulant,
            SamplerMethod::Auto => SamplerMethod::Cholesky,
            m => m,
        };
        let factor = match method {
            SamplerMethod::Cholesky => {
                if mesh_level > MAX_CHOLESKY_LEVEL {
                    return Err(Error::Resource(format!(
                        "dense Cholesky limited to mesh level {MAX_CHOLESKY_LEVEL}; use circulant"
                    )));
                }
                Factor::Cholesky(cholesky_factor(hurst, mesh_level)?)
            }
            _ => circulant_factor(hurst, mesh_level)?,
        };
        Ok(FbmSampler { hurst, mesh_level, dimension, factor })
    }

    pub fn method(&self) -> SamplerMethod {
        match self.factor {
            Factor::Cholesky(_) => SamplerMethod::Cholesky,
            Factor::Circulant { .. } => SamplerMethod::Circulant,
        }
    }

    pub fn hurst(&self) -> Hurst {
        self.hurst
    }

    pub fn mesh_level(&self) -> u32 {
        self.mesh_level
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Draws one path, consuming normals from `rng` coordinate by coordinate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> FbmGrid {
        let n = 1usize << self.mesh_level;
        let step = (n as f64).powf(-self.hurst.0);
        let d = self.dimension;
        let mut values = vec![0.0; (n + 1) * d];
        let mut put = |j: usize, inc: &mut dyn Iterator<Item = f64>| {
            let mut acc = 0.0;
            for (i, x) in inc.enumerate() {
                acc += x * step;
                values[(i + 1) * d + j] = acc;
            }
        };
        match &self.factor {
            Factor::Cholesky(l) => {
                let mut z = vec![0.0; n];
                for j in 0..d {
                    z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                    let mut inc = (0..n).map(|i| {
                        let row = &l[i * (i + 1) / 2..i * (i + 1) / 2 + i + 1];
                        row.iter().zip(&z).map(|(a, b)| a * b).sum()
                    });
                    put(j, &mut inc);
                }
            }
            Factor::Circulant { scale, fft } => {
                let mut buf = vec![Complex64::new(0.0, 0.0); 2 * n];
                let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
                for j in (0..d).step_by(2) {
                    for (w, s) in buf.iter_mut().zip(scale) {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        *w = Complex64::new(s * re, s * im);
                    }
                    fft.process_with_scratch(&mut buf, &mut scratch);
                    put(j, &mut buf[..n].iter().map(|c| c.re));
                    if j + 1 < d {
                        put(j + 1, &mut buf[..n].iter().map(|c| c.im));
                    }
                }
            }
        }
        FbmGrid { hurst: self.hurst, mesh_level: self.mesh_level, dimension: d, values }
    }
}

fn cholesky_factor(hurst: Hurst, mesh_level: u32) -> Result<Vec<f64>> {
    let n = 1usize << mesh_level;
    let gamma: Vec<f64> = (0..n).map(|k| fgn_autocovariance(hurst, k)).collect();
    let mut l = vec![0.0; n * (n + 1) / 2];
    let idx = |i: usize, j: usize| i * (i + 1) / 2 + j;
    for i in 0..n {
        for j in 0..=i {
            let mut s = gamma[i - j];
            for k in 0..j {
                s -= l[idx(i, k)] * l[idx(j, k)];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::Numerical(format!(
                        "fGn covariance not positive definite at row {i} (H={}, m={mesh_level})",
                        hurst.0
                    )));
                }
                l[idx(i, i)] = s.sqrt();
            } else {
                l[idx(i, j)] = s / l[idx(j, j)];
            }
        }
    }
    Ok(l)
}

fn circulant_factor(hurst: Hurst, mesh_level: u32) -> Result<Factor> {
    let n = 1usize << mesh_level;
    let big = 2 * n;
    let mut c: Vec<Complex64> = (0..big)
        .map(|k| {
            let lag = if k <= n { k } else { big - k };
            Complex64::new(fgn_autocovariance(hurst, lag), 0.0)
        })
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(big);
    fft.process(&mut c);
    let peak = c.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    let mut scale = Vec::with_capacity(big);
    for (k, z) in c.iter().enumerate() {
        if z.re < -1e-10 * peak {
            return Err(Error::Numerical(format!(
                "circulant embedding has negative eigenvalue {} at index {k} (H={}, m={mesh_level})",
                z.re, hurst.0
            )));
        }
        scale.push((z.re.max(0.0) / big as f64).sqrt());
    }
    Ok(Factor::Circulant { scale, fft })
}

/// One path with the automatic method, stream `0` of `seed`.
pub fn sample_fbm(hurst: Hurst, mesh_level: u32, dimension: usize, seed: u64) -> Result<FbmGrid> {
    let sampler = FbmSampler::new(hurst, mesh_level, dimension, SamplerMethod::Auto)?;
    Ok(sampler.sample(&mut stream(seed, Purpose::FbmPath, 0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: f64) -> Hurst {
        Hurst::new(v).unwrap()
    }

    #[test]
    fn hurst_rejects_endpoints_and_flags_regimes() {
        assert!(Hurst::new(0.0).is_err());
        assert!(Hurst::new(1.0).is_err());
        assert!(Hurst::new(f64::NAN).is_err());
        assert!(h(0.75).is_young() && !h(0.75).is_rough());
        assert!(h(0.4).is_rough() && !h(0.4).is_young());
        assert!(h(0.5).is_rough());
        assert!(!h(0.3).is_rough() && h(0.3).has_analytic_gamma2());
        assert!(!h(0.25).has_analytic_gamma2());
    }

    #[test]
    fn covariance_examples() {
        for v in [0.1, 0.3, 0.5, 0.9] {
            let k = CovarianceKernel::new(h(v));
            assert!((k.covariance(1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
            assert!((k.covariance(0.3, 0.7).unwrap() - k.covariance(0.7, 0.3).unwrap()).abs() < 1e-15);
            assert!((k.covariance(0.4, 0.4).unwrap() - 0.4f64.powf(2.0 * v)).abs() < 1e-15);
        }
        let bm = CovarianceKernel::new(h(0.5));
        assert!((bm.covariance(0.3, 0.7).unwrap() - 0.3).abs() < 1e-15);
        let k = CovarianceKernel::new(h(0.75));
        let expect = 0.5 * (0.25f64.powf(1.5) + 1.0 - 0.75f64.powf(1.5));
        assert!((k.covariance(0.25, 1.0).unwrap() - expect).abs() < 1e-15);
        assert!(k.covariance(-0.1, 0.5).is_err());
    }

    #[test]
    fn increment_covariance_examples() {
        let bm = CovarianceKernel::new(h(0.5));
        assert!(bm.increment_covariance(0.0, 0.25, 0.5, 0.75).unwrap().abs() < 1e-15);
        for v in [0.2, 0.5, 0.8] {
            let k = CovarianceKernel::new(h(v));
            let var = k.increment_covariance(0.2, 0.7, 0.2, 0.7).unwrap();
            assert!((var - 0.5f64.powf(2.0 * v)).abs() < 1e-14);
            for m in 1..12 {
                let d = 1.0 / (1u64 << m) as f64;
                let adj = k.increment_covariance(0.5 - d, 0.5, 0.5, 0.5 + d).unwrap();
                assert!(adj.abs() <= d.powf(2.0 * v) + 1e-15);
            }
            // the four-term form agrees with R-differences
            let (a, b, c, e) = (0.1, 0.35, 0.3, 0.9);
            let direct = k.cov(b, e) - k.cov(b, c) - k.cov(a, e) + k.cov(a, c);
            assert!((k.inc_cov(a, b, c, e) - direct).abs() < 1e-14);
        }
        assert!(bm.increment_covariance(0.5, 0.2, 0.0, 1.0).is_err());
        assert!(bm.increment_covariance(0.0, 1.2, 0.0, 1.0).is_err());
    }

    #[test]
    fn interpolation_is_exact_at_nodes_and_affine_between() {
        let g = sample_fbm(h(0.3), 5, 2, 11).unwrap();
        assert_eq!(g.interpolate(0.0).unwrap(), vec![0.0, 0.0]);
        for i in 0..=32 {
            assert_eq!(g.interpolate(i as f64 / 32.0).unwrap(), g.row(i));
        }
        let mid = g.interpolate(4.5 / 32.0).unwrap();
        for j in 0..2 {
            let avg = 0.5 * (g.row(4)[j] + g.row(5)[j]);
            assert!((mid[j] - avg).abs() < 1e-15);
        }
        let q = g.interpolate(4.25 / 32.0).unwrap();
        let r = g.interpolate(4.75 / 32.0).unwrap();
        assert!((0.5 * (q[0] + r[0]) - mid[0]).abs() < 1e-15);
        assert!(g.interpolate(1.5).is_err());
    }

    #[test]
    fn fgn_autocovariance_series_branch_is_continuous() {
        for v in [0.3, 0.5, 0.75] {
            let hh = h(v);
            let direct = |k: f64| 0.5 * ((k + 1.0).powf(2.0 * v) - 2.0 * k.powf(2.0 * v) + (k - 1.0).powf(2.0 * v));
            let rel = (fgn_autocovariance(hh, 32) - direct(32.0)).abs() / direct(32.0).abs().max(1e-300);
            assert!(v == 0.5 || rel < 1e-9, "H={v} rel={rel}");
            assert!(fgn_autocovariance(hh, 0) == 1.0);
        }
        assert!(fgn_autocovariance(h(0.5), 100).abs() < 1e-20);
    }

    #[test]
    fn sampling_is_deterministic() {
        for m in [4, 9] {
            let a = sample_fbm(h(0.7), m, 3, 42).unwrap();
            let b = sample_fbm(h(0.7), m, 3, 42).unwrap();
            let c = sample_fbm(h(0.7), m, 3, 43).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn auto_method_switches_to_circulant() {
        let s = FbmSampler::new(h(0.5), 4, 1, SamplerMethod::Auto).unwrap();
        assert_eq!(s.method(), SamplerMethod::Cholesky);
        let s = FbmSampler::new(h(0.5), 10, 1, SamplerMethod::Auto).unwrap();
        assert_eq!(s.method(), SamplerMethod::Circulant);
        assert!(matches!(
            FbmSampler::new(h(0.5), 23, 1, SamplerMethod::Auto),
            Err(Error::Resource(_))
        ));
        assert!(matches!(
            FbmSampler::new(h(0.5), 13, 1, SamplerMethod::Cholesky),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn csv_dump_layout() {
        let g = sample_fbm(h(0.6), 2, 2, 1).unwrap();
        let csv = g.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,b1,b2");
        assert_eq!(lines.len(), 6);
        let fields: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(fields.len(), 3);
        assert_eq!(fields[0].parse::<f64>().unwrap(), 0.25);
        assert_eq!(fields[1].parse::<f64>().unwrap(), g.row(1)[0]);
    }
}
