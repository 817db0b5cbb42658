//! Truncated tensor algebra `T^(n)(R^d)` and exact signatures of
//! piecewise-linear paths.
//!
//! A linear segment with increment `Δ` has signature `exp(Δ) = (1, Δ, Δ⊗Δ/2!, …)`;
//! signatures of piecewise-linear paths are Chen products of those, so no
//! numerical integration is involved.

use crate::error::{domain, Error, Result};
use crate::fbm::FbmGrid;
use crate::word::Word;

/// Highest signature level materialised densely.
pub const MAX_SIGNATURE_DEGREE: usize = 8;

/// Element of the truncated tensor algebra. Level `k` is stored as a dense
/// row-major array of `d^k` entries indexed by 0-based words.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorElement {
    dimension: usize,
    levels: Vec<Vec<f64>>,
}

impl TensorElement {
    /// The unit `(1, 0, …, 0)`.
    pub fn identity(dimension: usize, degree: usize) -> Self {
        let levels = (0..=degree)
            .map(|k| {
                let mut v = vec![0.0; dimension.pow(k as u32)];
                if k == 0 {
                    v[0] = 1.0;
                }
                v
            })
            .collect();
        TensorElement { dimension, levels }
    }

    /// Builds an element from explicit levels; level `k` must have `d^k` entries.
    pub fn from_levels(dimension: usize, levels: Vec<Vec<f64>>) -> Result<Self> {
        for (k, lvl) in levels.iter().enumerate() {
            if lvl.len() != dimension.pow(k as u32) {
                return Err(domain(format!(
                    "level {k} has {} entries, expected {}",
                    lvl.len(),
                    dimension.pow(k as u32)
                )));
            }
        }
        if levels.is_empty() {
            return Err(domain("tensor element needs at least level 0"));
        }
        Ok(TensorElement { dimension, levels })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn degree(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, k: usize) -> &[f64] {
        &self.levels[k]
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    fn index(&self, word: &Word) -> Result<usize> {
        word.check_alphabet(self.dimension)?;
        Ok(word
            .letters()
            .iter()
            .fold(0, |acc, &l| acc * self.dimension + (l - 1)))
    }

    /// Coefficient of the (1-based) word.
    pub fn coefficient(&self, word: &Word) -> Result<f64> {
        if word.len() > self.degree() {
            return Err(domain(format!(
                "word of length {} beyond degree {}",
                word.len(),
                self.degree()
            )));
        }
        Ok(self.levels[word.len()][self.index(word)?])
    }

    /// `|ξ| = Σ_k |ξ^k|` with Euclidean norms on each level.
    pub fn norm(&self) -> f64 {
        self.levels.iter().map(|l| level_norm(l)).sum()
    }

    /// Truncated product `(ξ⊗η)^k = Σ_j ξ^j ⊗ η^{k−j}`.
    pub fn tensor_mul(&self, other: &TensorElement) -> Result<TensorElement> {
        if self.dimension != other.dimension || self.degree() != other.degree() {
            return Err(domain(format!(
                "shape mismatch: (d={}, n={}) vs (d={}, n={})",
                self.dimension,
                self.degree(),
                other.dimension,
                other.degree()
            )));
        }
        let mut out = TensorElement::identity(self.dimension, self.degree());
        out.levels[0][0] = 0.0;
        for k in 0..=self.degree() {
            let target = &mut out.levels[k];
            for j in 0..=k {
                let a = &self.levels[j];
                let b = &other.levels[k - j];
                for (ia, &x) in a.iter().enumerate() {
                    if x == 0.0 {
                        continue;
                    }
                    let base = ia * b.len();
                    for (ib, &y) in b.iter().enumerate() {
                        target[base + ib] += x * y;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Largest entrywise difference across all levels.
    pub fn max_abs_diff(&self, other: &TensorElement) -> f64 {
        self.levels
            .iter()
            .zip(&other.levels)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

fn level_norm(level: &[f64]) -> f64 {
    level.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Signature `exp(Δ)` of a straight segment from `from` to `to`.
pub fn segment_signature(from: &[f64], to: &[f64], degree: usize) -> TensorElement {
    let delta: Vec<f64> = to.iter().zip(from).map(|(b, a)| b - a).collect();
    segment_exp(&delta, degree)
}

fn segment_exp(delta: &[f64], degree: usize) -> TensorElement {
    let d = delta.len();
    let mut levels = Vec::with_capacity(degree + 1);
    levels.push(vec![1.0]);
    for k in 1..=degree {
        let prev: &Vec<f64> = &levels[k - 1];
        let mut next = Vec::with_capacity(prev.len() * d);
        for &p in prev {
            next.extend(delta.iter().map(|&x| p * x / k as f64));
        }
        levels.push(next);
    }
    TensorElement { dimension: d, levels }
}

/// Continuous piecewise-linear path on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePath {
    knots: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl PiecewisePath {
    /// Knots must increase strictly from 0 to 1; one value row per knot.
    pub fn new(knots: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != values.len() {
            return Err(domain("need at least two knots and one value row per knot"));
        }
        if knots[0] != 0.0 || *knots.last().unwrap() != 1.0 {
            return Err(domain("knots must start at 0 and end at 1"));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(domain("knots must be strictly increasing"));
        }
        let d = values[0].len();
        if d == 0 || values.iter().any(|v| v.len() != d) {
            return Err(domain("value rows must share a positive dimension"));
        }
        Ok(PiecewisePath { knots, values })
    }

    /// Path through `values` at equally spaced knots.
    pub fn uniform(values: Vec<Vec<f64>>) -> Result<Self> {
        let n = values.len().saturating_sub(1).max(1);
        let knots = (0..values.len()).map(|i| i as f64 / n as f64).collect();
        PiecewisePath::new(knots, values)
    }

    /// The interpolant `B^m` of a sampled grid.
    pub fn from_grid(grid: &FbmGrid) -> Self {
        let n = grid.cells();
        PiecewisePath {
            knots: (0..=n).map(|i| i as f64 / n as f64).collect(),
            values: grid.rows().map(<[f64]>::to_vec).collect(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.values[0].len()
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Value at time `t ∈ [0, 1]`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&t) {
            return Err(domain(format!("time {t} outside [0, 1]")));
        }
        let i = self.knots.partition_point(|&k| k <= t).clamp(1, self.knots.len() - 1) - 1;
        let (t0, t1) = (self.knots[i], self.knots[i + 1]);
        let w = (t - t0) / (t1 - t0);
        Ok(self.values[i]
            .iter()
            .zip(&self.values[i + 1])
            .map(|(a, b)| a + w * (b - a))
            .collect())
    }

    /// `λ · x`.
    pub fn scaled(&self, lambda: f64) -> Self {
        PiecewisePath {
            knots: self.knots.clone(),
            values: self
                .values
                .iter()
                .map(|r| r.iter().map(|x| lambda * x).collect())
                .collect(),
        }
    }

    /// Runs `self` on `[0, ½]` then `other` (translated to start where `self`
    /// ends) on `[½, 1]`.
    pub fn concat(&self, other: &PiecewisePath) -> Result<Self> {
        if self.dimension() != other.dimension() {
            return Err(domain("dimension mismatch in concatenation"));
        }
        let end = self.values.last().unwrap().clone();
        let start = &other.values[0];
        let mut knots: Vec<f64> = self.knots.iter().map(|t| 0.5 * t).collect();
        let mut values = self.values.clone();
        for (t, v) in other.knots.iter().zip(&other.values).skip(1) {
            knots.push(0.5 + 0.5 * t);
            values.push(v.iter().zip(start).zip(&end).map(|((x, s), e)| x - s + e).collect());
        }
        PiecewisePath::new(knots, values)
    }

    /// Increments of the segments, restricted to `[s, t]`.
    fn increments_between(&self, s: f64, t: f64) -> Result<Vec<Vec<f64>>> {
        if !(0.0 <= s && s <= t && t <= 1.0) {
            return Err(domain(format!("bad sub-interval [{s}, {t}]")));
        }
        let mut pts = vec![self.eval(s)?];
        pts.extend(
            self.knots
                .iter()
                .zip(&self.values)
                .filter(|(k, _)| **k > s && **k < t)
                .map(|(_, v)| v.clone()),
        );
        pts.push(self.eval(t)?);
        Ok(pts
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect())
            .collect())
    }

    /// Signature over the sub-interval `[s, t]`.
    pub fn signature_between(&self, s: f64, t: f64, degree: usize) -> Result<TensorElement> {
        check_degree(degree)?;
        let mut sig = TensorElement::identity(self.dimension(), degree);
        for delta in self.increments_between(s, t)? {
            sig = sig.tensor_mul(&segment_exp(&delta, degree))?;
        }
        Ok(sig)
    }
}

fn check_degree(degree: usize) -> Result<()> {
    if degree > MAX_SIGNATURE_DEGREE {
        Err(Error::Resource(format!(
            "signature degree {degree} exceeds {MAX_SIGNATURE_DEGREE}"
        )))
    } else {
        Ok(())
    }
}

/// Exact signature over `[0, 1]` by Chen concatenation of segment signatures.
pub fn path_signature(path: &PiecewisePath, degree: usize) -> Result<TensorElement> {
    path.signature_between(0.0, 1.0, degree)
}

/// Iterated integral `∫_{0<t_1<⋯<t_k<1} dx^{i_1}⋯dx^{i_k}`.
///
/// Only the prefixes of the word are propagated through the Chen products,
/// so the cost is `O(segments · k²)` instead of the full `d^k` level.
pub fn iterated_integral(path: &PiecewisePath, word: &Word) -> Result<f64> {
    word.check_alphabet(path.dimension())?;
    let letters: Vec<usize> = word.letters().iter().map(|l| l - 1).collect();
    let mut prefix = vec![0.0; letters.len() + 1];
    prefix[0] = 1.0;
    let mut inc = vec![0.0; path.dimension()];
    for w in path.values.windows(2) {
        for (o, (b, a)) in inc.iter_mut().zip(w[1].iter().zip(&w[0])) {
            *o = b - a;
        }
        chen_step(&mut prefix, &letters, &inc);
    }
    Ok(prefix[letters.len()])
}

/// Chen update of the prefix integrals of one word by a linear segment.
/// `prefix[j]` holds the iterated integral of the first `j` letters.
#[inline]
pub(crate) fn chen_step(prefix: &mut [f64], letters: &[usize], inc: &[f64]) {
    for j in (1..prefix.len()).rev() {
        // Σ_{i<j} prefix[i] · Π_{l=i+1..j} Δ_{w_l} / (j−i)!
        let mut acc = 0.0;
        let mut tail = 1.0;
        for i in (0..j).rev() {
            tail *= inc[letters[i]] / (j - i) as f64;
            acc += prefix[i] * tail;
        }
        prefix[j] += acc;
    }
}

/// `max |(X_{0,s} ⊗ X_{s,1})^k − X_{0,1}^k|` over all levels and entries.
pub fn check_chen(path: &PiecewisePath, split: f64, degree: usize) -> Result<f64> {
    if !(split > 0.0 && split < 1.0) {
        return Err(domain(format!("split {split} must lie in (0, 1)")));
    }
    let left = path.signature_between(0.0, split, degree)?;
    let right = path.signature_between(split, 1.0, degree)?;
    let whole = path_signature(path, degree)?;
    Ok(left.tensor_mul(&right)?.max_abs_diff(&whole))
}

/// `( sup_D Σ_l |X^k_{t_{l−1}, t_l}|^{p/k} )^{k/p}` with the supremum taken over
/// subdivisions drawn from the knots.
pub fn p_variation_control(path: &PiecewisePath, p: f64, level: usize) -> Result<f64> {
    if p < 1.0 {
        return Err(domain(format!("p must be at least 1, got {p}")));
    }
    if level == 0 {
        return Err(domain("level must be at least 1"));
    }
    check_degree(level)?;
    let n = path.knots.len();
    let exponent = p / level as f64;
    // best[j]: supremum over subdivisions of [0, t_j]
    let mut best = vec![0.0f64; n];
    let mut from: Vec<TensorElement> = vec![TensorElement::identity(path.dimension(), level); n];
    for j in 1..n {
        let delta: Vec<f64> = path.values[j]
            .iter()
            .zip(&path.values[j - 1])
            .map(|(b, a)| b - a)
            .collect();
        let seg = segment_exp(&delta, level);
        let mut b = 0.0f64;
        for i in 0..j {
            from[i] = from[i].tensor_mul(&seg)?;
            let size = level_norm(from[i].level(level));
            b = b.max(best[i] + size.powf(exponent));
        }
        best[j] = b;
    }
    Ok(best[n - 1].powf(1.0 / exponent))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path2() -> PiecewisePath {
        PiecewisePath::new(
            vec![0.0, 0.3, 0.55, 1.0],
            vec![vec![0.0, 0.0], vec![0.4, -0.2], vec![0.1, 0.9], vec![-0.5, 1.3]],
        )
        .unwrap()
    }

    #[test]
    fn identity_is_neutral() {
        let b = segment_signature(&[0.0, 0.0], &[0.3, -1.1], 3);
        let e = TensorElement::identity(2, 3);
        assert_eq!(e.tensor_mul(&b).unwrap(), b);
        assert_eq!(b.tensor_mul(&e).unwrap(), b);
    }

    #[test]
    fn degree_one_product_has_outer_product_at_level_two() {
        let u = TensorElement::from_levels(2, vec![vec![1.0], vec![1.0, 2.0], vec![0.0; 4]]).unwrap();
        let v = TensorElement::from_levels(2, vec![vec![1.0], vec![3.0, -1.0], vec![0.0; 4]]).unwrap();
        let p = u.tensor_mul(&v).unwrap();
        assert_eq!(p.level(2), &[3.0, -1.0, 6.0, -2.0]);
        assert_eq!(p.level(1), &[4.0, 1.0]);
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let a = TensorElement::identity(2, 3);
        let b = TensorElement::identity(3, 3);
        let c = TensorElement::identity(2, 2);
        assert!(a.tensor_mul(&b).is_err());
        assert!(a.tensor_mul(&c).is_err());
        assert!(TensorElement::from_levels(2, vec![vec![1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn segment_signature_examples() {
        let z = segment_signature(&[1.0, 2.0], &[1.0, 2.0], 4);
        assert_eq!(z, TensorElement::identity(2, 4));
        let s = segment_signature(&[0.0], &[2.0], 3);
        let expect = [1.0, 2.0, 2.0, 4.0 / 3.0];
        for k in 0..=3 {
            assert!((s.level(k)[0] - expect[k]).abs() < 1e-15);
        }
        let s = segment_signature(&[0.0, 0.0], &[0.7, -0.4], 2);
        let l2 = s.level(2);
        assert!((l2[1] - 0.5 * 0.7 * -0.4).abs() < 1e-15);
        assert_eq!(l2[1], l2[2]);
    }

    #[test]
    fn two_unit_steps() {
        let p = PiecewisePath::new(
            vec![0.0, 0.5, 1.0],
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]],
        )
        .unwrap();
        let s = path_signature(&p, 2).unwrap();
        assert!((s.coefficient(&Word::from([1, 2])).unwrap() - 1.0).abs() < 1e-15);
        assert!(s.coefficient(&Word::from([2, 1])).unwrap().abs() < 1e-15);
        let one = PiecewisePath::new(vec![0.0, 1.0], vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(path_signature(&one, 3).unwrap(), segment_signature(&[0.0, 0.0], &[1.0, 1.0], 3));
    }

    #[test]
    fn word_integrals_match_signature_entries() {
        let p = path2();
        let sig = path_signature(&p, 4).unwrap();
        for w in Word::all(2, 3).into_iter().chain(Word::all(2, 4)) {
            let a = iterated_integral(&p, &w).unwrap();
            assert!((a - sig.coefficient(&w).unwrap()).abs() < 1e-14, "{w}");
        }
        assert!((iterated_integral(&p, &Word::from([1])).unwrap() + 0.5).abs() < 1e-15);
        let ii = iterated_integral(&p, &Word::from([2, 2])).unwrap();
        assert!((ii - 1.3 * 1.3 / 2.0).abs() < 1e-14);
        assert!(iterated_integral(&p, &Word::from([3])).is_err());
    }

    #[test]
    fn chen_defects() {
        let p = path2();
        assert!(check_chen(&p, 0.3, 4).unwrap() < 1e-12);
        assert!(check_chen(&p, 0.41, 5).unwrap() < 1e-12);
        let flat = PiecewisePath::new(vec![0.0, 1.0], vec![vec![0.5], vec![0.5]]).unwrap();
        assert_eq!(check_chen(&flat, 0.5, 3).unwrap(), 0.0);
        assert!(check_chen(&p, 1.0, 3).is_err());
        assert!(matches!(path_signature(&p, 9), Err(Error::Resource(_))));
    }

    #[test]
    fn concatenation_multiplies_signatures() {
        let p = path2();
        let q = PiecewisePath::uniform(vec![vec![1.0, 1.0], vec![0.0, 2.0], vec![0.5, -1.0]]).unwrap();
        let pq = p.concat(&q).unwrap();
        let lhs = path_signature(&pq, 4).unwrap();
        let rhs = path_signature(&p, 4).unwrap().tensor_mul(&path_signature(&q, 4).unwrap()).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-13);
    }

    #[test]
    fn p_variation_examples() {
        let line = PiecewisePath::uniform(vec![vec![0.0, 0.0], vec![0.3, 0.4], vec![0.6, 0.8]]).unwrap();
        for p in [1.0, 2.0, 3.5] {
            assert!((p_variation_control(&line, p, 1).unwrap() - 1.0).abs() < 1e-12);
        }
        let stairs = PiecewisePath::uniform(vec![vec![0.0], vec![0.5], vec![0.5], vec![2.0]]).unwrap();
        assert!((p_variation_control(&stairs, 1.0, 1).unwrap() - 2.0).abs() < 1e-12);
        let p = path2();
        let mut last = f64::INFINITY;
        for q in [1.0, 1.5, 2.0, 3.0, 5.0] {
            let v = p_variation_control(&p, q, 1).unwrap();
            assert!(v <= last + 1e-12);
            last = v;
        }
        assert!(p_variation_control(&p, 0.5, 1).is_err());
    }
}
