//! Ordered-simplex integrals of pair kernels `|t_b − t_a|^{2H−2}` and the
//! Wick engine for `H > 1/2`.

use std::collections::HashMap;

use super::wick::{perfect_matchings, Matching};
use super::{MomentEstimate, MomentMethod};
use crate::error::{domain, Error, Result};
use crate::fbm::Hurst;
use crate::numeric::{adaptive_endpoint_singular, stalled, FixedRule};
use crate::word::Word;

/// Largest number of pairs in a simplex integral.
pub const MAX_PAIRS: usize = 3;
/// Default absolute tolerance of the outermost 1-d pass.
pub const DEFAULT_TOL: f64 = 1e-10;
const MAX_PANELS: usize = 4000;
const INNER_STEP: f64 = 1.0 / 6.0;

/// `∫_{0<t_1<⋯<t_{2k}<1} Π_{(a,b)} |t_b − t_a|^{2H−2} dt` for a perfect
/// matching of `{0, …, 2k−1}`, `H > 1/2`, `k ≤ 3`.
pub fn simplex_pair_integral(hurst: Hurst, pairing: &Matching) -> Result<f64> {
    simplex_pair_integral_tol(hurst, pairing, DEFAULT_TOL)
}

/// As [`simplex_pair_integral`] with an explicit outer tolerance.
///
/// The integrand is homogeneous of degree `k(2H−2)`, so the last time is
/// pinned to 1 and the result rescaled by `1/(2kH)`. The first time is
/// integrated in closed form. A time `t_a` paired with a later `t_b` is
/// integrated in `u = (t_b − t_a)^{2H−1}`, which turns its kernel factor into
/// the constant Jacobian `1/(2H−1)`. What remains is bounded with power-type
/// endpoint behaviour: the outermost time uses adaptive Gauss–Kronrod after
/// `x = e ± s^{1/(2H−1)}` at both ends, inner times use the same passes for
/// `k ≤ 2` and a fixed tanh–sinh rule for `k = 3`.
pub fn simplex_pair_integral_tol(hurst: Hurst, pairing: &Matching, tol: f64) -> Result<f64> {
    let h = hurst.value();
    if h <= 0.5 {
        return Err(domain(format!("pair kernels are integrable only for H > 1/2, got {h}")));
    }
    let k = pairing.len();
    if k == 0 {
        return Ok(1.0);
    }
    if k > MAX_PAIRS {
        return Err(Error::Resource(format!("{k} pairs exceed the limit {MAX_PAIRS}")));
    }
    let n = 2 * k;
    let mut partner = vec![usize::MAX; n];
    for &(a, b) in pairing {
        if a >= n || b >= n || a == b || partner[a] != usize::MAX || partner[b] != usize::MAX {
            return Err(domain(format!("{pairing:?} is not a perfect matching of 0..{n}")));
        }
        partner[a] = b;
        partner[b] = a;
    }
    let ctx = Nested {
        alpha: 2.0 * h - 2.0,
        gamma: 1.0 / (2.0 * h - 1.0),
        partner,
        // adaptive inner passes are too noisy to converge three levels deep;
        // tanh-sinh is smooth in the outer times and absorbs endpoint powers
        inner_rule: (k >= 3).then(|| FixedRule::tanh_sinh(INNER_STEP)),
    };
    let mut t = vec![0.0; n];
    t[n - 1] = 1.0;
    let j = ctx.level(n - 2, &mut t, tol)?;
    Ok(j / (2.0 * k as f64 * h))
}

struct Nested {
    alpha: f64,
    gamma: f64,
    partner: Vec<usize>,
    inner_rule: Option<FixedRule>,
}

impl Nested {
    /// `∫_0^{t_1} (t_b − t_0)^{2H−2} dt_0`; every other kernel factor has been
    /// absorbed by a substitution.
    fn leaf(&self, t: &[f64]) -> f64 {
        let a1 = self.alpha + 1.0;
        let tb = t[self.partner[0]];
        (tb.powf(a1) - (tb - t[1]).max(0.0).powf(a1)) / a1
    }

    /// Integrates times `1..=j` with `t[j+1..]` fixed.
    fn level(&self, j: usize, t: &mut [f64], tol: f64) -> Result<f64> {
        if j == 0 {
            return Ok(self.leaf(t));
        }
        let upper = t[j + 1];
        if upper <= 0.0 {
            return Ok(0.0);
        }
        let outer = j + 2 == t.len();
        let p = self.partner[j];
        let (lo, hi) = if p > j {
            let a1 = self.alpha + 1.0;
            ((t[p] - upper).max(0.0).powf(a1), t[p].powf(a1))
        } else {
            (0.0, upper)
        };
        let mut f = |x: f64| {
            // the substituted integrand stays bounded as t_j reaches t_p, so
            // rounding onto the upper end is clamped, not dropped
            let tj = if p > j { (t[p] - x.powf(self.gamma)).min(upper) } else { x };
            if tj <= 0.0 || (p < j && tj >= upper) {
                return 0.0;
            }
            t[j] = tj;
            let inner = self.level(j - 1, t, tol * 0.1).unwrap_or(0.0);
            if p > j {
                self.gamma * inner
            } else {
                inner
            }
        };
        if let (Some(rule), false) = (&self.inner_rule, outer) {
            return Ok(rule.integrate(&mut f, lo, hi));
        }
        let q = adaptive_endpoint_singular(&mut f, lo, hi, self.gamma, tol, MAX_PANELS);
        // inner levels stop at their rounding floor; only the outer pass is checked
        if outer && !q.converged {
            return Err(stalled(lo, hi, &q, tol));
        }
        Ok(q.value)
    }
}

/// `E ∫_{Δ^{|I|}[0,1]} dB^I` for `H > 1/2` as
/// `(H(2H−1))^k Σ_{matchings} Π δ · ∫_Δ Π |t_b − t_a|^{2H−2}`.
/// Odd words give exactly zero.
pub fn expected_iterated_wick(hurst: Hurst, word: &Word) -> Result<MomentEstimate> {
    let h = hurst.value();
    if h <= 0.5 {
        return Err(domain(format!("the Wick engine needs H > 1/2, got {h}")));
    }
    let letters = word.letters();
    if letters.len() > 2 * MAX_PAIRS {
        return Err(Error::Resource(format!(
            "the Wick engine handles words up to length {}, got {}",
            2 * MAX_PAIRS,
            letters.len()
        )));
    }
    if letters.len() % 2 == 1 {
        return Ok(MomentEstimate::exact(0.0, MomentMethod::WickQuadrature, hurst, word));
    }
    let k = letters.len() / 2;
    let tol = if k <= 2 { DEFAULT_TOL } else { 1e-8 };
    let mut cache: HashMap<Matching, f64> = HashMap::new();
    let mut total = 0.0;
    for m in perfect_matchings(letters.len())? {
        if m.iter().all(|&(a, b)| letters[a] == letters[b]) {
            let v = match cache.get(&m) {
                Some(&v) => v,
                None => {
                    let v = simplex_pair_integral_tol(hurst, &m, tol)?;
                    cache.insert(m.clone(), v);
                    v
                }
            };
            total += v;
        }
    }
    let value = (h * (2.0 * h - 1.0)).powi(k as i32) * total;
    Ok(MomentEstimate::exact(value, MomentMethod::WickQuadrature, hurst, word))
}
