//! Exact expected iterated integrals of the dyadic interpolation `B^m`.
//!
//! `B^m` is piecewise linear, so `dB^m/du` is constant on every cell and the
//! Gaussian pairings of a 4-fold iterated integral reduce to sums over cells.
//! With `n = 2^m`, `h = 1/n` and `σ² = h^{2H}` the three pairing sums are
//!
//! * `A1 = ∫_{u2<u3} φ(u2) ψ(u3)` with `φ(u) = E[B^m(u) Ḃ^m(u)]` and
//!   `ψ(u) = E[Ḃ^m(u)(B^m(1) − B^m(u))]`, both affine on each cell;
//! * `A3 = ½ ∫_{u1<u4} E[Ḃ^m(u1) Ḃ^m(u4)] E[(B^m(u4) − B^m(u1))²]`, whose
//!   cell-pair terms depend only on the lag between cells (stationary
//!   increments);
//! * `A2 = 1/8 − A1 − A3`, since `A1 + A2 + A3 = E[(B^m(1))^4]/4! = 1/8` for
//!   every `m`.
//!
//! Both sums are `O(2^m)`.

use serde::{Deserialize, Serialize};

use super::{MomentEstimate, MomentMethod};
use crate::error::{domain, Error, Result};
use crate::fbm::{fgn_autocovariance, CovarianceKernel, Hurst};
use crate::numeric::CompensatedSum;
use crate::word::Word;

/// Largest mesh level accepted by the interpolation engine.
pub const MAX_INTERP_LEVEL: u32 = 24;

/// Pairing sums of `E ∫_{Δ^4} dB^{m,I}` at a fixed mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpolationTerms {
    pub hurst: f64,
    pub mesh_level: u32,
    /// pairing `{(1,2),(3,4)}`
    pub a1: f64,
    /// pairing `{(1,3),(2,4)}`
    pub a2: f64,
    /// pairing `{(1,4),(2,3)}`
    pub a3: f64,
    /// same-cell part of `2·A3`, equal to `2^{m(1−4H)}/12`
    pub a3_same_cell: f64,
    /// adjacent-cell part of `2·A3`
    pub a3_adjacent: f64,
    /// part of `2·A3` from cells at least two apart
    pub a3_far: f64,
}

impl InterpolationTerms {
    /// Coefficient of `(i, j, k, l)`: `δ_ij δ_kl A1 + δ_ik δ_jl A2 + δ_il δ_jk A3`.
    pub fn word_coefficient(&self, letters: &[usize]) -> f64 {
        let d = |a: usize, b: usize| if letters[a] == letters[b] { 1.0 } else { 0.0 };
        d(0, 1) * d(2, 3) * self.a1 + d(0, 2) * d(1, 3) * self.a2 + d(0, 3) * d(1, 2) * self.a3
    }
}

fn check(hurst: Hurst, mesh_level: u32) -> Result<()> {
    if !hurst.has_analytic_gamma2() {
        return Err(domain(format!(
            "the interpolation engine needs 1/4 < H < 1, got H = {}",
            hurst.value()
        )));
    }
    if mesh_level > MAX_INTERP_LEVEL {
        return Err(Error::Resource(format!(
            "mesh level {mesh_level} exceeds the interpolation limit {MAX_INTERP_LEVEL}"
        )));
    }
    Ok(())
}

/// Computes `A1`, `A2`, `A3` of the interpolated fBm at mesh level `m`.
pub fn interpolation_terms(hurst: Hurst, mesh_level: u32) -> Result<InterpolationTerms> {
    check(hurst, mesh_level)?;
    let hv = hurst.value();
    let h2 = 2.0 * hv;
    let n = 1usize << mesh_level;
    let step = 1.0 / n as f64;
    let s2 = step.powf(h2);
    let kernel = CovarianceKernel::new(hurst);

    // A1. Per cell c: Φ_c = ∫_c φ = p_c + σ²/2, Ψ_c = ∫_c ψ = q_c − σ²/2 with
    // p_c = Cov(B_{t_c}, Δ_c), q_c = Cov(Δ_c, B_1 − B_{t_c}).
    let mut a1 = CompensatedSum::default();
    let mut prefix = CompensatedSum::default();
    for c in 0..n {
        let t0 = c as f64 * step;
        let t1 = (c + 1) as f64 * step;
        let p = kernel.inc_cov(0.0, t0, t0, t1);
        let q = kernel.inc_cov(t0, t1, t0, 1.0);
        a1.add(prefix.value() * (q - 0.5 * s2));
        // ∫_{α<β} (p + ασ²)(q − βσ²)
        a1.add(0.5 * p * q - p * s2 / 3.0 + s2 * q / 6.0 - s2 * s2 / 8.0);
        prefix.add(p + 0.5 * s2);
    }

    // A3. For cells at lag L ≥ 1 (all quantities in units of σ²):
    // γ_L = Cov(Δ_c, Δ_{c+L}), V_L = Var(B_{t_{c+L}} − B_{t_c}) = L^{2H},
    // e_L = Cov(B_{t_{c+L}} − B_{t_c}, Δ_{c+L}), f_L = Cov(B_{t_{c+L}} − B_{t_c}, Δ_c).
    // The cell-pair integral of E[(B^m(v) − B^m(u))²] is V + 2/3 + e − f − γ/2.
    let same = n as f64 * s2 * s2 / 12.0;
    let mut adjacent = 0.0;
    let mut far = CompensatedSum::default();
    for lag in 1..n {
        let l = lag as f64;
        let gamma = fgn_autocovariance(hurst, lag);
        let v = l.powf(h2);
        let e = 0.5 * ((l + 1.0).powf(h2) - v - 1.0);
        let f = 0.5 * (v + 1.0 - (l - 1.0).powf(h2));
        let term = (n - lag) as f64 * s2 * s2 * gamma * (v + 2.0 / 3.0 + e - f - 0.5 * gamma);
        if lag == 1 {
            adjacent = term;
        } else {
            far.add(term);
        }
    }
    let far = far.value();
    let a1 = a1.value();
    let a3 = 0.5 * (same + adjacent + far);
    Ok(InterpolationTerms {
        hurst: hv,
        mesh_level,
        a1,
        a2: 0.125 - a1 - a3,
        a3,
        a3_same_cell: same,
        a3_adjacent: adjacent,
        a3_far: far,
    })
}

/// Exact `E ∫_{Δ^{|I|}[0,1]} dB^{m,I}` for words of length 2 or 4 (odd
/// lengths give zero).
pub fn expected_iterated_interpolated(hurst: Hurst, word: &Word, mesh_level: u32) -> Result<MomentEstimate> {
    check(hurst, mesh_level)?;
    let l = word.letters();
    let value = match l.len() {
        n if n % 2 == 1 => 0.0,
        // ½ E[(B^m(1))²] = ½ R(1, 1)
        2 => {
            if l[0] == l[1] {
                0.5
            } else {
                0.0
            }
        }
        4 => interpolation_terms(hurst, mesh_level)?.word_coefficient(l),
        n => {
            return Err(Error::Capability(format!(
                "the interpolation engine covers words of length 2 and 4, got {n}; use mc"
            )))
        }
    };
    Ok(MomentEstimate {
        mesh_level: Some(mesh_level),
        ..MomentEstimate::exact(value, MomentMethod::InterpolationExact, hurst, word)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::closed::gamma2_coefficients;

    fn h(v: f64) -> Hurst {
        Hurst::new(v).unwrap()
    }

    /// Brute-force oracle: enumerate nondecreasing cell tuples `c1 ≤ c2 ≤ c3 ≤ c4`,
    /// weight each by the ordered-simplex volume `Π 1/(group size)!`, and pair
    /// the increment covariances directly.
    fn brute_force(hv: f64, m: u32) -> [f64; 3] {
        let n = 1usize << m;
        let k = CovarianceKernel::new(h(hv));
        let t = |i: usize| i as f64 / n as f64;
        let cov: Vec<Vec<f64>> = (0..n)
            .map(|a| (0..n).map(|b| k.inc_cov(t(a), t(a + 1), t(b), t(b + 1))).collect())
            .collect();
        let fact = [1.0, 1.0, 2.0, 6.0, 24.0];
        let mut acc = [0.0; 3];
        for c1 in 0..n {
            for c2 in c1..n {
                for c3 in c2..n {
                    for c4 in c3..n {
                        let cs = [c1, c2, c3, c4];
                        let mut w = 1.0;
                        let mut run = 1;
                        for i in 1..4 {
                            if cs[i] == cs[i - 1] {
                                run += 1;
                            } else {
                                w /= fact[run];
                                run = 1;
                            }
                        }
                        w /= fact[run];
                        acc[0] += w * cov[c1][c2] * cov[c3][c4];
                        acc[1] += w * cov[c1][c3] * cov[c2][c4];
                        acc[2] += w * cov[c1][c4] * cov[c2][c3];
                    }
                }
            }
        }
        acc
    }

    #[test]
    fn matches_cell_enumeration() {
        for hv in [0.3, 0.5, 0.75, 0.9] {
            for m in 0..=4 {
                let got = interpolation_terms(h(hv), m).unwrap();
                let want = brute_force(hv, m);
                assert!((got.a1 - want[0]).abs() < 1e-13, "A1 H={hv} m={m}");
                assert!((got.a2 - want[1]).abs() < 1e-13, "A2 H={hv} m={m}");
                assert!((got.a3 - want[2]).abs() < 1e-13, "A3 H={hv} m={m}");
            }
        }
    }

    #[test]
    fn same_cell_term_has_closed_form() {
        for hv in [0.3, 0.6] {
            for m in [3, 8, 12] {
                let got = interpolation_terms(h(hv), m).unwrap().a3_same_cell;
                let want = 2f64.powf(m as f64 * (1.0 - 4.0 * hv)) / 12.0;
                assert!((got - want).abs() < 1e-14 * want.max(1.0));
            }
        }
    }

    #[test]
    fn level_two_is_one_half_at_every_mesh() {
        for m in [0, 3, 10] {
            let e = expected_iterated_interpolated(h(0.35), &Word::from([2, 2]), m).unwrap();
            assert_eq!(e.value, 0.5);
            assert_eq!(e.mesh_level, Some(m));
            assert_eq!(expected_iterated_interpolated(h(0.35), &Word::from([1, 2]), m).unwrap().value, 0.0);
        }
    }

    #[test]
    fn converges_to_closed_form_for_young_regime() {
        let target = gamma2_coefficients(h(0.75)).unwrap().a_leading_diag;
        let w = Word::from([1, 1, 2, 2]);
        let defects: Vec<f64> = [6, 8, 10]
            .iter()
            .map(|&m| (expected_iterated_interpolated(h(0.75), &w, m).unwrap().value - target).abs())
            .collect();
        assert!(defects[0] > defects[1] && defects[1] > defects[2], "{defects:?}");
        assert!(defects[2] < 1e-5);
    }

    #[test]
    fn guards() {
        assert!(matches!(interpolation_terms(h(0.25), 4), Err(Error::Domain(_))));
        assert!(matches!(interpolation_terms(h(0.5), 25), Err(Error::Resource(_))));
        assert!(matches!(
            expected_iterated_interpolated(h(0.5), &Word::from([1, 1, 1, 1, 1, 1]), 4),
            Err(Error::Capability(_))
        ));
    }
}
