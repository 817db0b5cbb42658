use serde::{Deserialize, Serialize};

use super::special::beta_fn;
use super::{MomentEstimate, MomentMethod};
use crate::error::{domain, Error, Result};
use crate::fbm::Hurst;
use crate::word::Word;

/// The three coefficients of the second-order operator
///
/// `Γ_2 = a_lead Σ V_i²V_j² + a_nested Σ V_i V_j² V_i + a_inter Σ (V_i V_j)²`,
///
/// equivalently the limits of the pairing sums for the words `(i,i,j,j)`,
/// `(i,j,j,i)` and `(i,j,i,j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairingCoefficients {
    pub a_leading_diag: f64,
    pub a_nested: f64,
    pub a_interleaved: f64,
    pub hurst: f64,
}

impl PairingCoefficients {
    pub fn sum(&self) -> f64 {
        self.a_leading_diag + self.a_nested + self.a_interleaved
    }

    /// Coefficient of the word `(i, j, k, l)`:
    /// `δ_ij δ_kl a_lead + δ_ik δ_jl a_inter + δ_il δ_jk a_nested`.
    pub fn word_coefficient(&self, letters: &[usize]) -> f64 {
        let d = |a: usize, b: usize| if letters[a] == letters[b] { 1.0 } else { 0.0 };
        d(0, 1) * d(2, 3) * self.a_leading_diag
            + d(0, 2) * d(1, 3) * self.a_interleaved
            + d(0, 3) * d(1, 2) * self.a_nested
    }
}

/// `(a_lead, a_nested, a_inter)` for `H > 1/4`:
/// `a_lead = (H/4) β(2H, 2H)`, `a_nested = (2H−1)/(8(4H−1))`,
/// `a_inter = H/(4(4H−1)) − (H/4) β(2H, 2H)`.
pub fn gamma2_coefficients(hurst: Hurst) -> Result<PairingCoefficients> {
    let h = hurst.value();
    if !hurst.has_analytic_gamma2() {
        return Err(domain(format!(
            "closed-form second-order coefficients need H > 1/4, got H = {h}"
        )));
    }
    let lead = 0.25 * h * beta_fn(2.0 * h, 2.0 * h)?;
    Ok(PairingCoefficients {
        a_leading_diag: lead,
        a_nested: (2.0 * h - 1.0) / (8.0 * (4.0 * h - 1.0)),
        a_interleaved: h / (4.0 * (4.0 * h - 1.0)) - lead,
        hurst: h,
    })
}

/// Closed-form `E ∫_{Δ^k[0,1]} dB^I` for words of length 2 and 4.
pub fn expected_iterated_closed_form(hurst: Hurst, word: &Word) -> Result<MomentEstimate> {
    if !hurst.has_analytic_gamma2() {
        return Err(domain(format!(
            "closed forms are valid only for H > 1/4, got H = {}",
            hurst.value()
        )));
    }
    let l = word.letters();
    let value = match l.len() {
        2 => {
            if l[0] == l[1] {
                0.5
            } else {
                0.0
            }
        }
        4 => gamma2_coefficients(hurst)?.word_coefficient(l),
        n => {
            return Err(Error::Capability(format!(
                "closed form covers words of length 2 and 4, got {n}; use the wick or mc engine"
            )))
        }
    };
    Ok(MomentEstimate::exact(value, MomentMethod::ClosedForm, hurst, word))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: f64) -> Hurst {
        Hurst::new(v).unwrap()
    }

    #[test]
    fn brownian_case() {
        let c = gamma2_coefficients(h(0.5)).unwrap();
        assert!((c.a_leading_diag - 0.125).abs() < 1e-15);
        assert!(c.a_nested.abs() < 1e-15);
        assert!(c.a_interleaved.abs() < 1e-15);
    }

    #[test]
    fn three_quarters() {
        let c = gamma2_coefficients(h(0.75)).unwrap();
        let b = std::f64::consts::PI / 8.0;
        assert!((c.a_nested - 1.0 / 32.0).abs() < 1e-15);
        assert!((c.a_leading_diag - 3.0 / 16.0 * b).abs() < 1e-14);
        assert!((c.a_interleaved - (3.0 / 32.0 - 3.0 / 16.0 * b)).abs() < 1e-14);
    }

    #[test]
    fn coefficients_sum_to_one_eighth() {
        use proptest::prelude::*;
        proptest!(|(v in 0.2501f64..0.9999)| {
            let c = gamma2_coefficients(h(v)).unwrap();
            prop_assert!((c.sum() - 0.125).abs() < 1e-12);
        });
    }

    #[test]
    fn continuity_across_one_half() {
        let below = gamma2_coefficients(h(0.5 - 1e-9)).unwrap();
        let above = gamma2_coefficients(h(0.5 + 1e-9)).unwrap();
        assert!((below.a_leading_diag - above.a_leading_diag).abs() < 1e-6);
        assert!((below.a_nested - above.a_nested).abs() < 1e-6);
        assert!((below.a_interleaved - above.a_interleaved).abs() < 1e-6);
    }

    #[test]
    fn word_values() {
        for v in [0.3, 0.6, 0.9] {
            let c = gamma2_coefficients(h(v)).unwrap();
            let e = |w: Word| expected_iterated_closed_form(h(v), &w).unwrap().value;
            assert_eq!(e(Word::from([1, 2])), 0.0);
            assert_eq!(e(Word::from([2, 2])), 0.5);
            assert_eq!(e(Word::from([1, 1, 2, 2])), c.a_leading_diag);
            assert_eq!(e(Word::from([1, 2, 1, 2])), c.a_interleaved);
            assert_eq!(e(Word::from([1, 2, 2, 1])), c.a_nested);
            assert_eq!(e(Word::from([1, 2, 3, 3])), 0.0);
            assert!((e(Word::from([3, 3, 3, 3])) - 0.125).abs() < 1e-12);
        }
        assert!(matches!(
            expected_iterated_closed_form(h(0.25), &Word::from([1, 1])),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            expected_iterated_closed_form(h(0.6), &Word::from([1, 1, 1])),
            Err(Error::Capability(_))
        ));
        let est = expected_iterated_closed_form(h(0.6), &Word::from([1, 1])).unwrap();
        assert_eq!(est.std_error, 0.0);
        assert!(est.method.is_deterministic());
    }
}
