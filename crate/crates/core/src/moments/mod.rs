//! Expected iterated integrals `E ∫_{Δ^k[0,1]} dB^I` of fractional Brownian
//! motion, through four independent engines:
//!
//! | engine | validity | cost |
//! |---|---|---|
//! | [`expected_iterated_closed_form`] | `H > 1/4`, `|I| ∈ {2, 4}` | O(1) |
//! | [`expected_iterated_wick`] | `H > 1/2`, `|I| ≤ 6` | nested quadrature |
//! | [`expected_iterated_interpolated`] | `H > 1/4`, `|I| ∈ {2, 4}`, finite mesh | O(2^m) |
//! | [`mc_expected_iterated`] | any `H`, `|I| ≤ 6` | Monte Carlo |

mod closed;
mod interp;
mod mc;
mod simplex;
mod special;
mod wick;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use closed::{expected_iterated_closed_form, gamma2_coefficients, PairingCoefficients};
pub use interp::{expected_iterated_interpolated, interpolation_terms, InterpolationTerms, MAX_INTERP_LEVEL};
pub use mc::{mc_expected_iterated, mc_expected_iterated_many, McConfig, MIN_REPLICATES};
pub use simplex::{expected_iterated_wick, simplex_pair_integral, simplex_pair_integral_tol};
pub use special::{beta_fn, beta_quadrature, ln_beta};
pub use wick::{gaussian_product_moment, perfect_matchings, wick_pairings, Matching};

use crate::error::{domain, Result};
use crate::fbm::Hurst;
use crate::word::Word;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum MomentMethod {
    ClosedForm,
    WickQuadrature,
    InterpolationExact,
    MonteCarlo,
}

impl MomentMethod {
    pub fn is_deterministic(self) -> bool {
        !matches!(self, MomentMethod::MonteCarlo)
    }
}

impl fmt::Display for MomentMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MomentMethod::ClosedForm => "closed",
            MomentMethod::WickQuadrature => "wick",
            MomentMethod::InterpolationExact => "interp",
            MomentMethod::MonteCarlo => "mc",
        })
    }
}

/// A value of `E ∫ dB^I` with its provenance. `std_error` is zero exactly
/// for the deterministic engines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub std_error: f64,
    pub method: MomentMethod,
    pub hurst: f64,
    pub word: Word,
    pub mesh_level: Option<u32>,
    pub replicates: Option<u64>,
}

impl MomentEstimate {
    pub(crate) fn exact(value: f64, method: MomentMethod, hurst: Hurst, word: &Word) -> Self {
        MomentEstimate {
            value,
            std_error: 0.0,
            method,
            hurst: hurst.value(),
            word: word.clone(),
            mesh_level: None,
            replicates: None,
        }
    }

    pub const CSV_HEADER: &'static str = "H,word,method,value,std_error,mesh_level,replicates";

    /// Row matching [`Self::CSV_HEADER`]; empty cells for absent metadata.
    pub fn csv_row(&self) -> String {
        let opt = |o: Option<String>| o.unwrap_or_default();
        format!(
            "{:.16e},{},{},{:.16e},{:.16e},{},{}",
            self.hurst,
            self.word,
            self.method,
            self.value,
            self.std_error,
            opt(self.mesh_level.map(|m| m.to_string())),
            opt(self.replicates.map(|n| n.to_string())),
        )
    }

    /// `|value − target| ≤ sigmas · std_error` (exact equality for deterministic estimates
    /// is relaxed to `abs_floor`).
    pub fn consistent_with(&self, target: f64, sigmas: f64, abs_floor: f64) -> bool {
        (self.value - target).abs() <= sigmas * self.std_error + abs_floor
    }
}

/// Rescales a unit-horizon moment to horizon `t`: `t^{Hk} · value`.
pub fn scale_moment(value_at_one: f64, t: f64, word_len: usize, hurst: Hurst) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(domain(format!("horizon must be nonnegative, got {t}")));
    }
    if word_len == 0 {
        return Ok(value_at_one);
    }
    Ok(t.powf(hurst.value() * word_len as f64) * value_at_one)
}
