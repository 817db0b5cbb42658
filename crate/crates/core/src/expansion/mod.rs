//! The small-time expansion `E f(X_t) = Σ_{k ≤ N} t^{2kH} (Γ_k f)(x) + o(t^{(2N+1)H})`,
//! its Monte Carlo validation, and invariant-measure residuals
//! `∫ Γ_k f dμ`.

mod invariant;
mod report;

pub use invariant::{
    hermite_dictionary, invariant_residual, InvariantReport, MeasureSpec, ResidualEntry, DEFAULT_QUADRATURE_ORDER,
};
pub use report::{geometric_grid, validate_expansion, ExpansionReport, Verdict, MIN_T_POINTS, SIGNIFICANCE};

use serde::{Deserialize, Serialize};

use crate::algebra::{apply_operator_with_error, build_gamma, GammaEngine, ScalarExpr};
use crate::error::{domain, Result};
use crate::sde::SdeSpec;

/// One term `t^{2kH} (Γ_k f)(x)` of the expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionTerm {
    pub k: usize,
    /// `2kH`
    pub exponent: f64,
    pub value: f64,
    /// Propagated from sampled coefficients; 0 for exact engines.
    pub std_error: f64,
}

/// `[(Γ_0 f)(x), …, (Γ_N f)(x)]` with `Γ_0 = id`.
pub fn expansion_coefficients(
    spec: &SdeSpec,
    f: &ScalarExpr,
    x: &[f64],
    n_max: usize,
    engine: GammaEngine,
) -> Result<Vec<ExpansionTerm>> {
    if x.len() != spec.dimension() {
        return Err(domain(format!("point has dimension {}, state has {}", x.len(), spec.dimension())));
    }
    let h = spec.hurst.value();
    (0..=n_max)
        .map(|k| {
            let op = build_gamma(k, spec.hurst, &spec.fields, engine)?;
            let (value, std_error) = apply_operator_with_error(&op, f, x)?;
            Ok(ExpansionTerm { k, exponent: 2.0 * k as f64 * h, value, std_error })
        })
        .collect()
}

/// `Σ_k t^{2kH} (Γ_k f)(x)` and its propagated standard error.
pub fn partial_sum(terms: &[ExpansionTerm], t: f64) -> (f64, f64) {
    let mut s = crate::numeric::CompensatedSum::default();
    let mut var = 0.0;
    for term in terms {
        let w = t.powf(term.exponent);
        s.add(w * term.value);
        var += (w * term.std_error).powi(2);
    }
    (s.value(), var.sqrt())
}
