use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{expansion_coefficients, partial_sum, ExpansionTerm};
use crate::algebra::{GammaEngine, ScalarExpr};
use crate::error::{domain, Result};
use crate::numeric::least_squares;
use crate::sde::{estimate_ptf_many, PtfConfig, PtfEstimate, SdeSpec};

/// Residuals below this many standard errors are treated as noise.
pub const SIGNIFICANCE: f64 = 4.0;
pub const MIN_T_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// No residual exceeds the significance threshold.
    BelowResolution,
    /// A slope was fitted through the significant residuals.
    Fitted,
    /// Exactly one significant residual; no slope can be fitted.
    SinglePoint,
}

impl Verdict {
    pub fn text(self) -> &'static str {
        match self {
            Verdict::BelowResolution => "remainder below MC resolution",
            Verdict::Fitted => "remainder resolved; slope fitted",
            Verdict::SinglePoint => "remainder resolved at one point only; slope not fitted",
        }
    }
}

/// Comparison of the truncated expansion with Monte Carlo `E f(X_t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub hurst: f64,
    pub x: Vec<f64>,
    pub f_source: String,
    pub terms: Vec<ExpansionTerm>,
    pub t_grid: Vec<f64>,
    pub mc: Vec<PtfEstimate>,
    pub partial_sums: Vec<f64>,
    /// `mc − partial sum`
    pub residuals: Vec<f64>,
    /// MC and coefficient standard errors combined
    pub residual_se: Vec<f64>,
    pub significant: Vec<bool>,
    /// Least-squares slope of `log|r|` against `log t` over significant points.
    pub slope: Option<f64>,
    pub verdict: Verdict,
}

impl ExpansionReport {
    /// `{H, x, f_source, terms:[{k, exponent, value}], t_grid, mc:[{t, mean, se}], residuals, slope, verdict}`
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "H": self.hurst,
            "x": self.x,
            "f_source": self.f_source,
            "terms": self.terms.iter().map(|t| json!({
                "k": t.k, "exponent": t.exponent, "value": t.value, "se": t.std_error
            })).collect::<Vec<_>>(),
            "t_grid": self.t_grid,
            "mc": self.mc.iter().map(|e| json!({"t": e.t, "mean": e.mean, "se": e.std_error})).collect::<Vec<_>>(),
            "residuals": self.residuals,
            "residual_se": self.residual_se,
            "slope": self.slope,
            "verdict": self.verdict.text(),
        })
    }

    /// Header `t,mean,se,partial_sum,residual,residual_se,significant`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,mean,se,partial_sum,residual,residual_se,significant\n");
        for i in 0..self.t_grid.len() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
                self.t_grid[i],
                self.mc[i].mean,
                self.mc[i].std_error,
                self.partial_sums[i],
                self.residuals[i],
                self.residual_se[i],
                self.significant[i]
            ));
        }
        out
    }
}

fn check_grid(ts: &[f64]) -> Result<()> {
    if ts.len() < MIN_T_POINTS {
        return Err(domain(format!("need at least {MIN_T_POINTS} horizons, got {}", ts.len())));
    }
    if ts.iter().any(|&t| !(t > 0.0 && t <= 0.5)) {
        return Err(domain("horizons must lie in (0, 0.5]"));
    }
    let ratio = ts[1] / ts[0];
    if !(ratio > 1.0) || ts.windows(2).any(|w| ((w[1] / w[0]) / ratio - 1.0).abs() > 1e-6) {
        return Err(domain("horizons must be increasing with a constant ratio"));
    }
    Ok(())
}

/// Geometric grid of `count` horizons from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let r = (hi / lo).powf(1.0 / (count - 1) as f64);
    (0..count).map(|i| if i + 1 == count { hi } else { lo * r.powi(i as i32) }).collect()
}

/// Residuals `E f(X_t) − Σ_{k ≤ N} t^{2kH} Γ_k f(x)` on a geometric grid in
/// `(0, 0.5]`, with the slope of `log|r|` fitted over the points where
/// `|r|` exceeds [`SIGNIFICANCE`] standard errors.
pub fn validate_expansion(
    spec: &SdeSpec,
    f: &ScalarExpr,
    n_max: usize,
    t_grid: &[f64],
    mc: &PtfConfig,
    engine: GammaEngine,
) -> Result<ExpansionReport> {
    check_grid(t_grid)?;
    let x = spec.initial.clone();
    let terms = expansion_coefficients(spec, f, &x, n_max, engine)?;
    let est = estimate_ptf_many(spec, f, t_grid, mc)?;
    let mut partial_sums = Vec::new();
    let mut residuals = Vec::new();
    let mut residual_se = Vec::new();
    let mut significant = Vec::new();
    for (e, &t) in est.iter().zip(t_grid) {
        let (p, pse) = partial_sum(&terms, t);
        let r = e.mean - p;
        let se = (e.std_error.powi(2) + pse.powi(2)).sqrt();
        partial_sums.push(p);
        residuals.push(r);
        residual_se.push(se);
        significant.push(r.abs() > SIGNIFICANCE * se);
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = t_grid
        .iter()
        .zip(&residuals)
        .zip(&significant)
        .filter(|(_, &s)| s)
        .map(|((t, r), _)| (t.ln(), r.abs().ln()))
        .unzip();
    let (slope, verdict) = match lx.len() {
        0 => (None, Verdict::BelowResolution),
        1 => (None, Verdict::SinglePoint),
        _ => (least_squares(&lx, &ly).map(|(s, _)| s), Verdict::Fitted),
    };
    Ok(ExpansionReport {
        hurst: spec.hurst.value(),
        x,
        f_source: f.to_string_limited(200),
        terms,
        t_grid: t_grid.to_vec(),
        mc: est,
        partial_sums,
        residuals,
        residual_se,
        significant,
        slope,
        verdict,
    })
}
