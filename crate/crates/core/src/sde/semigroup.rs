use serde::{Deserialize, Serialize};

use super::SdeSpec;
use crate::algebra::{apply_field, Program, ScalarExpr, DEFAULT_NODE_CAP};
use crate::error::{domain, Error, Result};

/// Truncated value of `exp(½ t^{2H} L) f (x)`, `L = Σ V_i²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemigroupValue {
    pub value: f64,
    /// Magnitude of the last retained term.
    pub last_term: f64,
    /// `(½t^{2H})^k (L^k f)(x) / k!` for `k = 0..=K`.
    pub terms: Vec<f64>,
    /// True when `L^{K+1} f` vanishes identically, so the sum is exact.
    pub exact: bool,
}

/// Precomputed `L^k f` for repeated evaluation of the commutative semigroup.
#[derive(Debug, Clone)]
pub struct Semigroup {
    hurst: f64,
    powers: Vec<ScalarExpr>,
    program: Program,
    exact: bool,
    dimension: usize,
}

impl Semigroup {
    /// Builds `f, Lf, …, L^K f` symbolically. Stops early when a power is
    /// identically zero.
    pub fn new(spec: &SdeSpec, f: &ScalarExpr, k_max: usize) -> Result<Self> {
        let n = spec.dimension();
        if f.max_variable() > n {
            return Err(domain(format!("function uses x{} but the state has dimension {n}", f.max_variable())));
        }
        let mut powers = vec![f.clone()];
        let mut exact = false;
        for _ in 0..k_max {
            let prev = powers.last().expect("non-empty");
            let mut next = ScalarExpr::zero();
            for v in &spec.fields {
                next = next.add(&apply_field(v, &apply_field(v, prev)?)?);
            }
            let size = next.node_count();
            if size > DEFAULT_NODE_CAP {
                return Err(Error::Resource(format!("L^k f grew to {size} nodes")));
            }
            if next.as_constant() == Some(0.0) {
                exact = true;
                break;
            }
            powers.push(next);
        }
        let program = Program::compile(&powers);
        Ok(Semigroup { hurst: spec.hurst.value(), powers, program, exact, dimension: n })
    }

    pub fn powers(&self) -> &[ScalarExpr] {
        &self.powers
    }

    /// `(L^k f)(x)` for every retained `k`.
    pub fn power_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dimension {
            return Err(domain(format!("point has dimension {}, state has {}", x.len(), self.dimension)));
        }
        let mut out = vec![0.0; self.powers.len()];
        self.program.run(x, &mut Vec::new(), &mut out)?;
        Ok(out)
    }

    /// Truncated series at `(t, x)`. Fails when the terms have not started
    /// to decrease by the truncation order.
    pub fn value(&self, t: f64, x: &[f64]) -> Result<SemigroupValue> {
        if !(t >= 0.0) {
            return Err(domain(format!("time {t} must be non-negative")));
        }
        let lk = self.power_values(x)?;
        let u = 0.5 * t.powf(2.0 * self.hurst);
        let mut coef = 1.0;
        let mut terms = Vec::with_capacity(lk.len());
        for (k, v) in lk.iter().enumerate() {
            if k > 0 {
                coef *= u / k as f64;
            }
            terms.push(coef * v);
        }
        let kk = terms.len() - 1;
        let last = terms[kk].abs();
        if !self.exact && kk >= 1 && last != 0.0 && last >= terms[kk - 1].abs() {
            return Err(Error::Numerical(format!(
                "semigroup series not converging at t = {t}: term {kk} has magnitude {last:e}, term {} has {:e}",
                kk - 1,
                terms[kk - 1].abs()
            )));
        }
        let value = crate::numeric::compensated_sum(terms.iter().copied());
        Ok(SemigroupValue { value, last_term: if self.exact { 0.0 } else { last }, terms, exact: self.exact })
    }

    /// Finite-difference check of `∂φ/∂t` for `n = d = 1`, against both the
    /// diffusion form `H t^{2H−1} σ² φ''` and the generator form
    /// `H t^{2H−1} V²φ = H t^{2H−1} (σ² φ'' + σσ' φ')`.
    pub fn pde_residual(&self, spec: &SdeSpec, t: f64, x: f64, dt: f64, dx: f64) -> Result<PdeResidual> {
        if spec.dimension() != 1 || spec.driver_dimension() != 1 {
            return Err(domain("the PDE check is one-dimensional"));
        }
        if !(dt > 0.0 && dt < t && dx > 0.0) {
            return Err(domain("need 0 < dt < t and dx > 0"));
        }
        let phi = |t: f64, x: f64| self.value(t, &[x]).map(|v| v.value);
        let dphi_dt = (phi(t + dt, x)? - phi(t - dt, x)?) / (2.0 * dt);
        let (p_plus, p0, p_minus) = (phi(t, x + dx)?, phi(t, x)?, phi(t, x - dx)?);
        let d1 = (p_plus - p_minus) / (2.0 * dx);
        let d2 = (p_plus - 2.0 * p0 + p_minus) / (dx * dx);
        let sigma = &spec.fields[0].components()[0];
        let s = sigma.eval(&[x])?;
        let ds = sigma.derivative(1).eval(&[x])?;
        let h = self.hurst;
        let pre = h * t.powf(2.0 * h - 1.0);
        let diffusion = pre * s * s * d2;
        let generator = pre * (s * s * d2 + s * ds * d1);
        Ok(PdeResidual {
            t,
            x,
            dphi_dt,
            diffusion_rhs: diffusion,
            generator_rhs: generator,
            diffusion_residual: dphi_dt - diffusion,
            generator_residual: dphi_dt - generator,
        })
    }
}

/// Residuals of the two forms of the one-dimensional Kolmogorov equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeResidual {
    pub t: f64,
    pub x: f64,
    pub dphi_dt: f64,
    pub diffusion_rhs: f64,
    pub generator_rhs: f64,
    pub diffusion_residual: f64,
    pub generator_residual: f64,
}

/// `Σ_{k ≤ K} (½ t^{2H})^k (L^k f)(x) / k!` with `L = Σ V_i²`, for
/// commuting fields.
pub fn semigroup_commutative(spec: &SdeSpec, f: &ScalarExpr, t: f64, x: &[f64], k_max: usize) -> Result<SemigroupValue> {
    Semigroup::new(spec, f, k_max)?.value(t, x)
}
