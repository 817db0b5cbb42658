//! Pathwise solvers for `dX = Σ_i V_i(X) dB^i` driven by fBm, and the
//! commutative semigroup.
//!
//! * [`solve_wong_zakai`]: the ODE driven by the piecewise-linear
//!   interpolation of a sampled grid, integrated with rk4 per cell.
//! * [`solve_commutative`]: the composed flow `e^{V₁B¹}∘⋯∘e^{V_dB^d}(x₀)`,
//!   exact for commuting fields at every `H`.
//! * [`estimate_ptf`]: Monte Carlo `E f(X_t)`.
//! * [`semigroup_commutative`]: the truncated series of
//!   `exp(½ t^{2H} Σ V_i²) f`.

mod estimate;
mod flow;
mod semigroup;
mod wz;

use serde::{Deserialize, Serialize};

use crate::algebra::{Program, VectorField};
use crate::error::{domain, Error, Result};
use crate::fbm::Hurst;

pub use estimate::{estimate_ptf, estimate_ptf_many, PtfConfig, PtfEstimate, PtfSolver, MAX_EXCLUDED_FRACTION};
pub use flow::{flow_exp, solve_commutative, Flow};
pub use semigroup::{semigroup_commutative, PdeResidual, Semigroup, SemigroupValue};
pub use wz::{solve_wong_zakai, WongZakai};

/// Default state-norm bound beyond which a solve is declared divergent.
pub const DEFAULT_DIVERGENCE_BOUND: f64 = 1e8;

/// The equation `X = x₀ + Σ_i ∫ V_i(X) dB^i`.
#[derive(Debug, Clone)]
pub struct SdeSpec {
    pub fields: Vec<VectorField>,
    pub hurst: Hurst,
    pub initial: Vec<f64>,
}

impl SdeSpec {
    pub fn new(fields: Vec<VectorField>, hurst: Hurst, initial: Vec<f64>) -> Result<Self> {
        let Some(first) = fields.first() else {
            return Err(domain("at least one vector field is required"));
        };
        let n = first.dimension();
        if fields.iter().any(|f| f.dimension() != n) {
            return Err(domain("vector fields have different dimensions"));
        }
        if initial.len() != n {
            return Err(domain(format!("initial point has dimension {}, fields have {n}", initial.len())));
        }
        Ok(SdeSpec { fields, hurst, initial })
    }

    /// State dimension `n`.
    pub fn dimension(&self) -> usize {
        self.initial.len()
    }

    /// Driver dimension `d`.
    pub fn driver_dimension(&self) -> usize {
        self.fields.len()
    }

    /// The same equation started elsewhere.
    pub fn with_initial(&self, initial: Vec<f64>) -> Result<Self> {
        SdeSpec::new(self.fields.clone(), self.hurst, initial)
    }

    /// Whether the rough-path theory behind the Wong–Zakai limit covers this
    /// `H` (`H > 1/3`). The commutative solver is valid for every `H`.
    pub fn wong_zakai_covered(&self) -> bool {
        self.hurst.value() > 1.0 / 3.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Rk4,
}

/// Wong–Zakai discretisation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub mesh_level: u32,
    pub substeps: usize,
    pub integrator: Integrator,
    /// Horizon `t ∈ (0, 1]`; the `[0, 1]` driver is scaled by `t^H`.
    pub horizon: f64,
    pub divergence_bound: f64,
}

impl SolveConfig {
    pub fn new(mesh_level: u32) -> Self {
        SolveConfig {
            mesh_level,
            substeps: 4,
            integrator: Integrator::Rk4,
            horizon: 1.0,
            divergence_bound: DEFAULT_DIVERGENCE_BOUND,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.substeps == 0 {
            return Err(domain("substeps per cell must be at least 1"));
        }
        if !(self.horizon > 0.0 && self.horizon <= 1.0) {
            return Err(domain(format!("horizon {} outside (0, 1]", self.horizon)));
        }
        if !(self.divergence_bound > 0.0) {
            return Err(domain("divergence bound must be positive"));
        }
        Ok(())
    }
}

/// States at the grid nodes, mapped to physical time `t·i/2^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Header `t,x1,...,xn`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let n = self.states.first().map_or(0, Vec::len);
        let mut out = String::from("t");
        for k in 1..=n {
            let _ = write!(out, ",x{k}");
        }
        out.push('\n');
        for (t, x) in self.times.iter().zip(&self.states) {
            let _ = write!(out, "{t:.16e}");
            for v in x {
                let _ = write!(out, ",{v:.16e}");
            }
            out.push('\n');
        }
        out
    }
}

/// All field components compiled into one program; output `i·n + k` is
/// component `k` of field `i`.
#[derive(Debug, Clone)]
pub(crate) struct FieldSet {
    prog: Program,
    n: usize,
    d: usize,
}

impl FieldSet {
    pub(crate) fn new(fields: &[VectorField]) -> Self {
        let n = fields.first().map_or(0, VectorField::dimension);
        let comps: Vec<_> = fields.iter().flat_map(|f| f.components().iter().cloned()).collect();
        FieldSet { prog: Program::compile(&comps), n, d: fields.len() }
    }

    /// `out = Σ_i V_i(x) w_i`.
    pub(crate) fn combine(&self, x: &[f64], w: &[f64], ws: &mut Workspace, out: &mut [f64]) -> Result<()> {
        ws.vals.resize(self.n * self.d, 0.0);
        self.prog.run(x, &mut ws.scratch, &mut ws.vals)?;
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &wi) in w.iter().enumerate() {
            if wi == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(&ws.vals[i * self.n..(i + 1) * self.n]) {
                *o += v * wi;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Default)]
pub(crate) struct Workspace {
    scratch: Vec<f64>,
    vals: Vec<f64>,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
}

pub(crate) fn divergence(time: f64, x: &[f64], last: &[f64], bound: f64) -> Option<Error> {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    (!norm.is_finite() || norm > bound).then(|| Error::Divergence { time, norm, last_state: last.to_vec() })
}
