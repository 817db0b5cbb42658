use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::flow::{commutative_with, Flow};
use super::wz::WongZakai;
use super::{SdeSpec, SolveConfig, Workspace, DEFAULT_DIVERGENCE_BOUND};
use crate::algebra::{Program, ScalarExpr};
use crate::error::{domain, Error, Result};
use crate::fbm::{FbmSampler, SamplerMethod};
use crate::moments::MIN_REPLICATES;
use crate::numeric::mc_reduce;
use crate::rng::{stream, Purpose};

/// Largest tolerated fraction of divergent replicates.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.01;

/// Pathwise solver used inside [`estimate_ptf`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "snake_case")]
pub enum PtfSolver {
    WongZakai { mesh_level: u32, substeps: usize, sampler: SamplerMethod },
    /// Composed flows at `B_t = t^H Z`; commuting fields only.
    Commutative { ode_tol: f64 },
}

impl PtfSolver {
    pub fn name(&self) -> &'static str {
        match self {
            PtfSolver::WongZakai { .. } => "wong-zakai",
            PtfSolver::Commutative { .. } => "commutative",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PtfConfig {
    pub solver: PtfSolver,
    pub replicates: u64,
    pub seed: u64,
    pub divergence_bound: f64,
}

impl PtfConfig {
    pub fn wong_zakai(mesh_level: u32, replicates: u64, seed: u64) -> Self {
        PtfConfig {
            solver: PtfSolver::WongZakai { mesh_level, substeps: 4, sampler: SamplerMethod::Auto },
            replicates,
            seed,
            divergence_bound: DEFAULT_DIVERGENCE_BOUND,
        }
    }

    pub fn commutative(ode_tol: f64, replicates: u64, seed: u64) -> Self {
        PtfConfig {
            solver: PtfSolver::Commutative { ode_tol },
            replicates,
            seed,
            divergence_bound: DEFAULT_DIVERGENCE_BOUND,
        }
    }
}

/// Monte Carlo estimate of `E f(X_t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtfEstimate {
    pub t: f64,
    pub f: String,
    pub mean: f64,
    pub std_error: f64,
    pub method: String,
    pub mesh_level: Option<u32>,
    pub replicates: u64,
    pub excluded: u64,
}

impl PtfEstimate {
    pub const CSV_HEADER: &'static str = "t,f,mean,std_error,method,mesh_level,replicates";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.16e},\"{}\",{:.16e},{:.16e},{},{},{}",
            self.t,
            self.f.replace('"', "\"\""),
            self.mean,
            self.std_error,
            self.method,
            self.mesh_level.map(|m| m.to_string()).unwrap_or_default(),
            self.replicates - self.excluded
        )
    }
}

/// `E f(X_t)` at a single horizon.
pub fn estimate_ptf(spec: &SdeSpec, f: &ScalarExpr, t: f64, cfg: &PtfConfig) -> Result<PtfEstimate> {
    Ok(estimate_ptf_many(spec, f, &[t], cfg)?.remove(0))
}

/// `E f(X_t)` at several horizons from the same draws: replicate `r`
/// samples one `[0, 1]` driver and rescales it by `t^H` for every `t`.
/// A replicate that diverges at any horizon is excluded everywhere; more
/// than 1% exclusions fail the run.
pub fn estimate_ptf_many(spec: &SdeSpec, f: &ScalarExpr, ts: &[f64], cfg: &PtfConfig) -> Result<Vec<PtfEstimate>> {
    if cfg.replicates < MIN_REPLICATES {
        return Err(domain(format!("at least {MIN_REPLICATES} replicates required, got {}", cfg.replicates)));
    }
    if ts.is_empty() {
        return Err(domain("no horizons given"));
    }
    if let Some(t) = ts.iter().find(|&&t| !(t > 0.0 && t <= 1.0)) {
        return Err(domain(format!("horizon {t} outside (0, 1]")));
    }
    if f.max_variable() > spec.dimension() {
        return Err(domain(format!(
            "function uses x{} but the state has dimension {}",
            f.max_variable(),
            spec.dimension()
        )));
    }
    let fp = Program::compile(std::slice::from_ref(f));
    let h = spec.hurst.value();
    let d = spec.driver_dimension();
    let (stats, excluded) = match cfg.solver {
        PtfSolver::WongZakai { mesh_level, substeps, sampler } => {
            let sc = SolveConfig { substeps, divergence_bound: cfg.divergence_bound, ..SolveConfig::new(mesh_level) };
            let solver = WongZakai::new(spec, &sc)?;
            let fbm = FbmSampler::new(spec.hurst, mesh_level, d, sampler)?;
            mc_reduce(cfg.replicates, ts.len(), |r, out| {
                let grid = fbm.sample(&mut stream(cfg.seed, Purpose::SdeReplicate, r));
                let mut ws = Workspace::default();
                for &t in ts {
                    match solver.endpoint(&grid, &spec.initial, t, &mut ws) {
                        Ok(x) => out.push(fp.eval1(&x)?),
                        Err(Error::Divergence { .. }) => return Ok(false),
                        Err(e) => return Err(e),
                    }
                }
                Ok(true)
            })?
        }
        PtfSolver::Commutative { ode_tol } => {
            let flows: Vec<Flow> = spec.fields.iter().map(Flow::new).collect();
            mc_reduce(cfg.replicates, ts.len(), |r, out| {
                let mut rng = stream(cfg.seed, Purpose::SdeReplicate, r);
                let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                let mut ws = Workspace::default();
                for &t in ts {
                    let s = t.powf(h);
                    let b: Vec<f64> = z.iter().map(|v| s * v).collect();
                    match commutative_with(&flows, &spec.initial, &b, ode_tol, &mut ws) {
                        Ok(x) => out.push(fp.eval1(&x)?),
                        Err(Error::Divergence { .. }) => return Ok(false),
                        Err(e) => return Err(e),
                    }
                }
                Ok(true)
            })?
        }
    };
    if excluded as f64 > MAX_EXCLUDED_FRACTION * cfg.replicates as f64 {
        return Err(Error::Numerical(format!(
            "{excluded} of {} replicates diverged (more than {}%)",
            cfg.replicates,
            100.0 * MAX_EXCLUDED_FRACTION
        )));
    }
    let mesh_level = match cfg.solver {
        PtfSolver::WongZakai { mesh_level, .. } => Some(mesh_level),
        PtfSolver::Commutative { .. } => None,
    };
    let fs = f.to_string_limited(200);
    Ok(ts
        .iter()
        .zip(stats)
        .map(|(&t, s)| PtfEstimate {
            t,
            f: fs.clone(),
            mean: s.mean,
            std_error: s.std_error(),
            method: cfg.solver.name().into(),
            mesh_level,
            replicates: cfg.replicates,
            excluded,
        })
        .collect())
}
