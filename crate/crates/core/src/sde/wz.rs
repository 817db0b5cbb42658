use super::{divergence, FieldSet, SdeSpec, SolveConfig, Trajectory, Workspace};
use crate::error::{domain, Error, Result};
use crate::fbm::FbmGrid;

/// Compiled Wong–Zakai stepper for one equation.
#[derive(Debug, Clone)]
pub struct WongZakai {
    fields: FieldSet,
    substeps: usize,
    bound: f64,
}

impl WongZakai {
    pub fn new(spec: &SdeSpec, cfg: &SolveConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(WongZakai { fields: FieldSet::new(&spec.fields), substeps: cfg.substeps, bound: cfg.divergence_bound })
    }

    /// Advances `x` across one cell whose driver increment is `delta`:
    /// rk4 on `x' = Σ_i V_i(x) δ_i` over unit parameter time.
    pub(crate) fn cell(&self, x: &mut [f64], delta: &[f64], ws: &mut Workspace) -> Result<()> {
        let n = x.len();
        let h = 1.0 / self.substeps as f64;
        let mut k = std::mem::take(&mut ws.k);
        let mut tmp = std::mem::take(&mut ws.tmp);
        for v in k.iter_mut().take(4) {
            v.resize(n, 0.0);
        }
        tmp.resize(n, 0.0);
        let mut res = Ok(());
        for _ in 0..self.substeps {
            let stage = |from: &[f64], kin: &[f64], c: f64, tmp: &mut [f64]| {
                for j in 0..n {
                    tmp[j] = from[j] + c * kin[j];
                }
            };
            let [k1, k2, k3, k4, ..] = &mut k;
            res = self.fields.combine(x, delta, ws, k1);
            if res.is_err() {
                break;
            }
            stage(x, k1, 0.5 * h, &mut tmp);
            res = self.fields.combine(&tmp, delta, ws, k2);
            if res.is_err() {
                break;
            }
            stage(x, k2, 0.5 * h, &mut tmp);
            res = self.fields.combine(&tmp, delta, ws, k3);
            if res.is_err() {
                break;
            }
            stage(x, k3, h, &mut tmp);
            res = self.fields.combine(&tmp, delta, ws, k4);
            if res.is_err() {
                break;
            }
            for j in 0..n {
                x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
        ws.k = k;
        ws.tmp = tmp;
        res
    }

    /// Endpoint of the solve driven by `t^H`-scaled increments of `grid`.
    pub(crate) fn endpoint(&self, grid: &FbmGrid, x0: &[f64], t: f64, ws: &mut Workspace) -> Result<Vec<f64>> {
        let scale = t.powf(grid.hurst.value());
        let cells = grid.cells();
        let mut x = x0.to_vec();
        let mut last = x.clone();
        let mut delta = vec![0.0; grid.dimension];
        for i in 0..cells {
            for (dj, (b, a)) in delta.iter_mut().zip(grid.row(i + 1).iter().zip(grid.row(i))) {
                *dj = scale * (b - a);
            }
            let time = t * (i + 1) as f64 / cells as f64;
            self.cell(&mut x, &delta, ws).map_err(|e| overflow_as_divergence(e, time, &last))?;
            if let Some(e) = divergence(time, &x, &last, self.bound) {
                return Err(e);
            }
            last.copy_from_slice(&x);
        }
        Ok(x)
    }
}

/// Field values overflowing inside a step mean the state ran away.
pub(crate) fn overflow_as_divergence(e: Error, time: f64, last: &[f64]) -> Error {
    match e {
        Error::Numerical(m) if m.starts_with("non-finite") => {
            Error::Divergence { time, norm: f64::INFINITY, last_state: last.to_vec() }
        }
        other => other,
    }
}

/// Solves the Wong–Zakai ODE on the grid's cells, recording node states.
/// A state leaving the configured bound is reported as divergence with the
/// last recorded state.
pub fn solve_wong_zakai(spec: &SdeSpec, grid: &FbmGrid, cfg: &SolveConfig) -> Result<Trajectory> {
    if grid.hurst != spec.hurst {
        return Err(domain(format!(
            "grid has H = {}, equation has H = {}",
            grid.hurst.value(),
            spec.hurst.value()
        )));
    }
    if grid.dimension != spec.driver_dimension() {
        return Err(domain(format!(
            "grid has {} coordinates, equation has {} driving fields",
            grid.dimension,
            spec.driver_dimension()
        )));
    }
    if grid.mesh_level != cfg.mesh_level {
        return Err(domain(format!(
            "grid mesh level {} differs from configured level {}",
            grid.mesh_level, cfg.mesh_level
        )));
    }
    let solver = WongZakai::new(spec, cfg)?;
    let t = cfg.horizon;
    let scale = t.powf(spec.hurst.value());
    let cells = grid.cells();
    let mut ws = Workspace::default();
    let mut x = spec.initial.clone();
    let mut times = vec![0.0];
    let mut states = vec![x.clone()];
    for i in 0..cells {
        let delta: Vec<f64> = grid.increment(i).iter().map(|v| v * scale).collect();
        let time = t * (i + 1) as f64 / cells as f64;
        let last = states.last().expect("non-empty");
        solver.cell(&mut x, &delta, &mut ws).map_err(|e| overflow_as_divergence(e, time, last))?;
        if let Some(e) = divergence(time, &x, last, cfg.divergence_bound) {
            return Err(e);
        }
        times.push(time);
        states.push(x.clone());
    }
    Ok(Trajectory { times, states })
}
