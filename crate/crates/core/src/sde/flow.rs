use super::wz::overflow_as_divergence;
use super::{divergence, FieldSet, SdeSpec, Workspace, DEFAULT_DIVERGENCE_BOUND};
use crate::algebra::VectorField;
use crate::error::{domain, Error, Result};

const MAX_STEPS: usize = 1_000_000;

// Dormand–Prince 5(4) tableau
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Compiled flow of one autonomous field.
#[derive(Debug, Clone)]
pub struct Flow {
    field: FieldSet,
    n: usize,
    bound: f64,
}

impl Flow {
    pub fn new(v: &VectorField) -> Self {
        Flow { field: FieldSet::new(std::slice::from_ref(v)), n: v.dimension(), bound: DEFAULT_DIVERGENCE_BOUND }
    }

    /// `e^{sV}(x)` by Dormand–Prince with mixed tolerance
    /// `tol·(1 + |x_k|)` per step.
    pub fn run(&self, s: f64, x: &[f64], tol: f64) -> Result<Vec<f64>> {
        self.run_ws(s, x, tol, &mut Workspace::default())
    }

    pub(crate) fn run_ws(&self, s: f64, x: &[f64], tol: f64, ws: &mut Workspace) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(domain(format!("point has dimension {}, field has {}", x.len(), self.n)));
        }
        if !(tol > 0.0) || !s.is_finite() {
            return Err(domain("flow needs a finite time and a positive tolerance"));
        }
        let mut y = x.to_vec();
        if s == 0.0 {
            return Ok(y);
        }
        let n = self.n;
        let mut k = std::mem::take(&mut ws.k);
        for v in k.iter_mut() {
            v.resize(n, 0.0);
        }
        let res = self.integrate(s, &mut y, tol, &mut k, ws);
        ws.k = k;
        res.map(|_| y)
    }

    fn integrate(&self, s: f64, y: &mut [f64], tol: f64, k: &mut [Vec<f64>; 7], ws: &mut Workspace) -> Result<()> {
        let n = self.n;
        let one = [1.0];
        let mut tmp = vec![0.0; n];
        let mut y5 = vec![0.0; n];
        let mut t = 0.0;
        let mut h = s;
        self.field.combine(y, &one, ws, &mut k[0]).map_err(|e| overflow_as_divergence(e, t, y))?;
        for _ in 0..MAX_STEPS {
            if (s - t) * s.signum() <= 0.0 {
                return Ok(());
            }
            if (t + h - s) * s.signum() > 0.0 {
                h = s - t;
            }
            for st in 1..7 {
                for j in 0..n {
                    let mut acc = y[j];
                    for (q, kq) in k.iter().enumerate().take(st) {
                        acc += h * A[st][q] * kq[j];
                    }
                    tmp[j] = acc;
                }
                self.field.combine(&tmp, &one, ws, &mut k[st]).map_err(|e| overflow_as_divergence(e, t, y))?;
            }
            let mut err: f64 = 0.0;
            for j in 0..n {
                let mut hi = y[j];
                let mut lo = y[j];
                for q in 0..7 {
                    hi += h * B5[q] * k[q][j];
                    lo += h * B4[q] * k[q][j];
                }
                y5[j] = hi;
                err = err.max((hi - lo).abs() / (tol * (1.0 + y[j].abs().max(hi.abs()))));
            }
            if err <= 1.0 {
                t += h;
                if let Some(e) = divergence(t, &y5, y, self.bound) {
                    return Err(e);
                }
                y.copy_from_slice(&y5);
                // first-same-as-last: the final stage is f at the new point
                let (head, tail) = k.split_at_mut(6);
                head[0].copy_from_slice(&tail[0]);
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
            if (s - t) * s.signum() > 1e-13 * s.abs() && h.abs() < 1e-13 * s.abs() {
                return Err(Error::Numerical(format!("flow step size collapsed at parameter {t} of {s}")));
            }
        }
        Err(Error::Numerical(format!("flow exceeded {MAX_STEPS} steps before reaching parameter {s}")))
    }
}

/// `e^{sV}(x)`.
pub fn flow_exp(v: &VectorField, s: f64, x: &[f64], ode_tol: f64) -> Result<Vec<f64>> {
    Flow::new(v).run(s, x, ode_tol)
}

/// `e^{V₁b₁} ∘ ⋯ ∘ e^{V_d b_d}(x₀)`: the last flow is applied first.
/// Commutativity of the fields is the caller's responsibility.
pub fn solve_commutative(spec: &SdeSpec, driver: &[f64], ode_tol: f64) -> Result<Vec<f64>> {
    if driver.len() != spec.driver_dimension() {
        return Err(domain(format!(
            "driver has {} coordinates, equation has {} fields",
            driver.len(),
            spec.driver_dimension()
        )));
    }
    let flows: Vec<Flow> = spec.fields.iter().map(Flow::new).collect();
    let mut ws = Workspace::default();
    commutative_with(&flows, &spec.initial, driver, ode_tol, &mut ws)
}

pub(crate) fn commutative_with(
    flows: &[Flow],
    x0: &[f64],
    driver: &[f64],
    tol: f64,
    ws: &mut Workspace,
) -> Result<Vec<f64>> {
    let mut x = x0.to_vec();
    for (f, &b) in flows.iter().zip(driver).rev() {
        x = f.run_ws(b, &x, tol, ws)?;
    }
    Ok(x)
}
