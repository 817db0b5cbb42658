use super::compile::Program;
use super::expr::ScalarExpr;
use crate::error::{domain, Error, Result};
use crate::word::Word;

/// Default cap on distinct expression nodes produced by [`apply_word`].
pub const DEFAULT_NODE_CAP: usize = 1_000_000;

/// `V = Σ v_i ∂/∂x_i` on `ℝⁿ`.
#[derive(Debug, Clone)]
pub struct VectorField {
    components: Vec<ScalarExpr>,
}

impl VectorField {
    /// Fails if there are no components or a component uses a variable
    /// beyond `x_n`.
    pub fn new(components: Vec<ScalarExpr>) -> Result<Self> {
        let n = components.len();
        if n == 0 {
            return Err(domain("a vector field needs at least one component"));
        }
        for (i, c) in components.iter().enumerate() {
            let m = c.max_variable();
            if m > n {
                return Err(domain(format!("component {} uses x{m} but the field has dimension {n}", i + 1)));
            }
        }
        Ok(VectorField { components })
    }

    /// The coordinate field `∂/∂x_i` on `ℝⁿ`.
    pub fn coordinate(n: usize, i: usize) -> Result<Self> {
        if i == 0 || i > n {
            return Err(domain(format!("coordinate {i} outside 1..={n}")));
        }
        Self::new((1..=n).map(|k| ScalarExpr::constant(if k == i { 1.0 } else { 0.0 })).collect())
    }

    pub fn zero(n: usize) -> Result<Self> {
        Self::new(vec![ScalarExpr::zero(); n])
    }

    pub fn dimension(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ScalarExpr] {
        &self.components
    }

    /// Evaluates the components at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let p = Program::compile(&self.components);
        let mut out = vec![0.0; self.dimension()];
        p.run(x, &mut Vec::new(), &mut out)?;
        Ok(out)
    }
}

impl std::fmt::Display for VectorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// `(Vf)(x) = Σ v_i(x) ∂f/∂x_i`.
pub fn apply_field(v: &VectorField, f: &ScalarExpr) -> Result<ScalarExpr> {
    let n = v.dimension();
    let m = f.max_variable();
    if m > n {
        return Err(domain(format!("function uses x{m} but the field has dimension {n}")));
    }
    let mut acc = ScalarExpr::zero();
    for (i, vi) in v.components.iter().enumerate() {
        if vi.as_constant() == Some(0.0) {
            continue;
        }
        acc = acc.add(&vi.mul(&f.derivative(i + 1)));
    }
    Ok(acc)
}

/// `V_{i₁}(V_{i₂}(⋯ V_{i_k} f))`: the first letter is applied last
/// (outermost). Fails with a resource error when the result exceeds
/// `node_cap` distinct nodes.
pub fn apply_word(fields: &[VectorField], word: &Word, f: &ScalarExpr, node_cap: usize) -> Result<ScalarExpr> {
    word.check_alphabet(fields.len())?;
    let mut g = f.clone();
    for &l in word.letters().iter().rev() {
        g = apply_field(&fields[l - 1], &g)?;
        check_size(&g, node_cap)?;
    }
    Ok(g)
}

pub(crate) fn check_size(g: &ScalarExpr, node_cap: usize) -> Result<()> {
    let size = g.node_count();
    if size > node_cap {
        return Err(Error::Resource(format!("expression grew to {size} nodes, cap is {node_cap}")));
    }
    Ok(())
}

fn same_dimension(v: &VectorField, w: &VectorField) -> Result<()> {
    if v.dimension() != w.dimension() {
        return Err(domain(format!(
            "fields of dimension {} and {} cannot be combined",
            v.dimension(),
            w.dimension()
        )));
    }
    Ok(())
}

/// `[V, W]_k = Σ_i (v_i ∂w_k/∂x_i − w_i ∂v_k/∂x_i)`.
pub fn lie_bracket(v: &VectorField, w: &VectorField) -> Result<VectorField> {
    same_dimension(v, w)?;
    let comps = (0..v.dimension())
        .map(|k| Ok(apply_field(v, &w.components[k])?.sub(&apply_field(w, &v.components[k])?)))
        .collect::<Result<Vec<_>>>()?;
    VectorField::new(comps)
}

/// True when every pairwise bracket is below `tol` (max norm) at every
/// probe point. A numerical certificate only. Points where a bracket cannot
/// be evaluated count as failures.
pub fn is_commuting(fields: &[VectorField], probes: &[Vec<f64>], tol: f64) -> bool {
    for i in 0..fields.len() {
        for j in i + 1..fields.len() {
            let Ok(b) = lie_bracket(&fields[i], &fields[j]) else {
                return false;
            };
            let p = Program::compile(b.components());
            let mut out = vec![0.0; b.dimension()];
            let mut scratch = Vec::new();
            for x in probes {
                if p.run(x, &mut scratch, &mut out).is_err() || out.iter().any(|v| v.abs() > tol) {
                    return false;
                }
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::parse::{parse_expr, parse_fields};

    fn e(s: &str) -> ScalarExpr {
        parse_expr(s).unwrap()
    }

    #[test]
    fn directional_derivative() {
        let v = VectorField::coordinate(2, 1).unwrap();
        assert_eq!(apply_field(&v, &e("x1^2")).unwrap().eval(&[3.0, 0.0]).unwrap(), 6.0);
        let rot = parse_fields("-x2; x1").unwrap().remove(0);
        let g = apply_field(&rot, &e("x1^2 + x2^2")).unwrap();
        assert_eq!(g.eval(&[0.3, -1.7]).unwrap(), 0.0);
        assert!(apply_field(&VectorField::coordinate(1, 1).unwrap(), &e("x2")).is_err());
    }

    #[test]
    fn word_order_and_bracket() {
        let fs = parse_fields("1; 0\n0; x1").unwrap();
        let f = e("x2");
        let w12 = apply_word(&fs, &Word::from([1, 2]), &f, DEFAULT_NODE_CAP).unwrap();
        let w21 = apply_word(&fs, &Word::from([2, 1]), &f, DEFAULT_NODE_CAP).unwrap();
        assert_eq!(w12.eval(&[0.4, 0.9]).unwrap() - w21.eval(&[0.4, 0.9]).unwrap(), 1.0);
        let b = lie_bracket(&fs[0], &fs[1]).unwrap();
        assert_eq!(b.eval(&[0.4, 0.9]).unwrap(), vec![0.0, 1.0]);
        let probes = vec![vec![0.1, 0.2], vec![-1.0, 3.0]];
        assert!(!is_commuting(&fs, &probes, 1e-12));
        assert!(is_commuting(&fs[..1], &probes, 1e-12));
        let tr = parse_fields("1; 0\n0; 1").unwrap();
        assert!(is_commuting(&tr, &probes, 1e-12));
        assert_eq!(apply_word(&fs, &Word::empty(), &f, 10).unwrap().to_string(), "x2");
    }

    #[test]
    fn node_cap_enforced() {
        let fs = parse_fields("sin(x1*x2); cos(x1 + x2)").unwrap();
        let w = Word::from([1, 1, 1, 1, 1, 1]);
        assert!(matches!(apply_word(&fs, &w, &e("exp(x1)*x2"), 50), Err(Error::Resource(_))));
    }
}
