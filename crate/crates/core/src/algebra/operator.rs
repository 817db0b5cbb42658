use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::compile::Program;
use super::expr::ScalarExpr;
use super::field::{apply_field, check_size, VectorField, DEFAULT_NODE_CAP};
use crate::error::{domain, Error, Result};
use crate::fbm::Hurst;
use crate::moments::{
    expected_iterated_wick, gamma2_coefficients, interpolation_terms, mc_expected_iterated_many, McConfig,
};
use crate::word::Word;

/// Source of the coefficients `E ∫_{Δ^{2k}[0,1]} dB^I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "engine", rename_all = "snake_case")]
pub enum GammaEngine {
    /// `k ≤ 2` for `H > 1/4`; every `k` at `H = 1/2`.
    ClosedForm,
    /// Nested quadrature, `H > 1/2`, `k ≤ 3`.
    Wick,
    /// Exact moments of the dyadic interpolation, `k ≤ 2`.
    Interpolation { mesh_level: u32 },
    /// Sampled moments, any `k`.
    MonteCarlo(McConfig),
    /// `(1/(k!2^k)) (Σ V_i²)^k`; valid for commuting fields, any `H`.
    Commutative,
}

impl GammaEngine {
    pub fn name(&self) -> &'static str {
        match self {
            GammaEngine::ClosedForm => "closed",
            GammaEngine::Wick => "wick",
            GammaEngine::Interpolation { .. } => "interp",
            GammaEngine::MonteCarlo(_) => "mc",
            GammaEngine::Commutative => "commutative",
        }
    }
}

/// Largest number of words an operator may carry.
pub const MAX_OPERATOR_WORDS: usize = 1 << 16;

/// `Σ_I c_I V_{i₁}⋯V_{i_ℓ}` with coefficients stored per explicit word.
#[derive(Debug, Clone)]
pub struct OperatorPoly {
    terms: BTreeMap<Word, f64>,
    std_errors: BTreeMap<Word, f64>,
    fields: Vec<VectorField>,
}

impl OperatorPoly {
    pub fn new(fields: Vec<VectorField>) -> Result<Self> {
        check_fields(&fields)?;
        Ok(OperatorPoly { terms: BTreeMap::new(), std_errors: BTreeMap::new(), fields })
    }

    /// Adds `c` to the coefficient of `word`.
    pub fn add_term(&mut self, word: Word, c: f64) -> Result<()> {
        word.check_alphabet(self.fields.len())?;
        *self.terms.entry(word).or_insert(0.0) += c;
        Ok(())
    }

    fn set_std_error(&mut self, word: Word, se: f64) {
        self.std_errors.insert(word, se);
    }

    pub fn terms(&self) -> &BTreeMap<Word, f64> {
        &self.terms
    }

    pub fn coefficient(&self, word: &Word) -> f64 {
        self.terms.get(word).copied().unwrap_or(0.0)
    }

    /// Standard error of a sampled coefficient, 0 for exact ones.
    pub fn std_error(&self, word: &Word) -> f64 {
        self.std_errors.get(word).copied().unwrap_or(0.0)
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    /// Longest word with a nonzero coefficient.
    pub fn order(&self) -> usize {
        self.terms.iter().filter(|(_, &c)| c != 0.0).map(|(w, _)| w.len()).max().unwrap_or(0)
    }
}

fn check_fields(fields: &[VectorField]) -> Result<()> {
    let Some(first) = fields.first() else {
        return Err(domain("at least one vector field is required"));
    };
    if fields.iter().any(|f| f.dimension() != first.dimension()) {
        return Err(domain("vector fields have different dimensions"));
    }
    Ok(())
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Words `(i₁,i₁,…,i_k,i_k)` over `d` letters.
fn paired_words(d: usize, k: usize) -> Vec<Word> {
    Word::all(d, k)
        .into_iter()
        .map(|w| Word::new(w.letters().iter().flat_map(|&l| [l, l]).collect()).expect("letters ≥ 1"))
        .collect()
}

fn check_word_count(d: usize, len: usize) -> Result<()> {
    let count = (d as f64).powi(len as i32);
    if count > MAX_OPERATOR_WORDS as f64 {
        return Err(Error::Resource(format!(
            "{d}^{len} words exceed the operator limit {MAX_OPERATOR_WORDS}"
        )));
    }
    Ok(())
}

/// `(1/(k!2^k)) (Σ_i V_i²)^k` expanded into words. Commutativity of the
/// fields is the caller's responsibility.
pub fn commutative_gamma(k: usize, fields: &[VectorField]) -> Result<OperatorPoly> {
    let mut op = OperatorPoly::new(fields.to_vec())?;
    check_word_count(fields.len(), k)?;
    let c = 1.0 / (factorial(k) * 2f64.powi(k as i32));
    for w in paired_words(fields.len(), k) {
        op.add_term(w, c)?;
    }
    Ok(op)
}

/// Letters relabelled by first occurrence: words with the same equality
/// pattern have the same expected iterated integral.
fn pattern(w: &Word) -> Vec<usize> {
    let mut seen: Vec<usize> = Vec::new();
    w.letters()
        .iter()
        .map(|l| match seen.iter().position(|s| s == l) {
            Some(p) => p,
            None => {
                seen.push(*l);
                seen.len() - 1
            }
        })
        .collect()
}

/// True when some letter occurs an odd number of times; the expectation
/// then vanishes by the symmetry `B^i ↦ −B^i`.
fn has_odd_letter(w: &Word) -> bool {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in w.letters() {
        *counts.entry(l).or_default() += 1;
    }
    counts.values().any(|c| c % 2 == 1)
}

fn capability(k: usize, hurst: Hurst, engine: &GammaEngine, valid: &str) -> Error {
    Error::Capability(format!(
        "the {} engine cannot build Γ_{k} at H = {}; valid engines here: {valid}",
        engine.name(),
        hurst.value()
    ))
}

fn valid_engines(k: usize, hurst: Hurst) -> String {
    let h = hurst.value();
    let mut v = Vec::new();
    if k <= 1 || h == 0.5 || (k == 2 && hurst.has_analytic_gamma2()) {
        v.push("closed");
    }
    if h > 0.5 && k <= 3 {
        v.push("wick");
    }
    if k <= 1 || (k == 2 && hurst.has_analytic_gamma2()) {
        v.push("interp");
    }
    v.push("mc");
    v.push("commutative (commuting fields only)");
    v.join(", ")
}

/// `Γ_k^H = Σ_{|I| = 2k} E(∫_{Δ^{2k}[0,1]} dB^I) V_{i₁}⋯V_{i_{2k}}`.
pub fn build_gamma(k: usize, hurst: Hurst, fields: &[VectorField], engine: GammaEngine) -> Result<OperatorPoly> {
    let mut op = OperatorPoly::new(fields.to_vec())?;
    let d = fields.len();
    let h = hurst.value();
    if k == 0 {
        op.add_term(Word::empty(), 1.0)?;
        return Ok(op);
    }
    check_word_count(d, 2 * k)?;
    let unsupported = || capability(k, hurst, &engine, &valid_engines(k, hurst));
    match engine {
        GammaEngine::Commutative => return commutative_gamma(k, fields),
        GammaEngine::ClosedForm | GammaEngine::Interpolation { .. } if k == 1 => {
            for w in paired_words(d, 1) {
                op.add_term(w, 0.5)?;
            }
        }
        GammaEngine::ClosedForm if h == 0.5 => return commutative_gamma(k, fields),
        GammaEngine::ClosedForm if k == 2 && hurst.has_analytic_gamma2() => {
            let a = gamma2_coefficients(hurst)?;
            for w in Word::all(d, 4) {
                let c = a.word_coefficient(w.letters());
                if c != 0.0 {
                    op.add_term(w, c)?;
                }
            }
        }
        GammaEngine::Interpolation { mesh_level } if k == 2 && hurst.has_analytic_gamma2() => {
            let a = interpolation_terms(hurst, mesh_level)?;
            for w in Word::all(d, 4) {
                let c = a.word_coefficient(w.letters());
                if c != 0.0 {
                    op.add_term(w, c)?;
                }
            }
        }
        GammaEngine::Wick if h > 0.5 && k <= 3 => {
            let mut cache: HashMap<Vec<usize>, f64> = HashMap::new();
            for w in Word::all(d, 2 * k) {
                if has_odd_letter(&w) {
                    continue;
                }
                let key = pattern(&w);
                let c = match cache.get(&key) {
                    Some(&c) => c,
                    None => {
                        let c = expected_iterated_wick(hurst, &w)?.value;
                        cache.insert(key, c);
                        c
                    }
                };
                if c != 0.0 {
                    op.add_term(w, c)?;
                }
            }
        }
        GammaEngine::MonteCarlo(cfg) => {
            let words: Vec<Word> = Word::all(d, 2 * k).into_iter().filter(|w| !has_odd_letter(w)).collect();
            let est = mc_expected_iterated_many(hurst, &words, &cfg)?;
            for (w, e) in words.into_iter().zip(est) {
                op.add_term(w.clone(), e.value)?;
                op.set_std_error(w, e.std_error);
            }
        }
        _ => return Err(unsupported()),
    }
    Ok(op)
}

/// `Σ_I c_I V_I f` as one expression. Words sharing a suffix share the
/// applied subexpression.
pub fn operator_expr(op: &OperatorPoly, f: &ScalarExpr, node_cap: usize) -> Result<ScalarExpr> {
    Ok(word_exprs(op, f, node_cap)?.into_iter().fold(ScalarExpr::zero(), |acc, (c, _, e)| acc.add(&e.scale(c))))
}

fn word_exprs(op: &OperatorPoly, f: &ScalarExpr, node_cap: usize) -> Result<Vec<(f64, f64, ScalarExpr)>> {
    let n = op.fields.first().map(VectorField::dimension).unwrap_or(0);
    if f.max_variable() > n {
        return Err(domain(format!("function uses x{} but the fields have dimension {n}", f.max_variable())));
    }
    let mut cache: HashMap<Vec<usize>, ScalarExpr> = HashMap::new();
    cache.insert(Vec::new(), f.clone());
    let mut out = Vec::new();
    for (w, &c) in &op.terms {
        if c == 0.0 {
            continue;
        }
        let l = w.letters();
        let mut start = l.len();
        while start > 0 && cache.contains_key(&l[start - 1..]) {
            start -= 1;
        }
        for s in (0..start).rev() {
            let inner = cache[&l[s + 1..]].clone();
            let g = apply_field(&op.fields[l[s] - 1], &inner)?;
            check_size(&g, node_cap)?;
            cache.insert(l[s..].to_vec(), g);
        }
        out.push((c, op.std_error(w), cache[l].clone()));
    }
    Ok(out)
}

/// `(op f)(x)` together with the standard error propagated from sampled
/// coefficients, `sqrt(Σ_I se_I² (V_I f)(x)²)`.
pub fn apply_operator_with_error(op: &OperatorPoly, f: &ScalarExpr, x: &[f64]) -> Result<(f64, f64)> {
    let terms = word_exprs(op, f, DEFAULT_NODE_CAP)?;
    let exprs: Vec<ScalarExpr> = terms.iter().map(|t| t.2.clone()).collect();
    let p = Program::compile(&exprs);
    let mut vals = vec![0.0; exprs.len()];
    p.run(x, &mut Vec::new(), &mut vals)?;
    let mut value = crate::numeric::CompensatedSum::default();
    let mut var = 0.0;
    for ((c, se, _), v) in terms.iter().zip(&vals) {
        value.add(c * v);
        var += (se * v).powi(2);
    }
    Ok((value.value(), var.sqrt()))
}

/// `(op f)(x) = Σ_I c_I (V_I f)(x)`.
pub fn apply_operator(op: &OperatorPoly, f: &ScalarExpr, x: &[f64]) -> Result<f64> {
    Ok(apply_operator_with_error(op, f, x)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::parse::{parse_expr, parse_fields};

    fn h(v: f64) -> Hurst {
        Hurst::new(v).unwrap()
    }

    #[test]
    fn first_order_is_half_sum_of_squares() {
        let fs = parse_fields("1; 0\n0; x1").unwrap();
        let op = build_gamma(1, h(0.3), &fs, GammaEngine::ClosedForm).unwrap();
        assert_eq!(op.terms().len(), 2);
        assert_eq!(op.coefficient(&Word::from([2, 2])), 0.5);
        let d1 = parse_fields("1").unwrap();
        let g1 = build_gamma(1, h(0.7), &d1, GammaEngine::ClosedForm).unwrap();
        assert_eq!(apply_operator(&g1, &parse_expr("x1^2").unwrap(), &[0.3]).unwrap(), 1.0);
    }

    #[test]
    fn second_order_at_half_and_three_quarters() {
        let fs = parse_fields("1; 0\n0; 1").unwrap();
        let op = build_gamma(2, h(0.5), &fs, GammaEngine::ClosedForm).unwrap();
        assert_eq!(op.terms().len(), 4);
        assert_eq!(op.coefficient(&Word::from([1, 1, 2, 2])), 0.125);
        assert_eq!(op.coefficient(&Word::from([1, 2, 1, 2])), 0.0);
        let d1 = parse_fields("1").unwrap();
        let g2 = build_gamma(2, h(0.5), &d1, GammaEngine::ClosedForm).unwrap();
        assert_eq!(apply_operator(&g2, &parse_expr("x^4").unwrap(), &[0.0]).unwrap(), 3.0);
        let op = build_gamma(2, h(0.75), &fs, GammaEngine::ClosedForm).unwrap();
        let b = crate::moments::beta_fn(1.5, 1.5).unwrap();
        assert!((op.coefficient(&Word::from([1, 1, 2, 2])) - 0.1875 * b).abs() < 1e-15);
        assert!((op.coefficient(&Word::from([1, 2, 1, 2])) - (3.0 / 32.0 - 0.1875 * b)).abs() < 1e-15);
        assert!((op.coefficient(&Word::from([1, 2, 2, 1])) - 1.0 / 32.0).abs() < 1e-15);
        assert!((op.coefficient(&Word::from([1, 1, 1, 1])) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn capability_errors_name_engines() {
        let fs = parse_fields("1; 0\n0; x1").unwrap();
        let e = build_gamma(3, h(0.3), &fs, GammaEngine::ClosedForm).unwrap_err();
        let Error::Capability(m) = e else { panic!("{e:?}") };
        assert!(m.contains("mc"), "{m}");
        assert!(matches!(build_gamma(2, h(0.2), &fs, GammaEngine::ClosedForm), Err(Error::Capability(_))));
        assert!(matches!(build_gamma(2, h(0.4), &fs, GammaEngine::Wick), Err(Error::Capability(_))));
        assert!(build_gamma(3, h(0.5), &fs, GammaEngine::ClosedForm).is_ok());
    }

    #[test]
    fn commutative_third_order() {
        let d1 = parse_fields("1").unwrap();
        let g3 = commutative_gamma(3, &d1).unwrap();
        assert_eq!(apply_operator(&g3, &parse_expr("x^6").unwrap(), &[0.4]).unwrap(), 15.0);
        let g = build_gamma(0, h(0.4), &d1, GammaEngine::ClosedForm).unwrap();
        assert_eq!(apply_operator(&g, &parse_expr("x^6").unwrap(), &[2.0]).unwrap(), 64.0);
    }

    #[test]
    fn wick_engine_matches_closed_form() {
        let fs = parse_fields("1; 0\n0; x1").unwrap();
        let w = build_gamma(2, h(0.75), &fs, GammaEngine::Wick).unwrap();
        let c = build_gamma(2, h(0.75), &fs, GammaEngine::ClosedForm).unwrap();
        for (word, v) in c.terms() {
            assert!((w.coefficient(word) - v).abs() < 1e-8, "{word}");
        }
    }

    #[test]
    fn operator_linear_and_kills_constants() {
        let fs = parse_fields("sin(x2); x1*x2\nx2^2; 1").unwrap();
        let op = build_gamma(2, h(0.6), &fs, GammaEngine::ClosedForm).unwrap();
        assert_eq!(apply_operator(&op, &ScalarExpr::constant(3.0), &[0.2, 0.4]).unwrap(), 0.0);
        let f = parse_expr("exp(x1)*x2").unwrap();
        let g = parse_expr("cos(x1 + x2)").unwrap();
        let x = [0.3, -0.6];
        let lhs = apply_operator(&op, &f.add(&g), &x).unwrap();
        let rhs = apply_operator(&op, &f, &x).unwrap() + apply_operator(&op, &g, &x).unwrap();
        assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0));
    }
}
