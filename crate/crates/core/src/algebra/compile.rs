use std::collections::HashMap;

use super::expr::{pow_checked, Node, Rational, ScalarExpr};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Var(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Neg(usize),
    PowI(usize, i32),
    Pow(usize, Rational),
    Exp(usize),
    Log(usize),
    Sin(usize),
    Cos(usize),
}

/// Straight-line evaluation program for one or more expressions. Shared
/// subexpressions are evaluated once.
#[derive(Debug, Clone)]
pub struct Program {
    ops: Vec<Op>,
    source: Vec<ScalarExpr>,
    outputs: Vec<usize>,
    arity: usize,
}

impl Program {
    pub fn compile(roots: &[ScalarExpr]) -> Program {
        let mut p = Program { ops: Vec::new(), source: Vec::new(), outputs: Vec::new(), arity: 0 };
        let mut slots = HashMap::new();
        for r in roots {
            let s = p.emit(r, &mut slots);
            p.outputs.push(s);
        }
        p
    }

    fn emit(&mut self, e: &ScalarExpr, slots: &mut HashMap<usize, usize>) -> usize {
        if let Some(&s) = slots.get(&e.id()) {
            return s;
        }
        let op = match e.kind() {
            Node::Const(c) => Op::Const(*c),
            Node::Var(i) => {
                self.arity = self.arity.max(i + 1);
                Op::Var(*i)
            }
            Node::Add(a, b) => Op::Add(self.emit(a, slots), self.emit(b, slots)),
            Node::Sub(a, b) => Op::Sub(self.emit(a, slots), self.emit(b, slots)),
            Node::Mul(a, b) => Op::Mul(self.emit(a, slots), self.emit(b, slots)),
            Node::Div(a, b) => Op::Div(self.emit(a, slots), self.emit(b, slots)),
            Node::Neg(a) => Op::Neg(self.emit(a, slots)),
            Node::Pow(a, r) => {
                let s = self.emit(a, slots);
                match (r.is_integer(), i32::try_from(r.num())) {
                    (true, Ok(n)) if n > 0 => Op::PowI(s, n),
                    _ => Op::Pow(s, *r),
                }
            }
            Node::Exp(a) => Op::Exp(self.emit(a, slots)),
            Node::Log(a) => Op::Log(self.emit(a, slots)),
            Node::Sin(a) => Op::Sin(self.emit(a, slots)),
            Node::Cos(a) => Op::Cos(self.emit(a, slots)),
        };
        self.ops.push(op);
        self.source.push(e.clone());
        let s = self.ops.len() - 1;
        slots.insert(e.id(), s);
        s
    }

    /// Number of variables the program reads.
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn outputs(&self) -> usize {
        self.outputs.len()
    }

    /// Evaluates every output into `out`, using `scratch` as the register
    /// file.
    pub fn run(&self, x: &[f64], scratch: &mut Vec<f64>, out: &mut [f64]) -> Result<()> {
        if x.len() < self.arity {
            return Err(Error::Domain(format!(
                "expression uses x{} but the point has dimension {}",
                self.arity,
                x.len()
            )));
        }
        scratch.clear();
        scratch.reserve(self.ops.len());
        for (k, op) in self.ops.iter().enumerate() {
            let r = |i: usize| scratch[i];
            let v = match *op {
                Op::Const(c) => c,
                Op::Var(i) => x[i],
                Op::Add(a, b) => r(a) + r(b),
                Op::Sub(a, b) => r(a) - r(b),
                Op::Mul(a, b) => r(a) * r(b),
                Op::Div(a, b) => {
                    if r(b) == 0.0 {
                        return Err(self.fail(k, "division by zero"));
                    }
                    r(a) / r(b)
                }
                Op::Neg(a) => -r(a),
                Op::PowI(a, n) => r(a).powi(n),
                Op::Pow(a, q) => match pow_checked(r(a), q) {
                    Some(v) => v,
                    None => return Err(self.fail(k, &format!("power undefined at base {:e}", r(a)))),
                },
                Op::Exp(a) => r(a).exp(),
                Op::Log(a) => {
                    if r(a) <= 0.0 {
                        return Err(self.fail(k, &format!("log of non-positive value {:e}", r(a))));
                    }
                    r(a).ln()
                }
                Op::Sin(a) => r(a).sin(),
                Op::Cos(a) => r(a).cos(),
            };
            if !v.is_finite() {
                return Err(self.fail(k, "non-finite value"));
            }
            scratch.push(v);
        }
        for (o, &s) in out.iter_mut().zip(&self.outputs) {
            *o = scratch[s];
        }
        Ok(())
    }

    /// Single-output convenience.
    pub fn eval1(&self, x: &[f64]) -> Result<f64> {
        let mut out = [0.0];
        self.run(x, &mut Vec::new(), &mut out)?;
        Ok(out[0])
    }

    fn fail(&self, k: usize, what: &str) -> Error {
        Error::Numerical(format!("{what} in subexpression `{}`", self.source[k].to_string_limited(200)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_nodes_emitted_once() {
        let x = ScalarExpr::var(1);
        let s = x.sin();
        let e = s.mul(&s).add(&s);
        let p = Program::compile(&[e.clone(), s.clone()]);
        assert_eq!(p.len(), 4);
        let mut out = [0.0; 2];
        p.run(&[0.3], &mut Vec::new(), &mut out).unwrap();
        let v = 0.3f64.sin();
        assert_eq!(out, [v * v + v, v]);
    }

    #[test]
    fn arity_checked() {
        let p = Program::compile(&[ScalarExpr::var(3)]);
        assert_eq!(p.arity(), 3);
        assert!(p.eval1(&[1.0, 2.0]).is_err());
        assert_eq!(p.eval1(&[1.0, 2.0, 3.0]).unwrap(), 3.0);
    }
}
