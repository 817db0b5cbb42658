use std::collections::{HashMap, HashSet};
use std::fmt;
use std::ops;
use std::sync::Arc;

use crate::error::{domain, Result};

/// Exact rational exponent `num/den` with `den > 0` and lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rational {
    num: i64,
    den: i64,
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.abs()
}

impl Rational {
    pub fn new(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(domain("rational with zero denominator"));
        }
        let g = gcd(num, den).max(1);
        let s = den.signum();
        Ok(Rational { num: s * num / g, den: s * den / g })
    }

    pub fn integer(n: i64) -> Self {
        Rational { num: n, den: 1 }
    }

    pub fn num(self) -> i64 {
        self.num
    }

    pub fn den(self) -> i64 {
        self.den
    }

    pub fn is_integer(self) -> bool {
        self.den == 1
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Recovers `p/q` with `q ≤ 10⁶` from a float by continued fractions.
    pub fn from_f64(v: f64) -> Option<Self> {
        if !v.is_finite() || v.abs() > 1e12 {
            return None;
        }
        let (mut h0, mut h1, mut k0, mut k1) = (0i64, 1i64, 1i64, 0i64);
        let mut x = v;
        for _ in 0..40 {
            let a = x.floor();
            let ai = a as i64;
            let h2 = ai.checked_mul(h1)?.checked_add(h0)?;
            let k2 = ai.checked_mul(k1)?.checked_add(k0)?;
            if k2 > 1_000_000 {
                break;
            }
            (h0, h1, k0, k1) = (h1, h2, k1, k2);
            if (h1 as f64 / k1 as f64 - v).abs() <= 4.0 * f64::EPSILON * v.abs() {
                return Rational::new(h1, k1).ok();
            }
            let frac = x - a;
            if frac == 0.0 {
                break;
            }
            x = 1.0 / frac;
        }
        None
    }

    fn minus_one(self) -> Self {
        Rational::new(self.num - self.den, self.den).expect("den > 0")
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

#[derive(Debug)]
pub(crate) enum Node {
    Const(f64),
    /// zero-based variable index
    Var(usize),
    Add(ScalarExpr, ScalarExpr),
    Sub(ScalarExpr, ScalarExpr),
    Mul(ScalarExpr, ScalarExpr),
    Div(ScalarExpr, ScalarExpr),
    Neg(ScalarExpr),
    Pow(ScalarExpr, Rational),
    Exp(ScalarExpr),
    Log(ScalarExpr),
    Sin(ScalarExpr),
    Cos(ScalarExpr),
}

/// Immutable expression DAG over `x1..xn`. Clones share structure.
///
/// Constructors fold constants and prune `0` and `1`; no other
/// simplification is attempted.
#[derive(Debug, Clone)]
pub struct ScalarExpr(pub(crate) Arc<Node>);

impl ScalarExpr {
    fn node(n: Node) -> Self {
        ScalarExpr(Arc::new(n))
    }

    pub fn constant(c: f64) -> Self {
        Self::node(Node::Const(c))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    /// The variable `x_i`, `i ≥ 1`.
    ///
    /// # Panics
    /// If `i == 0`.
    pub fn var(i: usize) -> Self {
        assert!(i >= 1, "variables are numbered from 1");
        Self::node(Node::Var(i - 1))
    }

    pub(crate) fn kind(&self) -> &Node {
        &self.0
    }

    pub(crate) fn id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn as_constant(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    fn is_const(&self, v: f64) -> bool {
        self.as_constant() == Some(v)
    }

    pub fn add(&self, o: &ScalarExpr) -> ScalarExpr {
        match (self.as_constant(), o.as_constant()) {
            (Some(a), Some(b)) => Self::constant(a + b),
            (Some(a), _) if a == 0.0 => o.clone(),
            (_, Some(b)) if b == 0.0 => self.clone(),
            _ => Self::node(Node::Add(self.clone(), o.clone())),
        }
    }

    pub fn sub(&self, o: &ScalarExpr) -> ScalarExpr {
        match (self.as_constant(), o.as_constant()) {
            (Some(a), Some(b)) => Self::constant(a - b),
            (Some(a), _) if a == 0.0 => o.neg(),
            (_, Some(b)) if b == 0.0 => self.clone(),
            _ => Self::node(Node::Sub(self.clone(), o.clone())),
        }
    }

    pub fn mul(&self, o: &ScalarExpr) -> ScalarExpr {
        match (self.as_constant(), o.as_constant()) {
            (Some(a), Some(b)) => Self::constant(a * b),
            (Some(c), _) => o.scale(c),
            (_, Some(c)) => self.scale(c),
            _ => Self::node(Node::Mul(self.clone(), o.clone())),
        }
    }

    /// `c · self` with `c` kept on the left and nested constants merged.
    pub fn scale(&self, c: f64) -> ScalarExpr {
        if c == 0.0 {
            return Self::zero();
        }
        if c == 1.0 {
            return self.clone();
        }
        if c == -1.0 {
            return self.neg();
        }
        match &*self.0 {
            Node::Const(a) => Self::constant(c * a),
            Node::Mul(a, b) => match a.as_constant() {
                Some(k) => b.scale(c * k),
                None => Self::node(Node::Mul(Self::constant(c), self.clone())),
            },
            Node::Neg(a) => a.scale(-c),
            _ => Self::node(Node::Mul(Self::constant(c), self.clone())),
        }
    }

    pub fn div(&self, o: &ScalarExpr) -> ScalarExpr {
        match (self.as_constant(), o.as_constant()) {
            (Some(a), Some(b)) if b != 0.0 => Self::constant(a / b),
            (Some(a), _) if a == 0.0 => Self::zero(),
            (_, Some(b)) if b == 1.0 => self.clone(),
            (_, Some(b)) if b != 0.0 => self.scale(1.0 / b),
            _ => Self::node(Node::Div(self.clone(), o.clone())),
        }
    }

    pub fn neg(&self) -> ScalarExpr {
        match &*self.0 {
            Node::Const(a) => Self::constant(-a),
            Node::Neg(a) => a.clone(),
            _ => Self::node(Node::Neg(self.clone())),
        }
    }

    pub fn pow(&self, r: Rational) -> ScalarExpr {
        if r.num == 0 {
            return Self::one();
        }
        if r == Rational::integer(1) {
            return self.clone();
        }
        if let Some(c) = self.as_constant() {
            if let Some(v) = pow_checked(c, r) {
                return Self::constant(v);
            }
        }
        Self::node(Node::Pow(self.clone(), r))
    }

    pub fn powi(&self, n: i64) -> ScalarExpr {
        self.pow(Rational::integer(n))
    }

    pub fn sqrt(&self) -> ScalarExpr {
        self.pow(Rational { num: 1, den: 2 })
    }

    pub fn exp(&self) -> ScalarExpr {
        match self.as_constant() {
            Some(c) => Self::constant(c.exp()),
            None => Self::node(Node::Exp(self.clone())),
        }
    }

    pub fn ln(&self) -> ScalarExpr {
        match self.as_constant() {
            Some(c) if c > 0.0 => Self::constant(c.ln()),
            _ => Self::node(Node::Log(self.clone())),
        }
    }

    pub fn sin(&self) -> ScalarExpr {
        match self.as_constant() {
            Some(c) => Self::constant(c.sin()),
            None => Self::node(Node::Sin(self.clone())),
        }
    }

    pub fn cos(&self) -> ScalarExpr {
        match self.as_constant() {
            Some(c) => Self::constant(c.cos()),
            None => Self::node(Node::Cos(self.clone())),
        }
    }

    fn children(&self) -> Vec<&ScalarExpr> {
        match &*self.0 {
            Node::Const(_) | Node::Var(_) => vec![],
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => vec![a, b],
            Node::Neg(a) | Node::Pow(a, _) | Node::Exp(a) | Node::Log(a) | Node::Sin(a) | Node::Cos(a) => {
                vec![a]
            }
        }
    }

    /// Number of distinct nodes in the DAG.
    pub fn node_count(&self) -> usize {
        let mut seen = HashSet::new();
        let mut stack = vec![self];
        while let Some(e) = stack.pop() {
            if seen.insert(e.id()) {
                stack.extend(e.children());
            }
        }
        seen.len()
    }

    /// Largest variable index used (1-based), 0 for constants.
    pub fn max_variable(&self) -> usize {
        let mut seen = HashSet::new();
        let mut stack = vec![self];
        let mut m = 0;
        while let Some(e) = stack.pop() {
            if seen.insert(e.id()) {
                if let Node::Var(i) = *e.0 {
                    m = m.max(i + 1);
                }
                stack.extend(e.children());
            }
        }
        m
    }

    /// `∂/∂x_i`, `i ≥ 1`. Shared subexpressions are differentiated once.
    pub fn derivative(&self, i: usize) -> ScalarExpr {
        assert!(i >= 1, "variables are numbered from 1");
        let mut memo = HashMap::new();
        self.diff(i - 1, &mut memo)
    }

    fn diff(&self, i: usize, memo: &mut HashMap<usize, ScalarExpr>) -> ScalarExpr {
        if let Some(d) = memo.get(&self.id()) {
            return d.clone();
        }
        let d = match &*self.0 {
            Node::Const(_) => Self::zero(),
            Node::Var(j) => Self::constant(if *j == i { 1.0 } else { 0.0 }),
            Node::Add(a, b) => a.diff(i, memo).add(&b.diff(i, memo)),
            Node::Sub(a, b) => a.diff(i, memo).sub(&b.diff(i, memo)),
            Node::Mul(a, b) => {
                let (da, db) = (a.diff(i, memo), b.diff(i, memo));
                da.mul(b).add(&a.mul(&db))
            }
            Node::Div(a, b) => {
                let (da, db) = (a.diff(i, memo), b.diff(i, memo));
                if db.is_const(0.0) {
                    da.div(b)
                } else {
                    da.sub(&self.mul(&db)).div(b)
                }
            }
            Node::Neg(a) => a.diff(i, memo).neg(),
            Node::Pow(a, r) => {
                let da = a.diff(i, memo);
                if da.is_const(0.0) {
                    Self::zero()
                } else {
                    a.pow(r.minus_one()).scale(r.value()).mul(&da)
                }
            }
            Node::Exp(a) => self.mul(&a.diff(i, memo)),
            Node::Log(a) => a.diff(i, memo).div(a),
            Node::Sin(a) => a.cos().mul(&a.diff(i, memo)),
            Node::Cos(a) => a.sin().neg().mul(&a.diff(i, memo)),
        };
        memo.insert(self.id(), d.clone());
        d
    }

    /// Evaluates at `x` (length ≥ [`max_variable`](Self::max_variable)).
    /// Singular operations fail with a numerical error naming the offending
    /// subexpression.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        super::compile::Program::compile(std::slice::from_ref(self)).eval1(x)
    }

    /// Infix text, truncated after `limit` characters.
    pub fn to_string_limited(&self, limit: usize) -> String {
        let mut s = String::new();
        write_expr(self, &mut s, 0, limit);
        if s.len() > limit {
            let mut cut = limit;
            while !s.is_char_boundary(cut) {
                cut -= 1;
            }
            s.truncate(cut);
            s.push('…');
        }
        s
    }
}

pub(crate) fn pow_checked(b: f64, r: Rational) -> Option<f64> {
    let v = if r.is_integer() {
        if b == 0.0 && r.num < 0 {
            return None;
        }
        match i32::try_from(r.num) {
            Ok(n) => b.powi(n),
            Err(_) => b.powf(r.value()),
        }
    } else if b < 0.0 {
        if r.den % 2 == 0 {
            return None;
        }
        let m = (-b).powf(r.value());
        if r.num % 2 == 0 {
            m
        } else {
            -m
        }
    } else {
        if b == 0.0 && r.num < 0 {
            return None;
        }
        b.powf(r.value())
    };
    v.is_finite().then_some(v)
}

const DISPLAY_LIMIT: usize = 100_000;

fn prec(e: &ScalarExpr) -> u8 {
    match &*e.0 {
        Node::Add(..) | Node::Sub(..) => 1,
        Node::Mul(..) | Node::Div(..) => 2,
        Node::Neg(_) => 3,
        Node::Pow(..) => 4,
        Node::Const(c) if *c < 0.0 => 3,
        _ => 5,
    }
}

fn write_expr(e: &ScalarExpr, out: &mut String, ctx: u8, limit: usize) {
    use std::fmt::Write;
    if out.len() > limit {
        return;
    }
    let p = prec(e);
    let paren = p < ctx;
    if paren {
        out.push('(');
    }
    match &*e.0 {
        Node::Const(c) => {
            let _ = write!(out, "{c:?}");
        }
        Node::Var(i) => {
            let _ = write!(out, "x{}", i + 1);
        }
        Node::Add(a, b) => {
            write_expr(a, out, 1, limit);
            out.push_str(" + ");
            write_expr(b, out, 2, limit);
        }
        Node::Sub(a, b) => {
            write_expr(a, out, 1, limit);
            out.push_str(" - ");
            write_expr(b, out, 2, limit);
        }
        Node::Mul(a, b) => {
            write_expr(a, out, 2, limit);
            out.push('*');
            write_expr(b, out, 3, limit);
        }
        Node::Div(a, b) => {
            write_expr(a, out, 2, limit);
            out.push('/');
            write_expr(b, out, 3, limit);
        }
        Node::Neg(a) => {
            out.push('-');
            write_expr(a, out, 3, limit);
        }
        Node::Pow(a, r) => {
            write_expr(a, out, 5, limit);
            if r.is_integer() && r.num >= 0 {
                let _ = write!(out, "^{r}");
            } else {
                let _ = write!(out, "^({r})");
            }
        }
        Node::Exp(a) | Node::Log(a) | Node::Sin(a) | Node::Cos(a) => {
            let name = match &*e.0 {
                Node::Exp(_) => "exp",
                Node::Log(_) => "log",
                Node::Sin(_) => "sin",
                _ => "cos",
            };
            out.push_str(name);
            out.push('(');
            write_expr(a, out, 0, limit);
            out.push(')');
        }
    }
    if paren {
        out.push(')');
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_string_limited(DISPLAY_LIMIT))
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident) => {
        impl ops::$tr<&ScalarExpr> for &ScalarExpr {
            type Output = ScalarExpr;
            fn $m(self, o: &ScalarExpr) -> ScalarExpr {
                ScalarExpr::$m(self, o)
            }
        }
        impl ops::$tr for ScalarExpr {
            type Output = ScalarExpr;
            fn $m(self, o: ScalarExpr) -> ScalarExpr {
                ScalarExpr::$m(&self, &o)
            }
        }
        impl ops::$tr<f64> for ScalarExpr {
            type Output = ScalarExpr;
            fn $m(self, o: f64) -> ScalarExpr {
                ScalarExpr::$m(&self, &ScalarExpr::constant(o))
            }
        }
    };
}
binop!(Add, add);
binop!(Sub, sub);
binop!(Mul, mul);
binop!(Div, div);

impl ops::Neg for ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        ScalarExpr::neg(&self)
    }
}

impl From<f64> for ScalarExpr {
    fn from(c: f64) -> Self {
        ScalarExpr::constant(c)
    }
}
