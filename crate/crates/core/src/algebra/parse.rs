//! Infix parser for expressions, fields files and function files.
//!
//! ```text
//! expr    := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := atom ('^' unary)?
//! atom    := number | var | 'pi' | func '(' expr ')' | '(' expr ')'
//! func    := exp | log | ln | sin | cos | sqrt
//! var     := x1 | x2 | ... | x | y | z
//! ```
//!
//! Exponents must fold to a rational constant. `x`, `y`, `z` alias
//! `x1`, `x2`, `x3`.

use super::expr::{Rational, ScalarExpr};
use super::field::VectorField;
use crate::error::{Error, Result};

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

fn err(pos: usize, msg: impl Into<String>) -> Error {
    Error::Parse { column: pos + 1, message: msg.into() }
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<ScalarExpr> {
        let mut acc = self.product()?;
        loop {
            if self.eat(b'+') {
                acc = acc.add(&self.product()?);
            } else if self.eat(b'-') {
                acc = acc.sub(&self.product()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn product(&mut self) -> Result<ScalarExpr> {
        let mut acc = self.unary()?;
        loop {
            if self.eat(b'*') {
                acc = acc.mul(&self.unary()?);
            } else if self.eat(b'/') {
                acc = acc.div(&self.unary()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<ScalarExpr> {
        if self.eat(b'-') {
            return Ok(self.unary()?.neg());
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<ScalarExpr> {
        let base = self.atom()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        let at = self.pos;
        let e = self.unary()?;
        let r = e
            .as_constant()
            .and_then(Rational::from_f64)
            .ok_or_else(|| err(at, "exponent must be a rational constant"))?;
        Ok(base.pow(r))
    }

    fn atom(&mut self) -> Result<ScalarExpr> {
        let start = match self.peek() {
            Some(_) => self.pos,
            None => return Err(err(self.pos, "unexpected end of input")),
        };
        let c = self.src[start];
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            if !self.eat(b')') {
                return Err(err(self.pos, "expected ')'"));
            }
            return Ok(e);
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() {
            let mut end = start;
            while end < self.src.len() && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_') {
                end += 1;
            }
            let name = std::str::from_utf8(&self.src[start..end]).expect("ascii");
            self.pos = end;
            return match name {
                "pi" => Ok(ScalarExpr::constant(std::f64::consts::PI)),
                "x" => Ok(ScalarExpr::var(1)),
                "y" => Ok(ScalarExpr::var(2)),
                "z" => Ok(ScalarExpr::var(3)),
                "exp" | "log" | "ln" | "sin" | "cos" | "sqrt" => {
                    if !self.eat(b'(') {
                        return Err(err(self.pos, format!("expected '(' after {name}")));
                    }
                    let a = self.expr()?;
                    if !self.eat(b')') {
                        return Err(err(self.pos, "expected ')'"));
                    }
                    Ok(match name {
                        "exp" => a.exp(),
                        "log" | "ln" => a.ln(),
                        "sin" => a.sin(),
                        "cos" => a.cos(),
                        _ => a.sqrt(),
                    })
                }
                _ => match name.strip_prefix('x').map(str::parse::<usize>) {
                    Some(Ok(i)) if i >= 1 => Ok(ScalarExpr::var(i)),
                    _ => Err(err(start, format!("unknown identifier '{name}'"))),
                },
            };
        }
        Err(err(start, format!("unexpected character '{}'", c as char)))
    }

    fn number(&mut self) -> Result<ScalarExpr> {
        let start = self.pos;
        let s = self.src;
        let mut end = start;
        while end < s.len() && (s[end].is_ascii_digit() || s[end] == b'.') {
            end += 1;
        }
        if end < s.len() && (s[end] == b'e' || s[end] == b'E') {
            let mut k = end + 1;
            if k < s.len() && (s[k] == b'+' || s[k] == b'-') {
                k += 1;
            }
            if k < s.len() && s[k].is_ascii_digit() {
                while k < s.len() && s[k].is_ascii_digit() {
                    k += 1;
                }
                end = k;
            }
        }
        let text = std::str::from_utf8(&s[start..end]).expect("ascii");
        let v: f64 = text.parse().map_err(|_| err(start, format!("bad number '{text}'")))?;
        self.pos = end;
        Ok(ScalarExpr::constant(v))
    }
}

/// Parses one infix expression.
pub fn parse_expr(src: &str) -> Result<ScalarExpr> {
    let mut p = Parser { src: src.as_bytes(), pos: 0 };
    if p.peek().is_none() {
        return Err(err(0, "empty expression"));
    }
    let e = p.expr()?;
    if let Some(c) = p.peek() {
        return Err(err(p.pos, format!("unexpected '{}'", c as char)));
    }
    Ok(e)
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn at_line(line: usize, e: Error) -> Error {
    match e {
        Error::Parse { column, message } => Error::Parse { column, message: format!("line {line}: {message}") },
        other => other,
    }
}

/// Fields file: one vector field per line, components separated by `;`,
/// `#` starts a comment. Every field must have the same number of
/// components `n`, and only `x1..xn` may appear.
pub fn parse_fields(text: &str) -> Result<Vec<VectorField>> {
    let mut fields = Vec::new();
    for (line, l) in content_lines(text) {
        let comps = l
            .split(';')
            .map(|c| parse_expr(c).map_err(|e| at_line(line, e)))
            .collect::<Result<Vec<_>>>()?;
        let f = VectorField::new(comps).map_err(|e| match e {
            Error::Domain(m) => Error::Parse { column: 1, message: format!("line {line}: {m}") },
            other => other,
        })?;
        if let Some(first) = fields.first().map(VectorField::dimension) {
            if f.dimension() != first {
                return Err(Error::Parse {
                    column: 1,
                    message: format!("line {line}: field has {} components, expected {first}", f.dimension()),
                });
            }
        }
        fields.push(f);
    }
    if fields.is_empty() {
        return Err(Error::Parse { column: 1, message: "no vector fields found".into() });
    }
    Ok(fields)
}

/// Function file: one expression per line, `#` comments.
pub fn parse_functions(text: &str) -> Result<Vec<ScalarExpr>> {
    let fs = content_lines(text)
        .map(|(line, l)| parse_expr(l).map_err(|e| at_line(line, e)))
        .collect::<Result<Vec<_>>>()?;
    if fs.is_empty() {
        return Err(Error::Parse { column: 1, message: "no functions found".into() });
    }
    Ok(fs)
}
