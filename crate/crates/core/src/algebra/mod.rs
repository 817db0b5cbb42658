//! Symbolic smooth functions on `ℝⁿ`, vector fields acting as derivations,
//! and polynomials in the fields.
//!
//! Words act with the first letter outermost:
//! `V_I f = V_{i₁}(V_{i₂}(⋯ V_{i_k} f))`.

mod compile;
mod expr;
mod field;
mod operator;
pub mod parse;

pub use compile::Program;
pub use expr::{Rational, ScalarExpr};
pub use field::{apply_field, apply_word, is_commuting, lie_bracket, VectorField, DEFAULT_NODE_CAP};
pub use operator::{
    apply_operator, apply_operator_with_error, build_gamma, commutative_gamma, operator_expr, GammaEngine,
    OperatorPoly, MAX_OPERATOR_WORDS,
};
pub use parse::{parse_expr, parse_fields, parse_functions};
