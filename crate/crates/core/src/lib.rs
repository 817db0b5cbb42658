//! Small-time expansions of SDEs driven by fractional Brownian motion.
//!
//! The crate computes the operators `Γ_k` of the expansion
//! `E f(X_t) = Σ_k t^{2kH} (Γ_k f)(x) + o(t^{(2N+1)H})` and cross-checks
//! them against independent routes:
//!
//! * [`fbm`]: exact-covariance fBm sampling on dyadic grids.
//! * [`signature`]: truncated tensor algebra and exact signatures of
//!   piecewise-linear paths.
//! * [`moments`]: expected iterated integrals of fBm (closed forms, Wick
//!   quadrature, exact dyadic interpolation, Monte Carlo).
//! * [`algebra`]: symbolic functions, vector fields and operator polynomials.
//! * [`sde`]: Wong–Zakai and commutative-flow solvers.
//! * [`expansion`]: the expansion itself, its validation, and invariant
//!   measure residuals.

pub mod algebra;
pub mod error;
pub mod expansion;
pub mod fbm;
pub mod moments;
pub mod numeric;
pub mod rng;
pub mod sde;
pub mod signature;
pub mod word;

pub use error::{Error, Result};
pub use fbm::{CovarianceKernel, FbmGrid, Hurst};
pub use word::Word;
