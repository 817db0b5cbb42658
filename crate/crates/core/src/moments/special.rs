//! Euler beta function by two independent routes.

use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Result};
use crate::numeric::integrate;

fn check(a: f64, b: f64) -> Result<()> {
    if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("beta arguments must be positive, got ({a}, {b})")))
    }
}

/// `ln β(a, b) = ln Γ(a) + ln Γ(b) − ln Γ(a + b)`.
pub fn ln_beta(a: f64, b: f64) -> Result<f64> {
    check(a, b)?;
    Ok(ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b))
}

/// `β(a, b)` through the log-gamma identity.
pub fn beta_fn(a: f64, b: f64) -> Result<f64> {
    Ok(ln_beta(a, b)?.exp())
}

/// `β(a, b) = ∫_0^1 x^{a−1}(1−x)^{b−1} dx` by adaptive quadrature.
///
/// Each half of the interval is mapped by `u = x^a` (resp. `u = (1−x)^b`),
/// which removes the endpoint singularity.
pub fn beta_quadrature(a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    check(a, b)?;
    let half = |p: f64, q: f64| -> Result<f64> {
        // (1/p) ∫_0^{2^{-p}} (1 − u^{1/p})^{q−1} du
        let upper = 0.5f64.powf(p);
        let scale = 1.0 / p;
        let guess = upper * scale;
        let q = integrate(
            |u: f64| (1.0 - u.powf(1.0 / p)).powf(q - 1.0),
            0.0,
            upper,
            rel_tol * guess / scale,
            4000,
        )?;
        Ok(q.value * scale)
    };
    Ok(half(a, b)? + half(b, a)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert!((beta_fn(1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let pi8 = std::f64::consts::PI / 8.0;
        assert!((beta_fn(1.5, 1.5).unwrap() - pi8).abs() / pi8 < 1e-13);
        assert!((beta_quadrature(1.5, 1.5, 1e-14).unwrap() - pi8).abs() / pi8 < 1e-12);
        assert!((beta_fn(2.0, 3.0).unwrap() - 1.0 / 12.0).abs() < 1e-15);
        assert!(beta_fn(0.0, 1.0).is_err());
        assert!(beta_fn(1.0, -2.0).is_err());
    }

    #[test]
    fn routes_agree() {
        for &(a, b) in &[(0.5, 0.5), (0.6, 0.6), (1.2, 1.2), (1.8, 1.8), (0.7, 2.3), (3.0, 0.55)] {
            let g = beta_fn(a, b).unwrap();
            let q = beta_quadrature(a, b, 1e-14).unwrap();
            assert!((g - q).abs() / g < 1e-12, "({a},{b}): {g} vs {q}");
        }
    }

    #[test]
    fn pascal_recurrence() {
        use proptest::prelude::*;
        proptest!(|(a in 0.05f64..5.0, b in 0.05f64..5.0)| {
            let lhs = beta_fn(a + 1.0, b).unwrap() + beta_fn(a, b + 1.0).unwrap();
            let rhs = beta_fn(a, b).unwrap();
            prop_assert!((lhs - rhs).abs() / rhs < 1e-12);
        });
    }
}
