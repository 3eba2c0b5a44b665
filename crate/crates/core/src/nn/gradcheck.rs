//! Central finite-difference gradient checking.

use crate::error::{Error, Result};

/// Relative error between an analytic and a numeric derivative, with a
/// `1e-8` floor on the denominator.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares `analytic` against `(f(θ + ε e_i) - f(θ - ε e_i)) / 2ε` for
/// every coordinate and returns the largest [`relative_error`].
///
/// `f` is evaluated twice at `theta` first; differing results mean it is
/// not a deterministic function of `theta` (e.g. unfrozen dropout) and the
/// check is refused.
pub fn grad_check<F>(mut f: F, theta: &[f64], analytic: &[f64], eps: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if theta.len() != analytic.len() {
        return Err(Error::Shape {
            expected: vec![theta.len()],
            actual: vec![analytic.len()],
        });
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step {eps}")));
    }
    let first = f(theta);
    let second = f(theta);
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic { first, second });
    }
    if !first.is_finite() {
        return Err(Error::NonFinite("grad_check objective"));
    }

    let mut probe = theta.to_vec();
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = probe[i];
        probe[i] = orig + eps;
        let plus = f(&probe);
        probe[i] = orig - eps;
        let minus = f(&probe);
        probe[i] = orig;
        let numeric = (plus - minus) / (2.0 * eps);
        worst = worst.max(relative_error(a, numeric));
    }
    Ok(worst)
}
