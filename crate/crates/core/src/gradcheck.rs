//! Central finite-difference gradient checking.

use crate::error::{Error, Result};

/// Compares an analytic gradient against central differences of `f`.
///
/// Returns the worst per-coordinate error
/// `|analytic - numeric| / max(1, |analytic|, |numeric|)`.
pub fn grad_check<F>(f: F, params: &[f64], analytic: &[f64], eps: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Config(format!(
            "grad_check eps must be > 0, got {eps}"
        )));
    }
    if params.len() != analytic.len() {
        return Err(Error::dim("grad_check", &[params.len()], &[analytic.len()]));
    }
    let numeric = numeric_gradient(f, params, eps)?;
    Ok(max_relative_error(analytic, &numeric))
}

/// Central-difference gradient, one coordinate at a time.
pub fn numeric_gradient<F>(f: F, params: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = probe[i];
        probe[i] = orig + eps;
        let plus = f(&probe);
        probe[i] = orig - eps;
        let minus = f(&probe);
        probe[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric(format!(
                "objective not finite when perturbing coordinate {i}"
            )));
        }
        out.push((plus - minus) / (2.0 * eps));
    }
    Ok(out)
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / 1f64.max(a.abs()).max(n.abs()))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_three() {
        let err = grad_check(|p| p[0] * p[0], &[3.0], &[6.0], 1e-5).unwrap();
        assert!(err <= 1e-9, "{err}");
    }

    #[test]
    fn scaled_gradient_is_flagged() {
        let err = grad_check(|p| p[0] * p[0], &[3.0], &[6.0 * 1.01], 1e-5).unwrap();
        assert!((err - 0.06 / 6.06).abs() < 1e-6, "{err}");
        assert!(err > 1e-4);
    }

    #[test]
    fn non_finite_objective_names_coordinate() {
        let f = |p: &[f64]| if p[1] > 1.0 { f64::NAN } else { p[0] };
        let err = grad_check(f, &[0.0, 1.0], &[1.0, 0.0], 1e-3).unwrap_err();
        assert!(err.to_string().contains("coordinate 1"), "{err}");
    }

    #[test]
    fn rejects_bad_eps() {
        assert!(grad_check(|p| p[0], &[0.0], &[1.0], 0.0).is_err());
    }
}
