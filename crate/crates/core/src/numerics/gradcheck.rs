//! Central finite-difference gradient verification.

/// Step used for the central differences.
pub const FD_STEP: f64 = 1e-5;

/// Numerical gradient of `f` at `theta` by central differences.
pub fn numeric_grad(f: impl Fn(&[f64]) -> f64, theta: &[f64], step: f64) -> Vec<f64> {
    let mut work = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            let orig = work[i];
            work[i] = orig + step;
            let plus = f(&work);
            work[i] = orig - step;
            let minus = f(&work);
            work[i] = orig;
            (plus - minus) / (2.0 * step)
        })
        .collect()
}

/// Maximum over coordinates of `|analytic - numeric| / max(1, |numeric|)`.
pub fn grad_check(f: impl Fn(&[f64]) -> f64, theta: &[f64], analytic: &[f64]) -> f64 {
    assert_eq!(theta.len(), analytic.len(), "gradient length mismatch");
    let numeric = numeric_grad(f, theta, FD_STEP);
    max_rel_err(analytic, &numeric)
}

pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / n.abs().max(1.0))
        .fold(0.0, f64::max)
}
