//! Masked mean absolute error.

use crate::error::{invalid_arg, Result};

/// Returns the *sum* of `|pred - target|` over valid entries and its
/// gradient with respect to `pred` (sign, 0 at exact ties and on masked
/// entries). Divide both by the valid count for the mean.
pub fn mae_loss(pred: &[f64], target: &[f64], mask: &[bool]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() || pred.len() != mask.len() {
        return Err(invalid_arg(format!(
            "loss inputs differ in length: {} / {} / {}",
            pred.len(),
            target.len(),
            mask.len()
        )));
    }
    let mut sum = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .zip(mask)
        .map(|((&p, &t), &m)| {
            if !m {
                return 0.0;
            }
            let d = p - t;
            sum += d.abs();
            if d > 0.0 {
                1.0
            } else if d < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
        .collect();
    Ok((sum, grad))
}

/// Mean of `|pred - target|` over valid entries (0 when none are valid).
pub fn masked_mae(pred: &[f64], target: &[f64], mask: &[bool]) -> Result<f64> {
    let n = mask.iter().filter(|&&m| m).count();
    let (sum, _) = mae_loss(pred, target, mask)?;
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}
