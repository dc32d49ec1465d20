//! Min-max normalization and missing-value handling of context windows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value every point of a constant window maps to.
pub const DEGENERATE_LEVEL: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: f64,
    pub max: f64,
}

impl NormStats {
    /// Min and max over the finite entries of `t`.
    pub fn of(t: &[f64]) -> Result<Self> {
        let mut it = t.iter().copied().filter(|v| v.is_finite());
        let first = it.next().ok_or_else(|| Error::InvalidInput("series has no finite values".into()))?;
        let (min, max) = it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Ok(Self { min, max })
    }

    pub fn is_degenerate(&self) -> bool {
        self.max == self.min
    }

    pub fn scale(&self) -> f64 {
        self.max - self.min
    }

    pub fn normalize_value(&self, v: f64) -> f64 {
        if self.is_degenerate() {
            if v.is_nan() {
                v
            } else {
                DEGENERATE_LEVEL
            }
        } else {
            (v - self.min) / self.scale()
        }
    }

    pub fn unnormalize_value(&self, v: f64) -> f64 {
        self.min + v * self.scale()
    }
}

/// Maps `t` into `[0, 1]`; NaNs stay NaN. Constant windows map to 0.5.
pub fn normalize(t: &[f64]) -> Result<(Vec<f64>, NormStats)> {
    let stats = NormStats::of(t)?;
    Ok((t.iter().map(|&v| stats.normalize_value(v)).collect(), stats))
}

pub fn unnormalize(y: &[f64], stats: &NormStats) -> Vec<f64> {
    y.iter().map(|&v| stats.unnormalize_value(v)).collect()
}

/// Fills NaNs in place: interior gaps by linear interpolation between the
/// nearest finite neighbours, leading and trailing gaps by holding the
/// nearest finite value.
pub fn impute(t: &mut [f64]) -> Result<()> {
    let finite: Vec<usize> = (0..t.len()).filter(|&i| t[i].is_finite()).collect();
    let (&first, &last) = match (finite.first(), finite.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::InvalidInput("series has no finite values".into())),
    };
    let lead = t[first];
    t[..first].iter_mut().for_each(|v| *v = lead);
    let tail = t[last];
    t[last + 1..].iter_mut().for_each(|v| *v = tail);
    for pair in finite.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b > a + 1 {
            let (ya, yb) = (t[a], t[b]);
            for i in a + 1..b {
                let w = (i - a) as f64 / (b - a) as f64;
                t[i] = ya + w * (yb - ya);
            }
        }
    }
    Ok(())
}

/// The last `len` points of `t`, imputed, and left-padded by repeating the
/// leftmost value when `t` is shorter than `len`.
pub fn impute_and_pad(t: &[f64], len: usize) -> Result<Vec<f64>> {
    let window = &t[t.len().saturating_sub(len)..];
    let mut filled = window.to_vec();
    impute(&mut filled)?;
    let mut out = vec![filled[0]; len - filled.len()];
    out.extend_from_slice(&filled);
    Ok(out)
}
