//! Individual augmentation transforms.

use rand::Rng;
use rand_distr::{Beta, Distribution, Normal};

use crate::error::{Error, Result};

/// Take-every-`k`: `out[i] = t[i k]`.
pub fn downsample(t: &[f64], k: usize) -> Vec<f64> {
    t.iter().step_by(k.max(1)).copied().collect()
}

/// Piecewise-linear envelope through `(0, y1)`, `(x2, y2)`, `(len-1, y3)`.
pub fn envelope(len: usize, x2: usize, y: [f64; 3]) -> Vec<f64> {
    let last = len.saturating_sub(1);
    (0..len)
        .map(|i| {
            if i <= x2 {
                if x2 == 0 {
                    y[1]
                } else {
                    y[0] + (y[1] - y[0]) * i as f64 / x2 as f64
                }
            } else {
                y[1] + (y[2] - y[1]) * (i - x2) as f64 / (last - x2) as f64
            }
        })
        .collect()
}

/// Parameters of one amplitude modulation draw.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Modulation {
    pub x2: usize,
    pub y: [f64; 3],
}

impl Modulation {
    /// Changepoint uniform on `1..=len-2`, levels `~ N(1, std)`. `None` for
    /// series too short to have an interior point.
    pub fn sample(len: usize, std: f64, rng: &mut impl Rng) -> Option<Self> {
        if len < 3 {
            return None;
        }
        let x2 = rng.random_range(1..=len - 2);
        let d = Normal::new(1.0, std).ok()?;
        Some(Self { x2, y: [d.sample(rng), d.sample(rng), d.sample(rng)] })
    }

    pub fn apply(&self, t: &[f64]) -> Vec<f64> {
        t.iter().zip(envelope(t.len(), self.x2, self.y)).map(|(a, b)| a * b).collect()
    }
}

pub fn flip_y(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = -*v);
}

pub fn flip_x(x: &mut [f64]) {
    x.reverse();
}

/// Quantile of the finite entries with linear interpolation between order
/// statistics (`q = 0` is the minimum, `q = 1` the maximum).
pub fn quantile(x: &[f64], q: f64) -> Result<f64> {
    let mut v: Vec<f64> = x.iter().copied().filter(|a| a.is_finite()).collect();
    if v.is_empty() {
        return Err(Error::InvalidInput("quantile of an empty set".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!("quantile level {q} outside [0, 1]")));
    }
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CensorDirection {
    Top,
    Bottom,
    None,
}

impl CensorDirection {
    pub fn sample(rng: &mut impl Rng) -> Self {
        [CensorDirection::Top, CensorDirection::Bottom, CensorDirection::None][rng.random_range(0..3)]
    }
}

/// Clips at `c`; NaNs pass through.
pub fn censor(x: &mut [f64], c: f64, dir: CensorDirection) {
    for v in x.iter_mut().filter(|v| !v.is_nan()) {
        *v = match dir {
            CensorDirection::Top => v.min(c),
            CensorDirection::Bottom => v.max(c),
            CensorDirection::None => *v,
        };
    }
}

/// `rows[i] <- lambda_i rows[i] + (1 - lambda_i) rows[perm[i]]`, reading
/// only the pre-mixup rows.
pub fn mixup(rows: &[Vec<f64>], lambdas: &[f64], perm: &[usize]) -> Vec<Vec<f64>> {
    rows.iter()
        .zip(lambdas.iter().zip(perm))
        .map(|(r, (&lam, &j))| r.iter().zip(&rows[j]).map(|(a, b)| lam * a + (1.0 - lam) * b).collect())
        .collect()
}

pub fn sample_lambda(alpha: f64, rng: &mut impl Rng) -> Result<f64> {
    let d = Beta::new(alpha, alpha).map_err(|e| Error::Config(format!("mixup alpha {alpha}: {e}")))?;
    Ok(d.sample(rng))
}
