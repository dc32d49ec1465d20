//! Spectral seasonality detection and the downsampling stride it implies.

use serde::{Deserialize, Serialize};

use super::InferenceConfig;
use crate::error::{Error, Result};
use crate::model::impute;
use crate::numerics::dft;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeasonalityReport {
    /// Dominant period in samples.
    pub period: f64,
    /// Spectrum bin of the dominant peak.
    pub bin: usize,
    pub p1: f64,
    pub p2: f64,
    pub p_dc: f64,
    pub mean: f64,
    pub std: f64,
    pub single_peak: bool,
    pub above_trend: bool,
    pub above_noise: bool,
    pub significant: bool,
    /// `floor(M S / L)` when significant, otherwise 1.
    pub stride: usize,
}

/// Sub-bin offset of a spectral peak from the complex neighbours
/// (Jacobsen's three-point estimator), clamped to half a bin.
fn jacobsen(prev: num_complex::Complex64, peak: num_complex::Complex64, next: num_complex::Complex64) -> f64 {
    let den = 2.0 * peak - prev - next;
    if den.norm() == 0.0 {
        return 0.0;
    }
    (-((next - prev) / den).re).clamp(-0.5, 0.5)
}

/// Amplitude spectrum analysis of `t` (mean retained). Missing values are
/// interpolated first. `context_len` is the model context `L` used for the
/// stride.
pub fn detect_seasonality(t: &[f64], context_len: usize, cfg: &InferenceConfig) -> Result<SeasonalityReport> {
    cfg.validate()?;
    if t.len() < 8 {
        return Err(Error::InvalidInput(format!("need at least 8 points to detect seasonality, got {}", t.len())));
    }
    if context_len == 0 {
        return Err(Error::InvalidArgument("context length must be positive".into()));
    }
    let mut x = t.to_vec();
    impute(&mut x)?;
    let n = x.len();
    let spec = dft(&x);
    let half = n / 2;
    let amp: Vec<f64> = spec[..=half].iter().map(|z| z.norm()).collect();

    let bin = (1..=half).max_by(|&a, &b| amp[a].total_cmp(&amp[b]).then(b.cmp(&a))).expect("half >= 4");
    let p1 = amp[bin];
    let p2 = (1..=half).filter(|&f| f.abs_diff(bin) > 1).map(|f| amp[f]).fold(0.0, f64::max);
    let p_dc = amp[0];
    let m = half as f64;
    let mean = amp[1..].iter().sum::<f64>() / m;
    let std = (amp[1..].iter().map(|a| (a - mean).powi(2)).sum::<f64>() / m).sqrt();

    // the DC bin is not used as a neighbour so shifting the series leaves
    // the estimate unchanged
    let delta = if bin >= 2 && bin < half { jacobsen(spec[bin - 1], spec[bin], spec[bin + 1]) } else { 0.0 };
    let period = n as f64 / (bin as f64 + delta);

    let single_peak = p1 >= cfg.alpha * p2;
    let above_trend = p1 >= p_dc;
    let above_noise = p1 >= mean + cfg.beta * std;
    let significant = single_peak && above_trend && above_noise;
    let stride = if significant { stride_for(period, context_len, cfg.min_periods) } else { 1 };
    Ok(SeasonalityReport { period, bin, p1, p2, p_dc, mean, std, single_peak, above_trend, above_noise, significant, stride })
}

/// `max(1, floor(M S / L))`.
pub fn stride_for(period: f64, context_len: usize, min_periods: usize) -> usize {
    ((min_periods as f64 * period / context_len as f64).floor() as usize).max(1)
}

/// Shared stride for a group of series: rounded mean over the significant
/// reports, or 1 when none, or fewer than half, are significant.
pub fn dataset_stride_average(reports: &[SeasonalityReport]) -> usize {
    let sig: Vec<usize> = reports.iter().filter(|r| r.significant).map(|r| r.stride).collect();
    if sig.is_empty() || reports.len() - sig.len() > sig.len() {
        return 1;
    }
    ((sig.iter().sum::<usize>() as f64 / sig.len() as f64).round() as usize).max(1)
}
