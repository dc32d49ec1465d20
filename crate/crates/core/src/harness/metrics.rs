//! Point-forecast metrics.

use crate::error::{Error, Result};

fn check_lengths(forecast: &[f64], actual: &[f64]) -> Result<()> {
    if forecast.len() != actual.len() || forecast.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "forecast and actual must be non-empty and equal length ({} vs {})",
            forecast.len(),
            actual.len()
        )));
    }
    Ok(())
}

/// Mean absolute error over the pairs where the actual value is observed.
pub fn mae(forecast: &[f64], actual: &[f64]) -> Result<f64> {
    check_lengths(forecast, actual)?;
    let (sum, n) = forecast
        .iter()
        .zip(actual)
        .filter(|(_, a)| a.is_finite())
        .fold((0.0, 0usize), |(s, n), (f, a)| (s + (f - a).abs(), n + 1));
    if n == 0 {
        return Err(Error::UndefinedMetric("no observed actual values".into()));
    }
    Ok(sum / n as f64)
}

/// In-sample seasonal-naive error `mean |y[t] - y[t - s]|` over the pairs
/// where both points are observed.
pub fn seasonal_naive_scale(insample: &[f64], s: usize) -> Result<f64> {
    if s == 0 || insample.len() <= s {
        return Err(Error::UndefinedMetric(format!("in-sample length {} must exceed season {s}", insample.len())));
    }
    let (sum, n) = insample[s..]
        .iter()
        .zip(insample)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .fold((0.0, 0usize), |(acc, n), (a, b)| (acc + (a - b).abs(), n + 1));
    if n == 0 {
        return Err(Error::UndefinedMetric("no observed in-sample pairs".into()));
    }
    Ok(sum / n as f64)
}

/// MAE scaled by the in-sample seasonal-naive error.
pub fn mase(forecast: &[f64], actual: &[f64], insample: &[f64], s: usize) -> Result<f64> {
    let scale = seasonal_naive_scale(insample, s)?;
    if scale == 0.0 {
        return Err(Error::UndefinedMetric("constant in-sample series (zero seasonal-naive error)".into()));
    }
    Ok(mae(forecast, actual)? / scale)
}
