//! Inference strategies around a patch forecaster: rollout, flip averaging,
//! seasonality detection and downsampled forecasting.

pub mod rollout;
pub mod seasonality;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use rollout::{downsampled_forecast, flip_forecast, rollout, upsample, FlipMode, PatchForecaster, SeasonalNaive};
pub use seasonality::{dataset_stride_average, detect_seasonality, stride_for, SeasonalityReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    pub flip: FlipMode,
    pub downsample: bool,
    /// Dominant peak must exceed the runner-up by this factor.
    pub alpha: f64,
    /// Dominant peak must exceed the spectrum mean by this many deviations.
    pub beta: f64,
    /// Full periods the downsampled context should hold.
    pub min_periods: usize,
    /// Downsampling is skipped when `T < short_horizon_ratio * S`.
    pub short_horizon_ratio: f64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self { flip: FlipMode::None, downsample: false, alpha: 2.0, beta: 4.0, min_periods: 8, short_horizon_ratio: 0.5 }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0) || !(self.beta > 0.0) || self.min_periods == 0 {
            return Err(Error::Config(format!(
                "need alpha > 1, beta > 0, min_periods >= 1 (got {}, {}, {})",
                self.alpha, self.beta, self.min_periods
            )));
        }
        if !(self.short_horizon_ratio >= 0.0) {
            return Err(Error::Config("short_horizon_ratio must be non-negative".into()));
        }
        Ok(())
    }
}

/// Result of [`forecast`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub values: Vec<f64>,
    pub seasonality: Option<SeasonalityReport>,
    /// Stride actually used (1 = no downsampling).
    pub stride: usize,
}

/// Stride to forecast with, given a detection report: 1 unless the report
/// is significant and the horizon is not short against the period.
pub fn effective_stride(report: &SeasonalityReport, horizon: usize, cfg: &InferenceConfig) -> usize {
    if report.significant && (horizon as f64) >= cfg.short_horizon_ratio * report.period {
        report.stride
    } else {
        1
    }
}

/// Full inference path. With downsampling on, the history is analysed with
/// [`detect_seasonality`] unless `stride_override` supplies a shared
/// (e.g. per-dataset) stride.
pub fn forecast<F: PatchForecaster + ?Sized>(
    f: &F,
    context_len: usize,
    history: &[f64],
    horizon: usize,
    cfg: &InferenceConfig,
    stride_override: Option<usize>,
) -> Result<Forecast> {
    cfg.validate()?;
    if history.iter().all(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("history has no finite values".into()));
    }
    let (seasonality, stride) = if !cfg.downsample {
        (None, 1)
    } else if let Some(k) = stride_override {
        (None, k.max(1))
    } else {
        match detect_seasonality(history, context_len, cfg) {
            Ok(r) => {
                let k = effective_stride(&r, horizon, cfg);
                (Some(r), k)
            }
            // too short to analyse
            Err(Error::InvalidInput(_)) => (None, 1),
            Err(e) => return Err(e),
        }
    };
    let values = downsampled_forecast(f, history, horizon, stride, cfg.flip)?;
    Ok(Forecast { values, seasonality, stride })
}

/// One series to forecast. `null` history entries are missing values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastRequest {
    pub id: String,
    pub history: Vec<Option<f64>>,
    pub horizon: usize,
    #[serde(default)]
    pub flip: Option<FlipMode>,
    #[serde(default)]
    pub downsample: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastResponse {
    pub id: String,
    pub forecast: Vec<f64>,
    pub seasonality: Option<SeasonalityReport>,
    pub stride: usize,
    pub elapsed_ms: f64,
}

pub fn serve_request<F: PatchForecaster + ?Sized>(
    f: &F,
    context_len: usize,
    req: &ForecastRequest,
    base: &InferenceConfig,
) -> Result<ForecastResponse> {
    let cfg = InferenceConfig {
        flip: req.flip.unwrap_or(base.flip),
        downsample: req.downsample.unwrap_or(base.downsample),
        ..base.clone()
    };
    let history: Vec<f64> = req.history.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
    let start = Instant::now();
    let out = forecast(f, context_len, &history, req.horizon, &cfg, None)?;
    Ok(ForecastResponse {
        id: req.id.clone(),
        forecast: out.values,
        seasonality: out.seasonality,
        stride: out.stride,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}
