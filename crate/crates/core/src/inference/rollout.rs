//! Autoregressive rollout, flip averaging and downsampled forecasting.

use serde::{Deserialize, Serialize};

use super::seasonality::detect_seasonality;
use super::InferenceConfig;
use crate::error::{Error, Result};
use crate::model::Model;

/// Anything that maps a raw history to the next raw patch.
pub trait PatchForecaster: Sync {
    fn patch_len(&self) -> usize;
    fn predict_patch(&self, history: &[f64]) -> Result<Vec<f64>>;
}

impl PatchForecaster for Model {
    fn patch_len(&self) -> usize {
        Model::patch_len(self)
    }

    fn predict_patch(&self, history: &[f64]) -> Result<Vec<f64>> {
        Model::predict_patch(self, history)
    }
}

/// Repeats the last season of the visible window. With `period: None` the
/// season is the dominant spectral period of the window (rounded); a window
/// without a usable season repeats its last value.
#[derive(Clone, Debug, PartialEq)]
pub struct SeasonalNaive {
    pub period: Option<usize>,
    /// Points visible to the predictor.
    pub context: usize,
    pub patch: usize,
}

impl SeasonalNaive {
    fn season(&self, window: &[f64]) -> usize {
        let s = match self.period {
            Some(s) => s,
            None => detect_seasonality(window, window.len(), &InferenceConfig::default())
                .ok()
                .filter(|r| r.significant)
                .map_or(1, |r| r.period.round() as usize),
        };
        if s == 0 || s > window.len() {
            1
        } else {
            s
        }
    }
}

impl PatchForecaster for SeasonalNaive {
    fn patch_len(&self) -> usize {
        self.patch
    }

    fn predict_patch(&self, history: &[f64]) -> Result<Vec<f64>> {
        if history.is_empty() {
            return Err(Error::InvalidInput("empty history".into()));
        }
        let window = &history[history.len().saturating_sub(self.context)..];
        let s = self.season(window);
        let base = window.len() - s;
        Ok((0..self.patch).map(|j| window[base + j % s]).collect())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipMode {
    #[default]
    None,
    Once,
    Every,
}

impl FlipMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(FlipMode::None),
            "once" => Ok(FlipMode::Once),
            "every" => Ok(FlipMode::Every),
            _ => Err(Error::InvalidArgument(format!("unknown flip mode {s:?} (none, once, every)"))),
        }
    }
}

/// `ceil(T / p)` forward passes, each patch appended to the history.
pub fn rollout<F: PatchForecaster + ?Sized>(f: &F, history: &[f64], horizon: usize) -> Result<Vec<f64>> {
    let mut hist = history.to_vec();
    let start = hist.len();
    while hist.len() - start < horizon {
        let patch = f.predict_patch(&hist)?;
        if patch.is_empty() {
            return Err(Error::InvalidArgument("forecaster returned an empty patch".into()));
        }
        hist.extend(patch);
    }
    hist.truncate(start + horizon);
    Ok(hist.split_off(start))
}

fn negate(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| -v).collect()
}

/// Rollout averaged with the negated rollout of the negated history:
/// `(f(x) - f(-x)) / 2`. `Once` averages two complete rollouts; `Every`
/// averages after each patch and feeds the average back to both branches.
pub fn flip_forecast<F: PatchForecaster + ?Sized>(
    f: &F,
    history: &[f64],
    horizon: usize,
    mode: FlipMode,
) -> Result<Vec<f64>> {
    match mode {
        FlipMode::None => rollout(f, history, horizon),
        FlipMode::Once => {
            let neg = negate(history);
            let (a, b) = rayon::join(|| rollout(f, history, horizon), || rollout(f, &neg, horizon));
            Ok(a?.iter().zip(b?).map(|(x, y)| (x - y) / 2.0).collect())
        }
        FlipMode::Every => {
            let mut pos = history.to_vec();
            let mut neg = negate(history);
            let mut out = Vec::with_capacity(horizon);
            while out.len() < horizon {
                let (a, b) = rayon::join(|| f.predict_patch(&pos), || f.predict_patch(&neg));
                let (a, b) = (a?, b?);
                if a.is_empty() || a.len() != b.len() {
                    return Err(Error::InvalidArgument("forecaster returned inconsistent patches".into()));
                }
                let avg: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - y) / 2.0).collect();
                pos.extend(&avg);
                neg.extend(avg.iter().map(|v| -v));
                out.extend(avg);
            }
            out.truncate(horizon);
            Ok(out)
        }
    }
}

/// Forecasts on the history strided by `k` (anchored at the last point),
/// then linearly interpolates back to `T` points. Strided forecast `j`
/// lands on offset `j k` after the last observation.
pub fn downsampled_forecast<F: PatchForecaster + ?Sized>(
    f: &F,
    history: &[f64],
    horizon: usize,
    k: usize,
    mode: FlipMode,
) -> Result<Vec<f64>> {
    if k <= 1 {
        return flip_forecast(f, history, horizon, mode);
    }
    let n = history.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty history".into()));
    }
    let strided: Vec<f64> = history[(n - 1) % k..].iter().step_by(k).copied().collect();
    let steps = horizon.div_ceil(k);
    let coarse = flip_forecast(f, &strided, steps, mode)?;
    let mut nodes = Vec::with_capacity(steps + 1);
    nodes.push(*strided.last().expect("non-empty"));
    nodes.extend(coarse);
    Ok(upsample(&nodes, k, horizon))
}

/// Values at offsets `1..=horizon` of the piecewise-linear curve through
/// `nodes[j]` at offset `j k`.
pub fn upsample(nodes: &[f64], k: usize, horizon: usize) -> Vec<f64> {
    (1..=horizon)
        .map(|tau| {
            let (j, r) = (tau / k, tau % k);
            if r == 0 {
                nodes[j]
            } else {
                let w = r as f64 / k as f64;
                nodes[j] + w * (nodes[j + 1] - nodes[j])
            }
        })
        .collect()
}
