//! Training-data pipeline: stride-balanced sampling and the augmentation
//! chain downsample, modulate, slice, flip, censor, mixup.

pub mod pipeline;
pub mod sampler;
pub mod stages;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use pipeline::{augment_series, BatchBuilder, RawBatch, Stage};
pub use sampler::{dataset_stride, plan_sampler, series_windows, DatasetPlan, SamplerPlan, WindowRef};
pub use stages::{censor, downsample, envelope, flip_x, flip_y, mixup, quantile, CensorDirection, Modulation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub p_downsample: f64,
    /// Inclusive range of the take-every-k stride.
    pub stride_range: (usize, usize),
    pub p_modulate: f64,
    /// Standard deviation of the envelope levels, drawn around 1.
    pub modulate_std: f64,
    pub p_flip_x: f64,
    pub p_flip_y: f64,
    pub p_censor: f64,
    pub mixup_alpha: f64,
    pub enable_downsample: bool,
    pub enable_modulate: bool,
    pub enable_flip_x: bool,
    pub enable_flip_y: bool,
    pub enable_censor: bool,
    pub enable_mixup: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            p_downsample: 0.3,
            stride_range: (2, 16),
            p_modulate: 0.3,
            modulate_std: 0.5,
            p_flip_x: 0.2,
            p_flip_y: 0.2,
            p_censor: 0.2,
            mixup_alpha: 0.3,
            enable_downsample: true,
            enable_modulate: true,
            enable_flip_x: true,
            enable_flip_y: true,
            enable_censor: true,
            enable_mixup: true,
        }
    }
}

impl AugmentConfig {
    /// Every stage off: windows come out as verbatim corpus slices.
    pub fn disabled() -> Self {
        Self {
            enable_downsample: false,
            enable_modulate: false,
            enable_flip_x: false,
            enable_flip_y: false,
            enable_censor: false,
            enable_mixup: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [self.p_downsample, self.p_modulate, self.p_flip_x, self.p_flip_y, self.p_censor];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("augmentation probabilities must lie in [0, 1]".into()));
        }
        if !(self.mixup_alpha > 0.0) {
            return Err(Error::Config(format!("mixup alpha must be positive, got {}", self.mixup_alpha)));
        }
        let (lo, hi) = self.stride_range;
        if lo < 1 || lo > hi {
            return Err(Error::Config(format!("bad downsample stride range [{lo}, {hi}]")));
        }
        if !(self.modulate_std >= 0.0) {
            return Err(Error::Config("modulate_std must be non-negative".into()));
        }
        Ok(())
    }
}
