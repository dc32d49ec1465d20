//! Batch assembly: per-item augmentation, mixup, and conversion to model
//! batches.

use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampler::{SamplerPlan, WindowRef};
use super::stages::{self, CensorDirection, Modulation};
use super::AugmentConfig;
use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::model::{impute_and_pad, Batch, NormStats};
use crate::numerics::Tensor2;
use crate::rng::RngStream;

/// Pipeline stages in the order they run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Downsample,
    Modulate,
    Slice,
    FlipY,
    FlipX,
    Censor,
    Mixup,
}

/// Carves an `l + p` window. Long series get a uniform start; shorter ones
/// keep as many real target points as possible (`min(p, len - 1)`) and pad
/// with NaN, which later becomes left padding in the context and masked
/// target entries.
fn slice_window(t: &[f64], l: usize, p: usize, rng: &mut impl Rng) -> Vec<f64> {
    let w = l + p;
    if t.len() >= w {
        let start = rng.random_range(0..=t.len() - w);
        return t[start..start + w].to_vec();
    }
    let p_real = p.min(t.len().saturating_sub(1));
    let ctx_real = t.len() - p_real;
    let mut out = vec![f64::NAN; l - ctx_real];
    out.extend_from_slice(t);
    out.resize(w, f64::NAN);
    out
}

/// Runs the per-item stages on one raw series and returns the `l + p`
/// window together with the stages that fired.
pub fn augment_series(
    series: &[f64],
    cfg: &AugmentConfig,
    rng: &mut impl Rng,
    l: usize,
    p: usize,
) -> (Vec<f64>, Vec<Stage>) {
    let mut trace = Vec::new();
    let mut t = std::borrow::Cow::Borrowed(series);

    if cfg.enable_downsample && rng.random::<f64>() < cfg.p_downsample {
        let k = rng.random_range(cfg.stride_range.0..=cfg.stride_range.1);
        if t.len().div_ceil(k) >= 2 {
            t = stages::downsample(&t, k).into();
            trace.push(Stage::Downsample);
        }
    }
    if cfg.enable_modulate && rng.random::<f64>() < cfg.p_modulate {
        if let Some(m) = Modulation::sample(t.len(), cfg.modulate_std, rng) {
            t = m.apply(&t).into();
            trace.push(Stage::Modulate);
        }
    }
    let mut x = slice_window(&t, l, p, rng);
    trace.push(Stage::Slice);
    if cfg.enable_flip_y && rng.random::<f64>() < cfg.p_flip_y {
        stages::flip_y(&mut x);
        trace.push(Stage::FlipY);
    }
    if cfg.enable_flip_x && rng.random::<f64>() < cfg.p_flip_x {
        stages::flip_x(&mut x);
        trace.push(Stage::FlipX);
    }
    if cfg.enable_censor && rng.random::<f64>() < cfg.p_censor {
        let q = rng.random::<f64>();
        let dir = CensorDirection::sample(rng);
        if let Ok(c) = stages::quantile(&x, q) {
            stages::censor(&mut x, c, dir);
            trace.push(Stage::Censor);
        }
    }
    (x, trace)
}

/// Augmented raw windows before normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct RawBatch {
    pub context_len: usize,
    pub patch: usize,
    /// `context_len + patch` raw values per item; NaN marks padding or a
    /// missing observation.
    pub windows: Vec<Vec<f64>>,
    pub refs: Vec<WindowRef>,
    pub traces: Vec<Vec<Stage>>,
}

impl RawBatch {
    /// Splits each window, normalizes the context with its own min/max and
    /// imputes it; target entries that are NaN are masked.
    pub fn to_batch(&self) -> Result<Batch> {
        let (l, p) = (self.context_len, self.patch);
        let b = self.windows.len();
        let mut context = Tensor2::zeros(b, l);
        let mut target = Tensor2::zeros(b, p);
        let mut mask = vec![false; b * p];
        let mut stats = Vec::with_capacity(b);
        for (i, w) in self.windows.iter().enumerate() {
            let (ctx, tgt) = w.split_at(l);
            let st = match (NormStats::of(ctx), impute_and_pad(ctx, l)) {
                (Ok(st), Ok(filled)) => {
                    for (dst, v) in context.row_mut(i).iter_mut().zip(filled) {
                        *dst = st.normalize_value(v);
                    }
                    for (j, &v) in tgt.iter().enumerate() {
                        target.set(i, j, if v.is_finite() { v } else { 0.0 });
                        mask[i * p + j] = v.is_finite();
                    }
                    st
                }
                // nothing observed in the context: a constant input whose
                // zero scale also zeroes the gradient
                _ => {
                    context.row_mut(i).fill(crate::model::norm::DEGENERATE_LEVEL);
                    NormStats { min: 0.0, max: 0.0 }
                }
            };
            stats.push(st);
        }
        Ok(Batch { context, target, target_mask: mask, stats })
    }
}

/// Produces batches for successive optimizer steps from a fixed corpus.
pub struct BatchBuilder<'a> {
    corpus: &'a [Dataset],
    plan: SamplerPlan,
    cfg: AugmentConfig,
    stream: RngStream,
    batch_size: usize,
    context_len: usize,
    patch: usize,
    epoch_cache: Mutex<Option<(u64, Vec<WindowRef>)>>,
}

impl<'a> BatchBuilder<'a> {
    pub fn new(
        corpus: &'a [Dataset],
        plan: SamplerPlan,
        cfg: AugmentConfig,
        stream: RngStream,
        batch_size: usize,
        context_len: usize,
        patch: usize,
    ) -> Result<Self> {
        cfg.validate()?;
        if plan.datasets.len() != corpus.len()
            || plan.datasets.iter().zip(corpus).any(|(d, c)| d.windows.len() != c.series.len())
        {
            return Err(Error::InvalidArgument("sampler plan does not match the corpus".into()));
        }
        if plan.epoch_len() == 0 {
            return Err(Error::InvalidInput("corpus yields no training windows".into()));
        }
        if batch_size == 0 || context_len == 0 || patch == 0 {
            return Err(Error::InvalidArgument("batch size, context and patch must be positive".into()));
        }
        Ok(Self { corpus, plan, cfg, stream, batch_size, context_len, patch, epoch_cache: Mutex::new(None) })
    }

    pub fn plan(&self) -> &SamplerPlan {
        &self.plan
    }

    fn window_ref(&self, global: u64) -> WindowRef {
        let n = self.plan.epoch_len() as u64;
        let (epoch, pos) = (global / n, (global % n) as usize);
        let mut cache = self.epoch_cache.lock().expect("epoch cache poisoned");
        match cache.as_ref() {
            Some((e, order)) if *e == epoch => order[pos],
            _ => {
                let order = self.plan.epoch_order(self.stream.named("epoch"), epoch);
                let r = order[pos];
                *cache = Some((epoch, order));
                r
            }
        }
    }

    /// Augmented windows of optimizer step `step`. Items are built in
    /// parallel, each from its own stream, then mixed up as one batch.
    pub fn raw_batch(&self, step: u64) -> RawBatch {
        let base = step * self.batch_size as u64;
        let refs: Vec<WindowRef> = (0..self.batch_size as u64).map(|b| self.window_ref(base + b)).collect();
        let items: Vec<(Vec<f64>, Vec<Stage>)> = refs
            .par_iter()
            .enumerate()
            .map(|(b, r)| {
                let series = &self.corpus[r.dataset].series[r.series].values;
                let mut rng = self.stream.named("item").split(step).split(b as u64).rng();
                augment_series(series, &self.cfg, &mut rng, self.context_len, self.patch)
            })
            .collect();
        let (mut windows, mut traces): (Vec<_>, Vec<_>) = items.into_iter().unzip();
        if self.cfg.enable_mixup && windows.len() > 1 {
            let mut rng = self.stream.named("mixup").split(step).rng();
            let mut perm: Vec<usize> = (0..windows.len()).collect();
            perm.shuffle(&mut rng);
            let lambdas: Vec<f64> = (0..windows.len())
                .map(|_| stages::sample_lambda(self.cfg.mixup_alpha, &mut rng).expect("alpha validated"))
                .collect();
            windows = stages::mixup(&windows, &lambdas, &perm);
            traces.iter_mut().for_each(|t| t.push(Stage::Mixup));
        }
        RawBatch { context_len: self.context_len, patch: self.patch, windows, refs, traces }
    }

    pub fn batch(&self, step: u64) -> Result<Batch> {
        self.raw_batch(step).to_batch()
    }
}
