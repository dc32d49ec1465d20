//! AdamW, the warmup-stable-decay schedule and gradient clipping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.1 }
    }
}

/// Moments aligned with the flattened parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl OptimState {
    pub fn new(n: usize) -> Self {
        Self { step: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }
}

/// One AdamW update. Decay is decoupled and only touches entries whose
/// `decay` flag is set.
pub fn adamw_step(
    params: &mut [f64],
    grads: &[f64],
    decay: &[bool],
    state: &mut OptimState,
    lr: f64,
    cfg: &AdamWConfig,
) -> Result<()> {
    let n = params.len();
    if grads.len() != n || decay.len() != n || state.m.len() != n || state.v.len() != n {
        return Err(Error::InvalidArgument("optimizer buffers do not match the parameters".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..n {
        if decay[i] {
            params[i] -= lr * cfg.weight_decay * params[i];
        }
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub max_lr: f64,
    pub warmup_frac: f64,
    pub decay_frac: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { max_lr: 5e-4, warmup_frac: 0.1, decay_frac: 0.1 }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_lr >= 0.0
            && (0.0..=1.0).contains(&self.warmup_frac)
            && (0.0..=1.0).contains(&self.decay_frac)
            && self.warmup_frac + self.decay_frac <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("schedule needs max_lr >= 0 and warmup + decay fractions within [0, 1]".into()))
        }
    }
}

/// Learning rate for 0-based `step` of `total`: linear from 0 over the
/// warmup steps, flat at `max_lr`, then linear down to exactly 0 at the
/// last step.
pub fn wsd_lr(step: u64, total: u64, cfg: &ScheduleConfig) -> f64 {
    if total == 0 || step >= total {
        return 0.0;
    }
    let warm = (cfg.warmup_frac * total as f64).round() as u64;
    let decay = (cfg.decay_frac * total as f64).round() as u64;
    let decay_start = total - decay.min(total);
    if step < warm {
        cfg.max_lr * step as f64 / warm as f64
    } else if step >= decay_start && decay > 0 {
        let last = total - 1;
        if last == decay_start {
            0.0
        } else {
            cfg.max_lr * (last - step) as f64 / (last - decay_start) as f64
        }
    } else {
        cfg.max_lr
    }
}

/// Rescales `g` so its L2 norm is at most `max_norm`; returns the norm
/// before clipping.
pub fn clip_global_norm(g: &mut [f64], max_norm: f64) -> f64 {
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        g.iter_mut().for_each(|x| *x *= s);
    }
    norm
}
