//! Periodic trapezoid ("spike") process.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpikeConfig {
    pub baseline: (f64, f64),
    /// Inclusive integer range.
    pub period: (usize, usize),
    pub amplitude: (f64, f64),
    /// Inclusive integer range; the upper end is also capped at the period.
    pub width: (usize, usize),
    pub noise: (f64, f64),
}

impl Default for SpikeConfig {
    fn default() -> Self {
        Self { baseline: (0.0, 1.0), period: (16, 256), amplitude: (0.5, 3.0), width: (4, 64), noise: (0.0, 0.1) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpikeType {
    InvertedU,
    Spikes,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikeParams {
    pub kind: SpikeType,
    pub baseline: f64,
    pub period: usize,
    pub amplitude: f64,
    pub width: usize,
    pub noise: f64,
}

/// `n` evenly spaced values from `a` to `b` inclusive (`[a]` when `n == 1`).
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Rise over `w/4`, plateau over `w/2`, fall over the rest.
pub fn trapezoid(width: usize, amplitude: f64) -> Vec<f64> {
    let up = width / 4;
    let flat = width / 2;
    let down = width - up - flat;
    let mut e = linspace(0.0, amplitude, up);
    e.extend(std::iter::repeat_n(amplitude, flat));
    e.extend(linspace(amplitude, 0.0, down));
    e
}

impl SpikeParams {
    pub fn sample(cfg: &SpikeConfig, rng: &mut impl Rng) -> Self {
        let kind = if rng.random_bool(0.5) { SpikeType::InvertedU } else { SpikeType::Spikes };
        let baseline = uniform(rng, cfg.baseline);
        let period = rng.random_range(cfg.period.0.max(1)..=cfg.period.1.max(cfg.period.0.max(1)));
        let amplitude = uniform(rng, cfg.amplitude);
        let w_hi = cfg.width.1.min(period).max(cfg.width.0.min(period)).max(1);
        let width = rng.random_range(cfg.width.0.min(w_hi).max(1)..=w_hi);
        let noise = uniform(rng, cfg.noise);
        Self { kind, baseline, period, amplitude, width, noise }
    }

    pub fn render(&self, len: usize, rng: &mut impl Rng) -> Vec<f64> {
        let mut x = vec![self.baseline; len];
        let e = trapezoid(self.width, self.amplitude);
        let s = if self.kind == SpikeType::InvertedU { -1.0 } else { 1.0 };
        let mut i = 0;
        while i < len {
            let n = self.width.min(len - i);
            for (xv, ev) in x[i..i + n].iter_mut().zip(&e) {
                *xv += s * ev;
            }
            i += self.period.max(1);
        }
        if self.noise > 0.0 {
            let dist = Normal::new(0.0, self.noise).expect("positive std");
            x.iter_mut().for_each(|v| *v += dist.sample(rng));
        }
        x
    }
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

pub fn spike_process(cfg: &SpikeConfig, len: usize, rng: &mut impl Rng) -> Vec<f64> {
    SpikeParams::sample(cfg, rng).render(len, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn params(kind: SpikeType, period: usize) -> SpikeParams {
        SpikeParams { kind, baseline: 0.5, period, amplitude: 1.0, width: 4, noise: 0.0 }
    }

    #[test]
    fn trapezoid_shape() {
        assert_eq!(trapezoid(4, 1.0), [0.0, 1.0, 1.0, 1.0]);
        assert_eq!(trapezoid(8, 2.0), [0.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 0.0]);
        assert_eq!(trapezoid(12, 3.0), [0.0, 1.5, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 1.5, 0.0]);
    }

    #[test]
    fn periodic_placement() {
        let mut rng = RngStream::new(1).rng();
        let x = params(SpikeType::Spikes, 10).render(25, &mut rng);
        let mut want = vec![0.5; 25];
        for start in [0, 10, 20] {
            for (k, e) in [0.0, 1.0, 1.0, 1.0].iter().enumerate() {
                want[start + k] += e;
            }
        }
        assert_eq!(x, want);
    }

    #[test]
    fn period_beyond_length_places_one_pattern() {
        let mut rng = RngStream::new(2).rng();
        let x = params(SpikeType::Spikes, 21).render(20, &mut rng);
        assert_eq!(&x[..4], &[0.5, 1.5, 1.5, 1.5]);
        assert!(x[4..].iter().all(|&v| v == 0.5));
    }

    #[test]
    fn inverted_u_reaches_baseline_minus_amplitude() {
        let mut rng = RngStream::new(3).rng();
        let x = params(SpikeType::InvertedU, 7).render(30, &mut rng);
        let min = x.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(min, 0.5 - 1.0);
        assert!(x.iter().all(|&v| v <= 0.5));
    }

    #[test]
    fn sampled_widths_fit_period() {
        let mut rng = RngStream::new(4).rng();
        let cfg = SpikeConfig::default();
        for _ in 0..200 {
            let p = SpikeParams::sample(&cfg, &mut rng);
            assert!(p.width <= p.period && p.width >= 4 && p.width <= 64);
            assert!((16..=256).contains(&p.period));
        }
    }
}
