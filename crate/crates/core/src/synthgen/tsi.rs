//! Trend + seasonality + irregularity generator.

use std::f64::consts::PI;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal, StudentT};
use serde::{Deserialize, Serialize};

use super::kernels::PERIODS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendKind {
    Linear,
    Exponential,
    Quadratic,
    PiecewiseLinear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveShape {
    Sine,
    Sawtooth,
    Square,
}

impl WaveShape {
    /// One period over `theta in [0, 2 pi)`, range `[-1, 1]`.
    pub fn eval(self, theta: f64) -> f64 {
        match self {
            WaveShape::Sine => theta.sin(),
            WaveShape::Sawtooth => {
                let frac = (theta / (2.0 * PI)).rem_euclid(1.0);
                2.0 * frac - 1.0
            }
            WaveShape::Square => {
                if theta.sin() >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    /// Student-t with 3 degrees of freedom.
    StudentT,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsiConfig {
    pub p_trend: f64,
    pub p_seas: f64,
    pub p_noise: f64,
    pub p_out: f64,
    pub p_shift: f64,
    pub trends: Vec<TrendKind>,
    pub periods: Vec<f64>,
    pub shapes: Vec<WaveShape>,
    pub noises: Vec<NoiseKind>,
    pub max_components: usize,
    pub amplitude: (f64, f64),
    pub noise_scale: (f64, f64),
}

impl Default for TsiConfig {
    fn default() -> Self {
        Self {
            p_trend: 0.7,
            p_seas: 0.8,
            p_noise: 0.8,
            p_out: 0.1,
            p_shift: 0.1,
            trends: vec![TrendKind::Linear, TrendKind::Exponential, TrendKind::Quadratic, TrendKind::PiecewiseLinear],
            periods: PERIODS.to_vec(),
            shapes: vec![WaveShape::Sine, WaveShape::Sawtooth, WaveShape::Square],
            noises: vec![NoiseKind::Gaussian, NoiseKind::StudentT],
            max_components: 3,
            amplitude: (0.2, 2.0),
            noise_scale: (0.01, 0.3),
        }
    }
}

/// What a TSI draw contained.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TsiInfo {
    pub trend: Option<TrendKind>,
    /// `(period, shape, amplitude, phase)` per seasonal component.
    pub seasonal: Vec<(f64, WaveShape, f64, f64)>,
    pub noise: Option<(NoiseKind, f64)>,
    pub outliers: usize,
    pub shifts: usize,
}

fn trend(kind: TrendKind, len: usize, rng: &mut impl Rng) -> Vec<f64> {
    let denom = (len.max(2) - 1) as f64;
    let tau = |t: usize| t as f64 / denom;
    match kind {
        TrendKind::Linear => {
            let (c, m) = (rng.random_range(-1.0..1.0), rng.random_range(-2.0..2.0));
            (0..len).map(|t| c + m * tau(t)).collect()
        }
        TrendKind::Exponential => {
            let a = rng.random_range(0.1..1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let r = rng.random_range(-3.0..3.0);
            (0..len).map(|t| a * (r * tau(t)).exp()).collect()
        }
        TrendKind::Quadratic => {
            let (a, b, c) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0));
            (0..len).map(|t| a * tau(t).powi(2) + b * tau(t) + c).collect()
        }
        TrendKind::PiecewiseLinear => {
            let pieces = rng.random_range(2..=4usize);
            let mut knots: Vec<f64> = (0..pieces - 1).map(|_| rng.random_range(0.05..0.95)).collect();
            knots.sort_by(f64::total_cmp);
            let slopes: Vec<f64> = (0..pieces).map(|_| rng.random_range(-2.0..2.0)).collect();
            let c = rng.random_range(-1.0..1.0);
            (0..len)
                .map(|t| {
                    let x = tau(t);
                    let mut v = c;
                    let mut prev = 0.0;
                    for (i, &s) in slopes.iter().enumerate() {
                        let end = knots.get(i).copied().unwrap_or(1.0);
                        v += s * (x.min(end) - prev).max(0.0);
                        prev = end;
                        if x <= end {
                            break;
                        }
                    }
                    v
                })
                .collect()
        }
    }
}

fn std_dev(x: &[f64]) -> f64 {
    let n = x.len().max(1) as f64;
    let m = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt()
}

pub fn tsi_process_detailed(cfg: &TsiConfig, len: usize, rng: &mut impl Rng) -> (Vec<f64>, TsiInfo) {
    let mut x = vec![0.0; len];
    let mut info = TsiInfo::default();

    if rng.random::<f64>() < cfg.p_trend && !cfg.trends.is_empty() {
        let kind = *cfg.trends.choose(rng).expect("non-empty");
        for (v, t) in x.iter_mut().zip(trend(kind, len, rng)) {
            *v += t;
        }
        info.trend = Some(kind);
    }

    if rng.random::<f64>() < cfg.p_seas && !cfg.periods.is_empty() && !cfg.shapes.is_empty() {
        let k = rng.random_range(1..=cfg.max_components.max(1)).min(cfg.periods.len());
        let mut periods = cfg.periods.clone();
        periods.shuffle(rng);
        for &p in &periods[..k] {
            let shape = *cfg.shapes.choose(rng).expect("non-empty");
            let amp = rng.random_range(cfg.amplitude.0..=cfg.amplitude.1);
            let phase = rng.random_range(0.0..2.0 * PI);
            for (t, v) in x.iter_mut().enumerate() {
                *v += amp * shape.eval(2.0 * PI * t as f64 / p + phase);
            }
            info.seasonal.push((p, shape, amp, phase));
        }
    }

    if rng.random::<f64>() < cfg.p_noise && !cfg.noises.is_empty() {
        let kind = *cfg.noises.choose(rng).expect("non-empty");
        let sigma = rng.random_range(cfg.noise_scale.0..=cfg.noise_scale.1);
        match kind {
            NoiseKind::Gaussian => {
                let d = Normal::new(0.0, 1.0).expect("unit normal");
                x.iter_mut().for_each(|v| *v += sigma * d.sample(rng));
            }
            NoiseKind::StudentT => {
                let d = StudentT::new(3.0).expect("df > 0");
                x.iter_mut().for_each(|v| *v += sigma * d.sample(rng));
            }
        }
        info.noise = Some((kind, sigma));
    }

    let scale = std_dev(&x).max(0.1);
    if rng.random::<f64>() < cfg.p_out && len > 0 {
        let n = rng.random_range(1..=(len / 100).max(1));
        for _ in 0..n {
            let i = rng.random_range(0..len);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            x[i] += sign * rng.random_range(3.0..6.0) * scale;
        }
        info.outliers = n;
    }
    if rng.random::<f64>() < cfg.p_shift && len > 1 {
        let n = rng.random_range(1..=3usize);
        for _ in 0..n {
            let at = rng.random_range(1..len);
            let step = rng.random_range(-2.0..2.0) * scale;
            x[at..].iter_mut().for_each(|v| *v += step);
        }
        info.shifts = n;
    }
    (x, info)
}

pub fn tsi_process(cfg: &TsiConfig, len: usize, rng: &mut impl Rng) -> Vec<f64> {
    tsi_process_detailed(cfg, len, rng).0
}

/// `offset + amplitude * sin(2 pi t / period + phase)`.
pub fn sinusoid(len: usize, period: f64, amplitude: f64, phase: f64, offset: f64) -> Vec<f64> {
    (0..len).map(|t| offset + amplitude * (2.0 * PI * t as f64 / period + phase).sin()).collect()
}
