//! Synthetic corpora: Gaussian processes over composed kernels, periodic
//! trapezoid processes, and trend/seasonality/irregularity series.

pub mod gp;
pub mod kernels;
pub mod spike;
pub mod tsi;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Series, Source};
use crate::error::{Error, Result};
use crate::rng::RngStream;

pub use gp::{cholesky_jittered, covariance, gp_samples, sample_mean, Cholesky};
pub use kernels::{ComposedKernel, KernelOp, KernelSpec, MaternNu, PERIODS};
pub use spike::{spike_process, SpikeConfig, SpikeParams, SpikeType};
pub use tsi::{sinusoid, tsi_process, tsi_process_detailed, TsiConfig, TsiInfo, WaveShape};

/// Longest series the generators produce.
pub const MAX_SYNTH_LEN: usize = 4096;

/// Fraction of the corpus produced by each generator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mix {
    pub kernelsynth: f64,
    pub spike: f64,
    pub tsi: f64,
}

impl Default for Mix {
    fn default() -> Self {
        Self { kernelsynth: 0.6, spike: 0.2, tsi: 0.2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub length: usize,
    pub count: usize,
    pub seed: u64,
    pub mix: Mix,
    pub max_kernels: usize,
    /// Series drawn from each sampled kernel (they share one factorization).
    pub draws_per_kernel: usize,
    pub slope: (f64, f64),
    pub intercept: (f64, f64),
    pub spike: SpikeConfig,
    pub tsi: TsiConfig,
    /// Kernel resampling attempts before giving up on a group.
    pub max_kernel_attempts: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            length: 1024,
            count: 100,
            seed: 0,
            mix: Mix::default(),
            max_kernels: 5,
            draws_per_kernel: 4,
            slope: (-0.01, 0.01),
            intercept: (-0.1, 0.1),
            spike: SpikeConfig::default(),
            tsi: TsiConfig::default(),
            max_kernel_attempts: 20,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let m = self.mix;
        if self.length == 0 || self.length > MAX_SYNTH_LEN {
            return Err(Error::Config(format!("length must be in 1..={MAX_SYNTH_LEN}, got {}", self.length)));
        }
        if [m.kernelsynth, m.spike, m.tsi].iter().any(|&p| !(0.0..=1.0).contains(&p))
            || ((m.kernelsynth + m.spike + m.tsi) - 1.0).abs() > 1e-9
        {
            return Err(Error::Config("mix proportions must be in [0, 1] and sum to 1".into()));
        }
        if self.max_kernels == 0 || self.draws_per_kernel == 0 {
            return Err(Error::Config("max_kernels and draws_per_kernel must be positive".into()));
        }
        Ok(())
    }

    /// Series counts per source: kernelsynth and spike rounded, TSI takes
    /// the remainder.
    pub fn counts(&self) -> (usize, usize, usize) {
        let ks = ((self.count as f64 * self.mix.kernelsynth).round() as usize).min(self.count);
        let sp = ((self.count as f64 * self.mix.spike).round() as usize).min(self.count - ks);
        (ks, sp, self.count - ks - sp)
    }
}

/// One group of GP series sharing a kernel; resamples the kernel when the
/// covariance cannot be factorized.
fn kernelsynth_group(cfg: &SynthConfig, stream: RngStream, draws: usize) -> Result<Vec<Vec<f64>>> {
    for attempt in 0..cfg.max_kernel_attempts.max(1) {
        let mut rng = stream.split(attempt as u64).rng();
        let kernel = ComposedKernel::sample(&mut rng, cfg.length, cfg.max_kernels);
        let mean = sample_mean(&mut rng, cfg.length, cfg.slope, cfg.intercept);
        match gp_samples(&kernel, &mean, draws, &mut rng) {
            Ok(s) if s.iter().flatten().all(|v| v.is_finite()) => return Ok(s),
            Ok(_) | Err(Error::Generation(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Generation("no factorizable kernel found".into()))
}

/// Generates the corpus. Each series (or kernel group) draws from a stream
/// keyed by its index, so the output does not depend on the thread count.
pub fn generate_corpus(cfg: &SynthConfig) -> Result<Vec<Series>> {
    cfg.validate()?;
    let root = RngStream::new(cfg.seed);
    let (n_ks, n_sp, n_tsi) = cfg.counts();
    let groups = n_ks.div_ceil(cfg.draws_per_kernel);
    let ks: Vec<Vec<Vec<f64>>> = (0..groups)
        .into_par_iter()
        .map(|g| {
            let draws = cfg.draws_per_kernel.min(n_ks - g * cfg.draws_per_kernel);
            kernelsynth_group(cfg, root.named("kernelsynth").split(g as u64), draws)
        })
        .collect::<Result<_>>()?;
    let spikes: Vec<Vec<f64>> = (0..n_sp)
        .into_par_iter()
        .map(|i| spike_process(&cfg.spike, cfg.length, &mut root.named("spike").split(i as u64).rng()))
        .collect();
    let tsis: Vec<Vec<f64>> = (0..n_tsi)
        .into_par_iter()
        .map(|i| tsi_process(&cfg.tsi, cfg.length, &mut root.named("tsi").split(i as u64).rng()))
        .collect();

    let mut out = Vec::with_capacity(cfg.count);
    for (i, v) in ks.into_iter().flatten().enumerate() {
        out.push(Series::new(format!("kernelsynth-{i:07}"), Source::Kernelsynth, v));
    }
    for (i, v) in spikes.into_iter().enumerate() {
        out.push(Series::new(format!("spike-{i:07}"), Source::Spike, v));
    }
    for (i, v) in tsis.into_iter().enumerate() {
        out.push(Series::new(format!("tsi-{i:07}"), Source::Tsi, v));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_split() {
        let cfg = SynthConfig { count: 10, mix: Mix { kernelsynth: 0.55, spike: 0.25, tsi: 0.2 }, ..Default::default() };
        assert_eq!(cfg.counts(), (6, 3, 1));
    }

    #[test]
    fn small_corpus_is_finite_and_deterministic() {
        let cfg = SynthConfig { length: 128, count: 13, seed: 9, ..Default::default() };
        let a = generate_corpus(&cfg).unwrap();
        assert_eq!(a.len(), 13);
        assert!(a.iter().all(|s| s.len() == 128 && s.values.iter().all(|v| v.is_finite())));
        let b = generate_corpus(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_configs() {
        assert!(SynthConfig { length: 5000, ..Default::default() }.validate().is_err());
        let mix = Mix { kernelsynth: 0.5, spike: 0.2, tsi: 0.2 };
        assert!(SynthConfig { mix, ..Default::default() }.validate().is_err());
    }
}
