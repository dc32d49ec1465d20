//! Stride-balanced corpus sampling.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

pub const DEFAULT_N_MAX: usize = 100_000;
pub const DEFAULT_SERIES_CAP: usize = 48;

/// `s_D = ceil(total / n_max)`, at least 1.
pub fn dataset_stride(total_len: usize, n_max: usize) -> usize {
    total_len.div_ceil(n_max.max(1)).max(1)
}

/// Windows drawn from one series per epoch: `min(cap, ceil(len / stride))`.
pub fn series_windows(len: usize, stride: usize, cap: usize) -> usize {
    len.div_ceil(stride.max(1)).min(cap)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetPlan {
    pub id: String,
    pub stride: usize,
    /// Windows per series per epoch, aligned with the dataset's series.
    pub windows: Vec<usize>,
}

impl DatasetPlan {
    pub fn total_windows(&self) -> usize {
        self.windows.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerPlan {
    pub n_max: usize,
    pub cap: usize,
    pub datasets: Vec<DatasetPlan>,
}

/// One window draw: dataset index and series index within it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct WindowRef {
    pub dataset: usize,
    pub series: usize,
}

impl SamplerPlan {
    pub fn epoch_len(&self) -> usize {
        self.datasets.iter().map(DatasetPlan::total_windows).sum()
    }

    /// Every window of one epoch, shuffled by a stream keyed on the epoch.
    pub fn epoch_order(&self, stream: RngStream, epoch: u64) -> Vec<WindowRef> {
        let mut order: Vec<WindowRef> = self
            .datasets
            .iter()
            .enumerate()
            .flat_map(|(d, plan)| {
                plan.windows.iter().enumerate().flat_map(move |(s, &n)| (0..n).map(move |_| WindowRef { dataset: d, series: s }))
            })
            .collect();
        order.shuffle(&mut stream.split(epoch).rng());
        order
    }
}

/// Per-dataset strides and per-series window counts. When the rounding up
/// in `ceil(len / stride)` pushes a dataset over `n_max`, windows are
/// removed one at a time from the series holding the most, lowest index
/// first, until the dataset fits.
pub fn plan_sampler(datasets: &[(String, Vec<usize>)], n_max: usize, cap: usize) -> Result<SamplerPlan> {
    if n_max == 0 || cap == 0 {
        return Err(Error::Config("n_max and the per-series cap must be positive".into()));
    }
    let plans = datasets
        .iter()
        .map(|(id, lens)| {
            let total: usize = lens.iter().sum();
            let stride = dataset_stride(total, n_max);
            let mut windows: Vec<usize> = lens.iter().map(|&l| series_windows(l, stride, cap)).collect();
            let mut excess = windows.iter().sum::<usize>().saturating_sub(n_max);
            while excess > 0 {
                let (i, _) = windows.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))).expect("non-empty");
                windows[i] -= 1;
                excess -= 1;
            }
            DatasetPlan { id: id.clone(), stride, windows }
        })
        .collect();
    Ok(SamplerPlan { n_max, cap, datasets: plans })
}
