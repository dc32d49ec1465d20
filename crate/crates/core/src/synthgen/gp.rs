//! Gaussian-process sampling with a jittered Cholesky factor.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::kernels::ComposedKernel;
use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor, row-major `n x n`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    pub n: usize,
    pub l: Vec<f64>,
    /// Diagonal jitter that was needed.
    pub jitter: f64,
}

/// `n` evenly spaced points on `[0, 1]`.
pub fn grid(n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.0; n];
    }
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

pub fn covariance(kernel: &ComposedKernel, n: usize) -> Vec<f64> {
    let xs = grid(n);
    let mut cov = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(xs[i], xs[j]);
            cov[i * n + j] = v;
            cov[j * n + i] = v;
        }
    }
    cov
}

/// Plain Cholesky; `None` if a pivot is not strictly positive.
fn try_cholesky(a: &[f64], n: usize, jitter: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
            let dot: f64 = ri.iter().zip(rj).map(|(x, y)| x * y).sum();
            if i == j {
                let d = a[i * n + i] + jitter - dot;
                if !(d > 0.0) || !d.is_finite() {
                    return None;
                }
                l[i * n + i] = d.sqrt();
            } else {
                l[i * n + j] = (a[i * n + j] - dot) / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Cholesky with adaptive jitter: starts at `1e-8 * scale` (scale = mean
/// diagonal), multiplies by 10 on failure, gives up beyond `1e-2 * scale`.
pub fn cholesky_jittered(a: &[f64], n: usize) -> Result<Cholesky> {
    let scale = (0..n).map(|i| a[i * n + i]).sum::<f64>() / n.max(1) as f64;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Generation(format!("covariance has non-positive scale {scale}")));
    }
    let mut jitter = 1e-8 * scale;
    while jitter <= 1e-2 * scale * (1.0 + 1e-12) {
        if let Some(l) = try_cholesky(a, n, jitter) {
            return Ok(Cholesky { n, l, jitter });
        }
        jitter *= 10.0;
    }
    Err(Error::Generation("covariance is not positive definite after maximum jitter".into()))
}

impl Cholesky {
    /// `mean + L z` with `z` standard normal.
    pub fn draw(&self, mean: &[f64], rng: &mut impl Rng) -> Vec<f64> {
        let n = self.n;
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        (0..n)
            .map(|i| {
                let row = &self.l[i * n..i * n + i + 1];
                mean[i] + row.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }
}

/// Linear trend `m t + c` (t = sample index) with probability 1/2,
/// otherwise zero.
pub fn sample_mean(rng: &mut impl Rng, n: usize, slope: (f64, f64), intercept: (f64, f64)) -> Vec<f64> {
    if rng.random_bool(0.5) {
        let m = rng.random_range(slope.0..=slope.1);
        let c = rng.random_range(intercept.0..=intercept.1);
        (0..n).map(|t| m * t as f64 + c).collect()
    } else {
        vec![0.0; n]
    }
}

/// `draws` independent samples sharing one factorization.
pub fn gp_samples(kernel: &ComposedKernel, mean: &[f64], draws: usize, rng: &mut impl Rng) -> Result<Vec<Vec<f64>>> {
    let n = mean.len();
    let chol = cholesky_jittered(&covariance(kernel, n), n)?;
    Ok((0..draws).map(|_| chol.draw(mean, rng)).collect())
}
