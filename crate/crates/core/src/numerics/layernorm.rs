//! Per-position layer normalization over channels.
//!
//! The variance is floored at [`LN_EPS`] (`sigma = sqrt(max(var, eps))`), so
//! rows with real spread normalize to exactly unit variance and constant
//! rows map to zero before the affine part.

use super::tensor::Tensor2;

pub const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    xhat: Tensor2,
    inv_sigma: Vec<f64>,
    floored: Vec<bool>,
}

impl LayerNormCache {
    pub fn normalized(&self) -> &Tensor2 {
        &self.xhat
    }
}

pub fn layernorm(x: &Tensor2, gain: &[f64], bias: &[f64]) -> (Tensor2, LayerNormCache) {
    let (rows, d) = x.shape();
    assert!(d >= 1, "layernorm needs at least one channel");
    assert_eq!(gain.len(), d);
    assert_eq!(bias.len(), d);
    let mut xhat = Tensor2::zeros(rows, d);
    let mut y = Tensor2::zeros(rows, d);
    let mut inv_sigma = Vec::with_capacity(rows);
    let mut floored = Vec::with_capacity(rows);
    for r in 0..rows {
        let xr = x.row(r);
        let mean = xr.iter().sum::<f64>() / d as f64;
        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let is_floored = var < LN_EPS;
        let inv = 1.0 / var.max(LN_EPS).sqrt();
        inv_sigma.push(inv);
        floored.push(is_floored);
        let hr = xhat.row_mut(r);
        for (h, v) in hr.iter_mut().zip(xr) {
            *h = (v - mean) * inv;
        }
        let hr = xhat.row(r).to_vec();
        for (j, o) in y.row_mut(r).iter_mut().enumerate() {
            *o = hr[j] * gain[j] + bias[j];
        }
    }
    (y, LayerNormCache { xhat, inv_sigma, floored })
}

#[derive(Debug, Clone)]
pub struct LayerNormGrads {
    pub dx: Tensor2,
    pub dgain: Vec<f64>,
    pub dbias: Vec<f64>,
}

pub fn layernorm_backward(cache: &LayerNormCache, gain: &[f64], dy: &Tensor2) -> LayerNormGrads {
    let (rows, d) = dy.shape();
    let mut dx = Tensor2::zeros(rows, d);
    let mut dgain = vec![0.0; d];
    let mut dbias = vec![0.0; d];
    let mut ghat = vec![0.0; d];
    for r in 0..rows {
        let g = dy.row(r);
        let h = cache.xhat.row(r);
        for j in 0..d {
            dgain[j] += g[j] * h[j];
            dbias[j] += g[j];
            ghat[j] = g[j] * gain[j];
        }
        let mean_g = ghat.iter().sum::<f64>() / d as f64;
        let mean_gh = if cache.floored[r] {
            0.0
        } else {
            ghat.iter().zip(h).map(|(a, b)| a * b).sum::<f64>() / d as f64
        };
        let inv = cache.inv_sigma[r];
        for (j, o) in dx.row_mut(r).iter_mut().enumerate() {
            *o = (ghat[j] - mean_g - h[j] * mean_gh) * inv;
        }
    }
    LayerNormGrads { dx, dgain, dbias }
}
