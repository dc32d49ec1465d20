//! Gated long-convolution sequence mixer:
//! `x + LayerNorm(SiLU(short_conv(x) ⊙ long_conv(x)))`.

use rand::Rng;

use super::params::{join, truncated_normal, ParamKind, Parameters};
use crate::error::Result;
use crate::numerics::{
    activation::{silu, silu_grad},
    causal_conv_direct, causal_conv_direct_backward, causal_conv_fft, causal_conv_fft_backward,
    layernorm, layernorm_backward, LayerNormCache, Tensor2,
};

#[derive(Clone, Debug, PartialEq)]
pub struct ConvBlockParams {
    /// `L x d`, one full-length causal kernel per channel.
    pub long_kernel: Tensor2,
    /// `k_s x d` gate kernel.
    pub short_kernel: Tensor2,
    pub ln_gain: Tensor2,
    pub ln_bias: Tensor2,
}

pub struct ConvBlockCache {
    x: Tensor2,
    short: Tensor2,
    long: Tensor2,
    gate: Tensor2,
    ln: LayerNormCache,
}

impl ConvBlockParams {
    /// All-zero kernels, unit LayerNorm gain: the identity block.
    pub fn zeros(context: usize, dim: usize, short_len: usize) -> Self {
        Self {
            long_kernel: Tensor2::zeros(context, dim),
            short_kernel: Tensor2::zeros(short_len, dim),
            ln_gain: Tensor2::filled(1, dim, 1.0),
            ln_bias: Tensor2::zeros(1, dim),
        }
    }

    /// Short kernel ~ TN(0, std). Long kernel taps decay exponentially with
    /// lag at a per-channel rate spread log-uniformly, so early in training
    /// each channel looks at a different effective horizon.
    pub fn init(context: usize, dim: usize, short_len: usize, std: f64, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(context, dim, short_len);
        for v in p.short_kernel.data_mut() {
            *v = truncated_normal(rng, std);
        }
        let max_tau = (context as f64 / 4.0).max(2.0);
        for j in 0..dim {
            let frac = if dim > 1 { j as f64 / (dim - 1) as f64 } else { 0.0 };
            let tau = max_tau.powf(frac);
            for m in 0..context {
                let w = truncated_normal(rng, std) * (-(m as f64) / tau).exp();
                p.long_kernel.set(m, j, w);
            }
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.long_kernel.cols()
    }

    pub fn forward(&self, x: &Tensor2) -> Result<(Tensor2, ConvBlockCache)> {
        let short = causal_conv_direct(x, &self.short_kernel)?;
        let long = causal_conv_fft(x, &self.long_kernel)?;
        let gate = short.hadamard(&long);
        let act = gate.map(silu);
        let (normed, ln) = layernorm(&act, self.ln_gain.data(), self.ln_bias.data());
        let mut out = x.clone();
        out.add_assign(&normed);
        Ok((out, ConvBlockCache { x: x.clone(), short, long, gate, ln }))
    }

    /// Accumulates parameter gradients into `grads`; returns `d out / d x`.
    pub fn backward(&self, cache: &ConvBlockCache, dout: &Tensor2, grads: &mut Self) -> Tensor2 {
        let lg = layernorm_backward(&cache.ln, self.ln_gain.data(), dout);
        add_into(grads.ln_gain.data_mut(), &lg.dgain);
        add_into(grads.ln_bias.data_mut(), &lg.dbias);
        let mut dgate = lg.dx;
        for (g, &z) in dgate.data_mut().iter_mut().zip(cache.gate.data()) {
            *g *= silu_grad(z);
        }
        let dshort = dgate.hadamard(&cache.long);
        let dlong = dgate.hadamard(&cache.short);
        let (dx_s, dk_s) = causal_conv_direct_backward(&cache.x, &self.short_kernel, &dshort);
        let (dx_l, dk_l) = causal_conv_fft_backward(&cache.x, &self.long_kernel, &dlong);
        grads.short_kernel.add_assign(&dk_s);
        grads.long_kernel.add_assign(&dk_l);
        let mut dx = dout.clone();
        dx.add_assign(&dx_s);
        dx.add_assign(&dx_l);
        dx
    }
}

pub(crate) fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

impl Parameters for ConvBlockParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, ParamKind, &'a Tensor2)) {
        f(join(prefix, "long_kernel"), ParamKind::Weight, &self.long_kernel);
        f(join(prefix, "short_kernel"), ParamKind::Weight, &self.short_kernel);
        f(join(prefix, "ln_gain"), ParamKind::Norm, &self.ln_gain);
        f(join(prefix, "ln_bias"), ParamKind::Norm, &self.ln_bias);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, ParamKind, &mut Tensor2)) {
        f(join(prefix, "long_kernel"), ParamKind::Weight, &mut self.long_kernel);
        f(join(prefix, "short_kernel"), ParamKind::Weight, &mut self.short_kernel);
        f(join(prefix, "ln_gain"), ParamKind::Norm, &mut self.ln_gain);
        f(join(prefix, "ln_bias"), ParamKind::Norm, &mut self.ln_bias);
    }
}
