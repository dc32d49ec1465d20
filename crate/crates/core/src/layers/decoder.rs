//! Patch decoder head.
//!
//! `z = W_L x` turns the `L x d` sequence into `p` query vectors. In the
//! attention variant `o = attention(z W_q, x' W_k, x' W_v)` with
//! `x' = x + P` (optional sin-cos table) and `y = o w_o`; the bilinear
//! variant skips attention and reads `y = z w_o` directly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{join, truncated_normal_tensor, ParamKind, Parameters};
use crate::error::{invalid_arg, Result};
use crate::numerics::{
    linear, linear_backward, matmul, matmul_tn, softmax_attention, softmax_attention_backward,
    AttentionCache, Tensor2,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    #[default]
    Attention,
    Bilinear,
}

impl DecoderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DecoderKind::Attention => "attention",
            DecoderKind::Bilinear => "bilinear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "attention" => Some(DecoderKind::Attention),
            "bilinear" => Some(DecoderKind::Bilinear),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderParams {
    pub kind: DecoderKind,
    /// `p x L`.
    pub w_l: Tensor2,
    pub w_q: Tensor2,
    pub w_k: Tensor2,
    pub w_v: Tensor2,
    /// `d x 1`.
    pub w_o: Tensor2,
    /// Fixed positional table (not trained).
    pub posemb: Option<Tensor2>,
}

pub struct DecoderCache {
    x: Tensor2,
    keys_in: Tensor2,
    z: Tensor2,
    q: Tensor2,
    k: Tensor2,
    v: Tensor2,
    o: Tensor2,
    attn: Option<AttentionCache>,
}

/// Interleaved sin-cos table: column `2i` holds `sin(pos / 10000^(2i/d))`,
/// column `2i + 1` the matching cosine.
pub fn sincos_table(len: usize, dim: usize) -> Tensor2 {
    let mut t = Tensor2::zeros(len, dim);
    for pos in 0..len {
        for i in 0..dim.div_ceil(2) {
            let angle = pos as f64 / 10000f64.powf(2.0 * i as f64 / dim as f64);
            t.set(pos, 2 * i, angle.sin());
            if 2 * i + 1 < dim {
                t.set(pos, 2 * i + 1, angle.cos());
            }
        }
    }
    t
}

impl DecoderParams {
    pub fn zeros(kind: DecoderKind, context: usize, patch: usize, dim: usize, posemb: bool) -> Self {
        Self {
            kind,
            w_l: Tensor2::zeros(patch, context),
            w_q: Tensor2::zeros(dim, dim),
            w_k: Tensor2::zeros(dim, dim),
            w_v: Tensor2::zeros(dim, dim),
            w_o: Tensor2::zeros(dim, 1),
            posemb: posemb.then(|| sincos_table(context, dim)),
        }
    }

    /// `W_L` entries use `std / sqrt(L)`-scaled draws so each query starts as
    /// a small random mix of all positions.
    pub fn init(
        kind: DecoderKind,
        context: usize,
        patch: usize,
        dim: usize,
        posemb: bool,
        std: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let mut p = Self::zeros(kind, context, patch, dim, posemb);
        p.w_l = truncated_normal_tensor(patch, context, 1.0 / (context as f64).sqrt(), rng);
        if kind == DecoderKind::Attention {
            p.w_q = truncated_normal_tensor(dim, dim, std, rng);
            p.w_k = truncated_normal_tensor(dim, dim, std, rng);
            p.w_v = truncated_normal_tensor(dim, dim, std, rng);
        }
        p.w_o = truncated_normal_tensor(dim, 1, std, rng);
        p
    }

    pub fn patch(&self) -> usize {
        self.w_l.rows()
    }

    /// Returns the `p` normalized-space predictions.
    pub fn forward(&self, x: &Tensor2) -> Result<(Vec<f64>, DecoderCache)> {
        if x.rows() != self.w_l.cols() || x.cols() != self.w_o.rows() {
            return Err(invalid_arg(format!(
                "decoder expects {}x{} input, got {:?}",
                self.w_l.cols(),
                self.w_o.rows(),
                x.shape()
            )));
        }
        let z = matmul(&self.w_l, x)?;
        let empty = || Tensor2::zeros(0, 0);
        let (keys_in, q, k, v, o, attn) = match self.kind {
            DecoderKind::Bilinear => (empty(), empty(), empty(), empty(), z.clone(), None),
            DecoderKind::Attention => {
                let mut keys_in = x.clone();
                if let Some(pe) = &self.posemb {
                    keys_in.add_assign(pe);
                }
                let q = linear(&z, &self.w_q, None)?;
                let k = linear(&keys_in, &self.w_k, None)?;
                let v = linear(&keys_in, &self.w_v, None)?;
                let (o, cache) = softmax_attention(&q, &k, &v)?;
                (keys_in, q, k, v, o, Some(cache))
            }
        };
        let y = matmul(&o, &self.w_o)?.into_vec();
        Ok((y, DecoderCache { x: x.clone(), keys_in, z, q, k, v, o, attn }))
    }

    /// Accumulates parameter gradients; returns `d y / d x`.
    pub fn backward(&self, cache: &DecoderCache, dy: &[f64], grads: &mut Self) -> Tensor2 {
        let dy = Tensor2::column(dy);
        grads.w_o.add_assign(&matmul_tn(&cache.o, &dy));
        let do_ = crate::numerics::matmul_nt(&dy, &self.w_o);
        let mut dx = Tensor2::zeros(cache.x.rows(), cache.x.cols());
        let dz = match (&self.kind, &cache.attn) {
            (DecoderKind::Attention, Some(attn)) => {
                let ag = softmax_attention_backward(&cache.q, &cache.k, &cache.v, attn, &do_);
                let gq = linear_backward(&cache.z, &self.w_q, &ag.dq);
                let gk = linear_backward(&cache.keys_in, &self.w_k, &ag.dk);
                let gv = linear_backward(&cache.keys_in, &self.w_v, &ag.dv);
                grads.w_q.add_assign(&gq.dw);
                grads.w_k.add_assign(&gk.dw);
                grads.w_v.add_assign(&gv.dw);
                dx.add_assign(&gk.dx);
                dx.add_assign(&gv.dx);
                gq.dx
            }
            _ => do_,
        };
        // z = W_L x
        grads.w_l.add_assign(&crate::numerics::matmul_nt(&dz, &cache.x));
        dx.add_assign(&matmul_tn(&self.w_l, &dz));
        dx
    }
}

impl Parameters for DecoderParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, ParamKind, &'a Tensor2)) {
        f(join(prefix, "w_l"), ParamKind::Weight, &self.w_l);
        if self.kind == DecoderKind::Attention {
            f(join(prefix, "w_q"), ParamKind::Weight, &self.w_q);
            f(join(prefix, "w_k"), ParamKind::Weight, &self.w_k);
            f(join(prefix, "w_v"), ParamKind::Weight, &self.w_v);
        }
        f(join(prefix, "w_o"), ParamKind::Weight, &self.w_o);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, ParamKind, &mut Tensor2)) {
        f(join(prefix, "w_l"), ParamKind::Weight, &mut self.w_l);
        if self.kind == DecoderKind::Attention {
            f(join(prefix, "w_q"), ParamKind::Weight, &mut self.w_q);
            f(join(prefix, "w_k"), ParamKind::Weight, &mut self.w_k);
            f(join(prefix, "w_v"), ParamKind::Weight, &mut self.w_v);
        }
        f(join(prefix, "w_o"), ParamKind::Weight, &mut self.w_o);
    }
}
