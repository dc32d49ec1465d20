//! DeltaNet sequence mixer with vector state-weaving.
//!
//! Per head `h` with head dimension `d_h = d / n_heads`:
//!
//! ```text
//! q, k, v = short_conv(x W_q), short_conv(x W_k), short_conv(x W_v)
//! k       = k / |k|                         (per head)
//! beta    = sigmoid(x W_beta + b_beta)      (one scalar per head)
//! S_i     = S_{i-1} (I - beta_i k_i k_iᵀ) + beta_i v_i k_iᵀ,   S_0 = 0
//! x_i    <- x_i + LayerNorm(concat_h S_i q_i)
//! ```
//!
//! Before the mixer the carried vector is added to the first position
//! (`x_0 <- x_0 + carry`). The gated variant multiplies the state by a
//! learned per-head decay `alpha = sigmoid(a)` before each update.

use rand::Rng;

use super::conv_block::add_into;
use super::params::{join, truncated_normal_tensor, ParamKind, Parameters};
use crate::error::{Error, Result};
use crate::numerics::{
    activation::sigmoid, causal_conv_direct, causal_conv_direct_backward, layernorm,
    layernorm_backward, linear, linear_backward, LayerNormCache, Tensor2,
};

/// Fixed head count of the mixer.
pub const DELTANET_HEADS: usize = 4;

const KEY_NORM_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct DeltaNetParams {
    pub n_heads: usize,
    pub w_q: Tensor2,
    pub w_k: Tensor2,
    pub w_v: Tensor2,
    pub conv_q: Tensor2,
    pub conv_k: Tensor2,
    pub conv_v: Tensor2,
    /// `d x n_heads`.
    pub w_beta: Tensor2,
    /// `1 x n_heads`.
    pub b_beta: Tensor2,
    /// Decay logits `1 x n_heads`; present only for the gated variant.
    pub decay_logit: Option<Tensor2>,
    pub ln_gain: Tensor2,
    pub ln_bias: Tensor2,
}

pub struct DeltaNetCache {
    xw: Tensor2,
    pq: Tensor2,
    pk: Tensor2,
    pv: Tensor2,
    q: Tensor2,
    k_hat: Tensor2,
    k_norm: Vec<f64>,
    v: Tensor2,
    beta: Tensor2,
    rec: RecurrenceCache,
    ln: LayerNormCache,
}

/// Per-step state snapshots needed by the backward recurrence.
pub struct RecurrenceCache {
    /// `S_{i-1}` for every step and head, before decay; `L * H * d_h * d_h`.
    prev_states: Vec<f64>,
    /// `S_i` after the update, same layout.
    states: Vec<f64>,
}

/// Gradients of the bare recurrence.
pub struct RecurrenceGrads {
    pub dq: Tensor2,
    pub dk: Tensor2,
    pub dv: Tensor2,
    pub dbeta: Tensor2,
    /// d loss / d alpha per head (zero when ungated).
    pub dalpha: Vec<f64>,
}

impl DeltaNetParams {
    pub fn zeros(dim: usize, short_len: usize, gated: bool) -> Result<Self> {
        if !dim.is_multiple_of(DELTANET_HEADS) {
            return Err(Error::Config(format!(
                "model dim {dim} is not divisible by {DELTANET_HEADS} heads"
            )));
        }
        let h = DELTANET_HEADS;
        Ok(Self {
            n_heads: h,
            w_q: Tensor2::zeros(dim, dim),
            w_k: Tensor2::zeros(dim, dim),
            w_v: Tensor2::zeros(dim, dim),
            conv_q: delta_kernel(short_len, dim),
            conv_k: delta_kernel(short_len, dim),
            conv_v: delta_kernel(short_len, dim),
            w_beta: Tensor2::zeros(dim, h),
            b_beta: Tensor2::zeros(1, h),
            // alpha = sigmoid(4.6) ~ 0.99
            decay_logit: gated.then(|| Tensor2::filled(1, h, 4.6)),
            ln_gain: Tensor2::filled(1, dim, 1.0),
            ln_bias: Tensor2::zeros(1, dim),
        })
    }

    /// Projections ~ TN(0, std); short convs start as pass-through so the
    /// projections are initially seen unfiltered.
    pub fn init(dim: usize, short_len: usize, gated: bool, std: f64, rng: &mut impl Rng) -> Result<Self> {
        let mut p = Self::zeros(dim, short_len, gated)?;
        p.w_q = truncated_normal_tensor(dim, dim, std, rng);
        p.w_k = truncated_normal_tensor(dim, dim, std, rng);
        p.w_v = truncated_normal_tensor(dim, dim, std, rng);
        p.w_beta = truncated_normal_tensor(dim, p.n_heads, std, rng);
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.w_q.rows()
    }

    pub fn head_dim(&self) -> usize {
        self.dim() / self.n_heads
    }

    pub fn is_gated(&self) -> bool {
        self.decay_logit.is_some()
    }

    fn alphas(&self) -> Option<Vec<f64>> {
        self.decay_logit.as_ref().map(|t| t.data().iter().map(|&a| sigmoid(a)).collect())
    }

    /// Returns the block output and the carry for the next woven layer: the
    /// input row at position `L - 1` before weaving.
    pub fn forward(&self, x: &Tensor2, carry_in: &[f64]) -> Result<(Tensor2, Vec<f64>, DeltaNetCache)> {
        let (l, d) = x.shape();
        if d != self.dim() || carry_in.len() != d {
            return Err(Error::InvalidArgument(format!(
                "deltanet expects width {}, got input {d} and carry {}",
                self.dim(),
                carry_in.len()
            )));
        }
        let carry_out = x.row(l - 1).to_vec();
        let mut xw = x.clone();
        add_into(xw.row_mut(0), carry_in);

        let pq = linear(&xw, &self.w_q, None)?;
        let pk = linear(&xw, &self.w_k, None)?;
        let pv = linear(&xw, &self.w_v, None)?;
        let q = causal_conv_direct(&pq, &self.conv_q)?;
        let k = causal_conv_direct(&pk, &self.conv_k)?;
        let v = causal_conv_direct(&pv, &self.conv_v)?;
        let beta = linear(&xw, &self.w_beta, Some(self.b_beta.data()))?.map(sigmoid);
        let (k_hat, k_norm) = normalize_keys(&k, self.n_heads);
        let alphas = self.alphas();
        let (o, rec) = delta_recurrence(&q, &k_hat, &v, &beta, alphas.as_deref(), self.n_heads);
        let (normed, ln) = layernorm(&o, self.ln_gain.data(), self.ln_bias.data());
        let mut out = xw.clone();
        out.add_assign(&normed);
        let cache = DeltaNetCache { xw, pq, pk, pv, q, k_hat, k_norm, v, beta, rec, ln };
        Ok((out, carry_out, cache))
    }

    /// Forward pass without caches, optionally using the chunked recurrence.
    pub fn forward_inference(&self, x: &Tensor2, carry_in: &[f64], chunk: usize) -> Result<(Tensor2, Vec<f64>)> {
        if chunk == 0 || self.is_gated() {
            let (out, carry, _) = self.forward(x, carry_in)?;
            return Ok((out, carry));
        }
        let l = x.rows();
        let carry_out = x.row(l - 1).to_vec();
        let mut xw = x.clone();
        add_into(xw.row_mut(0), carry_in);
        let q = causal_conv_direct(&linear(&xw, &self.w_q, None)?, &self.conv_q)?;
        let k = causal_conv_direct(&linear(&xw, &self.w_k, None)?, &self.conv_k)?;
        let v = causal_conv_direct(&linear(&xw, &self.w_v, None)?, &self.conv_v)?;
        let beta = linear(&xw, &self.w_beta, Some(self.b_beta.data()))?.map(sigmoid);
        let (k_hat, _) = normalize_keys(&k, self.n_heads);
        let o = delta_recurrence_chunked(&q, &k_hat, &v, &beta, self.n_heads, chunk);
        let (normed, _) = layernorm(&o, self.ln_gain.data(), self.ln_bias.data());
        xw.add_assign(&normed);
        Ok((xw, carry_out))
    }

    /// Accumulates parameter gradients; returns `(dx, d carry_in)`.
    pub fn backward(&self, cache: &DeltaNetCache, dout: &Tensor2, grads: &mut Self) -> (Tensor2, Vec<f64>) {
        let lg = layernorm_backward(&cache.ln, self.ln_gain.data(), dout);
        add_into(grads.ln_gain.data_mut(), &lg.dgain);
        add_into(grads.ln_bias.data_mut(), &lg.dbias);

        let alphas = self.alphas();
        let rg = delta_recurrence_backward(
            &cache.q,
            &cache.k_hat,
            &cache.v,
            &cache.beta,
            alphas.as_deref(),
            self.n_heads,
            &cache.rec,
            &lg.dx,
        );
        if let (Some(g), Some(a)) = (grads.decay_logit.as_mut(), alphas.as_ref()) {
            for ((gv, da), al) in g.data_mut().iter_mut().zip(&rg.dalpha).zip(a) {
                *gv += da * al * (1.0 - al);
            }
        }
        let dk = normalize_keys_backward(&cache.k_hat, &cache.k_norm, &rg.dk, self.n_heads);

        let mut dxw = dout.clone();
        let projections = [
            (&cache.pq, &self.w_q, &self.conv_q, &rg.dq, 0usize),
            (&cache.pk, &self.w_k, &self.conv_k, &dk, 1),
            (&cache.pv, &self.w_v, &self.conv_v, &rg.dv, 2),
        ];
        for (pre, w, conv, dpost, which) in projections {
            let (dpre, dconv) = causal_conv_direct_backward(pre, conv, dpost);
            let lg = linear_backward(&cache.xw, w, &dpre);
            let (gw, gc) = match which {
                0 => (&mut grads.w_q, &mut grads.conv_q),
                1 => (&mut grads.w_k, &mut grads.conv_k),
                _ => (&mut grads.w_v, &mut grads.conv_v),
            };
            gw.add_assign(&lg.dw);
            gc.add_assign(&dconv);
            dxw.add_assign(&lg.dx);
        }

        let mut dz = rg.dbeta;
        for (g, &b) in dz.data_mut().iter_mut().zip(cache.beta.data()) {
            *g *= b * (1.0 - b);
        }
        let bg = linear_backward(&cache.xw, &self.w_beta, &dz);
        grads.w_beta.add_assign(&bg.dw);
        add_into(grads.b_beta.data_mut(), &bg.db);
        dxw.add_assign(&bg.dx);

        let dcarry = dxw.row(0).to_vec();
        (dxw, dcarry)
    }
}

fn delta_kernel(len: usize, dim: usize) -> Tensor2 {
    let mut t = Tensor2::zeros(len, dim);
    if len > 0 {
        t.row_mut(0).fill(1.0);
    }
    t
}

/// L2-normalizes each head slice of every row; returns the norms used.
pub fn normalize_keys(k: &Tensor2, n_heads: usize) -> (Tensor2, Vec<f64>) {
    let (l, d) = k.shape();
    let dh = d / n_heads;
    let mut out = k.clone();
    let mut norms = Vec::with_capacity(l * n_heads);
    for i in 0..l {
        let row = out.row_mut(i);
        for h in 0..n_heads {
            let s = &mut row[h * dh..(h + 1) * dh];
            let n = (s.iter().map(|v| v * v).sum::<f64>() + KEY_NORM_EPS).sqrt();
            s.iter_mut().for_each(|v| *v /= n);
            norms.push(n);
        }
    }
    (out, norms)
}

fn normalize_keys_backward(k_hat: &Tensor2, norms: &[f64], dk_hat: &Tensor2, n_heads: usize) -> Tensor2 {
    let (l, d) = k_hat.shape();
    let dh = d / n_heads;
    let mut dk = Tensor2::zeros(l, d);
    for i in 0..l {
        for h in 0..n_heads {
            let r = h * dh..(h + 1) * dh;
            let kh = &k_hat.row(i)[r.clone()];
            let g = &dk_hat.row(i)[r.clone()];
            let dot: f64 = kh.iter().zip(g).map(|(a, b)| a * b).sum();
            let n = norms[i * n_heads + h];
            for (o, (gv, kv)) in dk.row_mut(i)[r].iter_mut().zip(g.iter().zip(kh)) {
                *o = (gv - kv * dot) / n;
            }
        }
    }
    dk
}

/// Sequential delta-rule recurrence. `beta` is `L x H`; `alphas`, when
/// given, holds the per-head decay. Returns the concatenated `S_i q_i`.
pub fn delta_recurrence(
    q: &Tensor2,
    k: &Tensor2,
    v: &Tensor2,
    beta: &Tensor2,
    alphas: Option<&[f64]>,
    n_heads: usize,
) -> (Tensor2, RecurrenceCache) {
    let (l, d) = q.shape();
    let dh = d / n_heads;
    let block = dh * dh;
    let mut o = Tensor2::zeros(l, d);
    let mut prev_states = vec![0.0; l * n_heads * block];
    let mut states = vec![0.0; l * n_heads * block];
    let mut u = vec![0.0; dh];
    for h in 0..n_heads {
        let mut s = vec![0.0; block];
        let cols = h * dh..(h + 1) * dh;
        let alpha = alphas.map_or(1.0, |a| a[h]);
        for i in 0..l {
            let off = (i * n_heads + h) * block;
            prev_states[off..off + block].copy_from_slice(&s);
            if alpha != 1.0 {
                s.iter_mut().for_each(|x| *x *= alpha);
            }
            let kr = &k.row(i)[cols.clone()];
            let vr = &v.row(i)[cols.clone()];
            let qr = &q.row(i)[cols.clone()];
            let b = beta.get(i, h);
            for a in 0..dh {
                u[a] = s[a * dh..(a + 1) * dh].iter().zip(kr).map(|(x, y)| x * y).sum();
            }
            for a in 0..dh {
                let coef = b * (vr[a] - u[a]);
                for (sv, kv) in s[a * dh..(a + 1) * dh].iter_mut().zip(kr) {
                    *sv += coef * kv;
                }
            }
            states[off..off + block].copy_from_slice(&s);
            let orow = &mut o.row_mut(i)[cols.clone()];
            for a in 0..dh {
                orow[a] = s[a * dh..(a + 1) * dh].iter().zip(qr).map(|(x, y)| x * y).sum();
            }
        }
    }
    (o, RecurrenceCache { prev_states, states })
}

#[allow(clippy::too_many_arguments)]
pub fn delta_recurrence_backward(
    q: &Tensor2,
    k: &Tensor2,
    v: &Tensor2,
    beta: &Tensor2,
    alphas: Option<&[f64]>,
    n_heads: usize,
    cache: &RecurrenceCache,
    dout: &Tensor2,
) -> RecurrenceGrads {
    let (l, d) = q.shape();
    let dh = d / n_heads;
    let block = dh * dh;
    let mut dq = Tensor2::zeros(l, d);
    let mut dk = Tensor2::zeros(l, d);
    let mut dv = Tensor2::zeros(l, d);
    let mut dbeta = Tensor2::zeros(l, n_heads);
    let mut dalpha = vec![0.0; n_heads];
    let mut sp = vec![0.0; block];
    let mut w = vec![0.0; dh];
    let mut u = vec![0.0; dh];
    let mut diff = vec![0.0; dh];
    for h in 0..n_heads {
        let cols = h * dh..(h + 1) * dh;
        let alpha = alphas.map_or(1.0, |a| a[h]);
        let mut g = vec![0.0; block];
        for i in (0..l).rev() {
            let off = (i * n_heads + h) * block;
            let s_i = &cache.states[off..off + block];
            let s_prev = &cache.prev_states[off..off + block];
            let qr = &q.row(i)[cols.clone()];
            let kr = &k.row(i)[cols.clone()];
            let vr = &v.row(i)[cols.clone()];
            let dor = &dout.row(i)[cols.clone()];
            let b = beta.get(i, h);

            // o_i = S_i q_i
            for a in 0..dh {
                for c in 0..dh {
                    g[a * dh + c] += dor[a] * qr[c];
                }
            }
            {
                let dqr = &mut dq.row_mut(i)[cols.clone()];
                for c in 0..dh {
                    dqr[c] = (0..dh).map(|a| s_i[a * dh + c] * dor[a]).sum();
                }
            }

            for (x, y) in sp.iter_mut().zip(s_prev) {
                *x = alpha * y;
            }
            for a in 0..dh {
                w[a] = g[a * dh..(a + 1) * dh].iter().zip(kr).map(|(x, y)| x * y).sum();
                u[a] = sp[a * dh..(a + 1) * dh].iter().zip(kr).map(|(x, y)| x * y).sum();
                diff[a] = vr[a] - u[a];
            }
            {
                let dvr = &mut dv.row_mut(i)[cols.clone()];
                for a in 0..dh {
                    dvr[a] = b * w[a];
                }
            }
            dbeta.set(i, h, w.iter().zip(&diff).map(|(x, y)| x * y).sum());
            {
                let dkr = &mut dk.row_mut(i)[cols.clone()];
                for c in 0..dh {
                    let gt: f64 = (0..dh).map(|a| g[a * dh + c] * diff[a]).sum();
                    let st: f64 = (0..dh).map(|a| sp[a * dh + c] * w[a]).sum();
                    dkr[c] = b * (gt - st);
                }
            }
            // dS' = G - beta w kᵀ, then S' = alpha S_{i-1}.
            for a in 0..dh {
                for c in 0..dh {
                    g[a * dh + c] -= b * w[a] * kr[c];
                }
            }
            if alphas.is_some() {
                dalpha[h] += g.iter().zip(s_prev).map(|(x, y)| x * y).sum::<f64>();
                g.iter_mut().for_each(|x| *x *= alpha);
            }
        }
    }
    RecurrenceGrads { dq, dk, dv, dbeta, dalpha }
}

/// Chunked evaluation of the ungated recurrence.
///
/// Inside a chunk starting from state `S_0`, the update deltas
/// `u_t = beta_t (v_t - S_0 k_t - sum_{r<t} (k_r·k_t) u_r)` are obtained by
/// forward substitution, outputs are `S_0 q_t + sum_{r<=t} (k_r·q_t) u_r`
/// and the state advances by `sum_r u_r k_rᵀ` once per chunk.
pub fn delta_recurrence_chunked(
    q: &Tensor2,
    k: &Tensor2,
    v: &Tensor2,
    beta: &Tensor2,
    n_heads: usize,
    chunk: usize,
) -> Tensor2 {
    let (l, d) = q.shape();
    let dh = d / n_heads;
    let chunk = chunk.max(1);
    let mut o = Tensor2::zeros(l, d);
    for h in 0..n_heads {
        let cols = h * dh..(h + 1) * dh;
        let mut s = vec![0.0; dh * dh];
        let mut start = 0;
        while start < l {
            let end = (start + chunk).min(l);
            let c = end - start;
            let kc: Vec<&[f64]> = (start..end).map(|i| &k.row(i)[cols.clone()]).collect();
            let qc: Vec<&[f64]> = (start..end).map(|i| &q.row(i)[cols.clone()]).collect();
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            let mut deltas = vec![vec![0.0; dh]; c];
            for t in 0..c {
                let i = start + t;
                let b = beta.get(i, h);
                let vr = &v.row(i)[cols.clone()];
                let mut rhs: Vec<f64> =
                    (0..dh).map(|a| vr[a] - dot(&s[a * dh..(a + 1) * dh], kc[t])).collect();
                for r in 0..t {
                    let kk = dot(kc[r], kc[t]);
                    for a in 0..dh {
                        rhs[a] -= kk * deltas[r][a];
                    }
                }
                deltas[t] = rhs.into_iter().map(|x| b * x).collect();
            }
            for t in 0..c {
                let orow = &mut o.row_mut(start + t)[cols.clone()];
                for a in 0..dh {
                    orow[a] = dot(&s[a * dh..(a + 1) * dh], qc[t]);
                }
                for r in 0..=t {
                    let kq = dot(kc[r], qc[t]);
                    for a in 0..dh {
                        orow[a] += kq * deltas[r][a];
                    }
                }
            }
            for (r, delta) in deltas.iter().enumerate() {
                for a in 0..dh {
                    for (sv, kv) in s[a * dh..(a + 1) * dh].iter_mut().zip(kc[r]) {
                        *sv += delta[a] * kv;
                    }
                }
            }
            start = end;
        }
    }
    o
}

impl Parameters for DeltaNetParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, ParamKind, &'a Tensor2)) {
        f(join(prefix, "w_q"), ParamKind::Weight, &self.w_q);
        f(join(prefix, "w_k"), ParamKind::Weight, &self.w_k);
        f(join(prefix, "w_v"), ParamKind::Weight, &self.w_v);
        f(join(prefix, "conv_q"), ParamKind::Weight, &self.conv_q);
        f(join(prefix, "conv_k"), ParamKind::Weight, &self.conv_k);
        f(join(prefix, "conv_v"), ParamKind::Weight, &self.conv_v);
        f(join(prefix, "w_beta"), ParamKind::Weight, &self.w_beta);
        f(join(prefix, "b_beta"), ParamKind::Bias, &self.b_beta);
        if let Some(t) = &self.decay_logit {
            f(join(prefix, "decay_logit"), ParamKind::Norm, t);
        }
        f(join(prefix, "ln_gain"), ParamKind::Norm, &self.ln_gain);
        f(join(prefix, "ln_bias"), ParamKind::Norm, &self.ln_bias);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, ParamKind, &mut Tensor2)) {
        f(join(prefix, "w_q"), ParamKind::Weight, &mut self.w_q);
        f(join(prefix, "w_k"), ParamKind::Weight, &mut self.w_k);
        f(join(prefix, "w_v"), ParamKind::Weight, &mut self.w_v);
        f(join(prefix, "conv_q"), ParamKind::Weight, &mut self.conv_q);
        f(join(prefix, "conv_k"), ParamKind::Weight, &mut self.conv_k);
        f(join(prefix, "conv_v"), ParamKind::Weight, &mut self.conv_v);
        f(join(prefix, "w_beta"), ParamKind::Weight, &mut self.w_beta);
        f(join(prefix, "b_beta"), ParamKind::Bias, &mut self.b_beta);
        if let Some(t) = &mut self.decay_logit {
            f(join(prefix, "decay_logit"), ParamKind::Norm, t);
        }
        f(join(prefix, "ln_gain"), ParamKind::Norm, &mut self.ln_gain);
        f(join(prefix, "ln_bias"), ParamKind::Norm, &mut self.ln_bias);
    }
}
