//! The assembled forecaster: embedding, mixer/MLP blocks, decoder head.

use rayon::prelude::*;

use super::config::{MixerVariant, ModelConfig, WeaveMode};
use super::loss::mae_loss;
use super::norm::{impute_and_pad, normalize, NormStats};
use crate::error::{invalid_arg, Result};
use crate::layers::conv_block::{add_into, ConvBlockCache};
use crate::layers::decoder::DecoderCache;
use crate::layers::deltanet::DeltaNetCache;
use crate::layers::mlp::MlpCache;
use crate::layers::params::{join, param_count, truncated_normal_tensor, zeros_like, ParamKind, Parameters};
use crate::layers::{ConvBlockParams, DecoderParams, DeltaNetParams, MlpParams};
use crate::numerics::Tensor2;
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq)]
pub enum Mixer {
    Conv(ConvBlockParams),
    DeltaNet(DeltaNetParams),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub mixer: Mixer,
    pub mlp: MlpParams,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    /// `1 x d` weights and bias of the scalar embedding.
    pub embed_w: Tensor2,
    pub embed_b: Tensor2,
    pub blocks: Vec<Block>,
    pub decoder: DecoderParams,
}

/// A normalized training batch.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    /// `B x L`, normalized and imputed.
    pub context: Tensor2,
    /// `B x p`, raw scale; entries under a false mask are ignored.
    pub target: Tensor2,
    pub target_mask: Vec<bool>,
    pub stats: Vec<NormStats>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.context.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.context.rows() == 0
    }
}

enum MixerCache {
    Conv(ConvBlockCache),
    DeltaNet(DeltaNetCache),
}

struct BlockCache {
    mixer: MixerCache,
    mlp: MlpCache,
    /// Block whose output supplied the weave carry, if any.
    carry_src: Option<CarrySource>,
}

#[derive(Clone, Copy)]
enum CarrySource {
    /// Row `L - 1` of this block's own input.
    Input,
    /// Row `L - 1` of the output of an earlier block.
    Block(usize),
}

pub struct ModelCache {
    context: Vec<f64>,
    blocks: Vec<BlockCache>,
    decoder: DecoderCache,
}

/// Items per gradient partial sum. Fixed so the reduction order does not
/// depend on the thread pool.
const GRAD_CHUNK: usize = 4;

impl Model {
    /// Identity-initialized model: every block is the identity and the
    /// decoder predicts zeros.
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let c = config;
        let gated = c.mixer_variant == MixerVariant::GatedDeltanet;
        let blocks = (0..c.n_layers)
            .map(|i| {
                let mixer = if c.is_deltanet_block(i) {
                    Mixer::DeltaNet(DeltaNetParams::zeros(c.dim, c.short_kernel, gated)?)
                } else {
                    Mixer::Conv(ConvBlockParams::zeros(c.context, c.dim, c.short_kernel))
                };
                Ok(Block { mixer, mlp: MlpParams::zeros(c.dim) })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config: c.clone(),
            embed_w: Tensor2::zeros(1, c.dim),
            embed_b: Tensor2::zeros(1, c.dim),
            blocks,
            decoder: DecoderParams::zeros(c.decoder, c.context, c.patch, c.dim, c.use_posemb),
        })
    }

    /// Random initialization; each tensor group draws from its own named
    /// stream so adding a block does not reshuffle the others.
    pub fn init(config: &ModelConfig, stream: RngStream) -> Result<Self> {
        let mut m = Self::zeros(config)?;
        let c = config;
        let std = c.init_std;
        let gated = c.mixer_variant == MixerVariant::GatedDeltanet;
        let mut rng = stream.named("embed").rng();
        m.embed_w = truncated_normal_tensor(1, c.dim, c.embed_std, &mut rng);
        for (i, block) in m.blocks.iter_mut().enumerate() {
            let mut rng = stream.named("block").split(i as u64).rng();
            block.mixer = match block.mixer {
                Mixer::Conv(_) => Mixer::Conv(ConvBlockParams::init(c.context, c.dim, c.short_kernel, std, &mut rng)),
                Mixer::DeltaNet(_) => {
                    Mixer::DeltaNet(DeltaNetParams::init(c.dim, c.short_kernel, gated, std, &mut rng)?)
                }
            };
            block.mlp = MlpParams::init(c.dim, std, &mut rng);
        }
        let mut rng = stream.named("decoder").rng();
        m.decoder = DecoderParams::init(c.decoder, c.context, c.patch, c.dim, c.use_posemb, std, &mut rng);
        Ok(m)
    }

    pub fn param_count(&self) -> usize {
        param_count(self)
    }

    pub fn context_len(&self) -> usize {
        self.config.context
    }

    pub fn patch_len(&self) -> usize {
        self.config.patch
    }

    fn embed(&self, context: &[f64]) -> Result<Tensor2> {
        let (l, d) = (self.config.context, self.config.dim);
        if context.len() != l {
            return Err(invalid_arg(format!("context has {} points, model expects {l}", context.len())));
        }
        let mut x = Tensor2::zeros(l, d);
        for (i, &c) in context.iter().enumerate() {
            for ((o, w), b) in x.row_mut(i).iter_mut().zip(self.embed_w.data()).zip(self.embed_b.data()) {
                *o = c * w + b;
            }
        }
        Ok(x)
    }

    /// Carry vector for DeltaNet block `i` given its input and the outputs
    /// of earlier blocks.
    fn carry_for(&self, i: usize, x: &Tensor2, outputs: &[Vec<f64>]) -> (Vec<f64>, Option<CarrySource>) {
        let d = self.config.dim;
        match self.config.weave {
            WeaveMode::Off => (vec![0.0; d], None),
            WeaveMode::Predecessor if i == 0 => (vec![0.0; d], None),
            WeaveMode::Predecessor => (x.row(x.rows() - 1).to_vec(), Some(CarrySource::Input)),
            WeaveMode::PreviousDeltanet => {
                let prev = (0..i).rev().find(|&j| matches!(self.blocks[j].mixer, Mixer::DeltaNet(_)));
                match prev {
                    Some(j) => (outputs[j].clone(), Some(CarrySource::Block(j))),
                    None => (vec![0.0; d], None),
                }
            }
        }
    }

    /// Normalized-space patch prediction for one normalized context.
    pub fn forward(&self, context: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.embed(context)?;
        let mut last_rows = Vec::with_capacity(self.blocks.len());
        for (i, block) in self.blocks.iter().enumerate() {
            x = match &block.mixer {
                Mixer::Conv(p) => p.forward(&x)?.0,
                Mixer::DeltaNet(p) => {
                    let (carry, _) = self.carry_for(i, &x, &last_rows);
                    p.forward_inference(&x, &carry, self.config.deltanet_chunk)?.0
                }
            };
            x = block.mlp.forward(&x)?.0;
            last_rows.push(x.row(x.rows() - 1).to_vec());
        }
        Ok(self.decoder.forward(&x)?.0)
    }

    /// Forward pass keeping everything needed by [`Model::backward`]. Uses
    /// the sequential DeltaNet recurrence.
    pub fn forward_train(&self, context: &[f64]) -> Result<(Vec<f64>, ModelCache)> {
        let mut x = self.embed(context)?;
        let mut last_rows = Vec::with_capacity(self.blocks.len());
        let mut caches = Vec::with_capacity(self.blocks.len());
        for (i, block) in self.blocks.iter().enumerate() {
            let (mixed, mixer, carry_src) = match &block.mixer {
                Mixer::Conv(p) => {
                    let (y, c) = p.forward(&x)?;
                    (y, MixerCache::Conv(c), None)
                }
                Mixer::DeltaNet(p) => {
                    let (carry, src) = self.carry_for(i, &x, &last_rows);
                    let (y, _, c) = p.forward(&x, &carry)?;
                    (y, MixerCache::DeltaNet(c), src)
                }
            };
            let (out, mlp) = block.mlp.forward(&mixed)?;
            x = out;
            last_rows.push(x.row(x.rows() - 1).to_vec());
            caches.push(BlockCache { mixer, mlp, carry_src });
        }
        let (y, decoder) = self.decoder.forward(&x)?;
        Ok((y, ModelCache { context: context.to_vec(), blocks: caches, decoder }))
    }

    /// Accumulates `d loss / d params` into `grads` given `dy = d loss / d y`.
    pub fn backward(&self, cache: &ModelCache, dy: &[f64], grads: &mut Model) {
        let mut dx = self.decoder.backward(&cache.decoder, dy, &mut grads.decoder);
        let last = dx.rows() - 1;
        // Gradients owed to the last row of earlier block outputs.
        let mut pending: Vec<Option<Vec<f64>>> = vec![None; self.blocks.len()];
        for i in (0..self.blocks.len()).rev() {
            if let Some(g) = pending[i].take() {
                add_into(dx.row_mut(last), &g);
            }
            let block = &self.blocks[i];
            let bc = &cache.blocks[i];
            let gblock = &mut grads.blocks[i];
            let dmixed = block.mlp.backward(&bc.mlp, &dx, &mut gblock.mlp);
            dx = match (&block.mixer, &bc.mixer, &mut gblock.mixer) {
                (Mixer::Conv(p), MixerCache::Conv(c), Mixer::Conv(g)) => p.backward(c, &dmixed, g),
                (Mixer::DeltaNet(p), MixerCache::DeltaNet(c), Mixer::DeltaNet(g)) => {
                    let (mut dxi, dcarry) = p.backward(c, &dmixed, g);
                    match bc.carry_src {
                        Some(CarrySource::Input) => add_into(dxi.row_mut(last), &dcarry),
                        Some(CarrySource::Block(j)) => {
                            let slot = pending[j].get_or_insert_with(|| vec![0.0; dcarry.len()]);
                            add_into(slot, &dcarry);
                        }
                        None => {}
                    }
                    dxi
                }
                _ => unreachable!("gradient structure mirrors parameters"),
            };
        }
        for (i, &c) in cache.context.iter().enumerate() {
            let row = dx.row(i);
            for (j, g) in row.iter().enumerate() {
                grads.embed_w.data_mut()[j] += g * c;
                grads.embed_b.data_mut()[j] += g;
            }
        }
    }

    /// Raw-space patch prediction from a raw history (uses the last `L`
    /// points; shorter histories are padded).
    pub fn predict_patch(&self, history: &[f64]) -> Result<Vec<f64>> {
        let l = self.config.context;
        let window = &history[history.len().saturating_sub(l)..];
        let (normed, stats) = normalize(window)?;
        let context = impute_and_pad(&normed, l)?;
        let y = self.forward(&context)?;
        Ok(y.iter().map(|&v| stats.unnormalize_value(v)).collect())
    }

    /// Batch MAE (raw space, mean over valid target entries) and its
    /// gradient. Items run in parallel; partial sums are reduced in a fixed
    /// order so the result is bitwise independent of the thread count.
    pub fn loss_and_grad(&self, batch: &Batch) -> Result<(f64, Model)> {
        let p = self.config.patch;
        if batch.target.cols() != p || batch.target.rows() != batch.len() || batch.stats.len() != batch.len() {
            return Err(invalid_arg("batch shapes do not match the model"));
        }
        let valid = batch.target_mask.iter().filter(|&&m| m).count();
        let items: Vec<usize> = (0..batch.len()).collect();
        let partials: Vec<Result<(f64, Model)>> = items
            .par_chunks(GRAD_CHUNK)
            .map(|chunk| {
                let mut grads = zeros_like(self);
                let mut loss = 0.0;
                for &b in chunk {
                    let (y, cache) = self.forward_train(batch.context.row(b))?;
                    let stats = batch.stats[b];
                    let pred: Vec<f64> = y.iter().map(|&v| stats.unnormalize_value(v)).collect();
                    let mask = &batch.target_mask[b * p..(b + 1) * p];
                    let (sum, dpred) = mae_loss(&pred, batch.target.row(b), mask)?;
                    loss += sum;
                    let dy: Vec<f64> = dpred.iter().map(|g| g * stats.scale()).collect();
                    self.backward(&cache, &dy, &mut grads);
                }
                Ok((loss, grads))
            })
            .collect();
        let mut total = zeros_like(self);
        let mut loss = 0.0;
        for part in partials {
            let (l, g) = part?;
            loss += l;
            crate::layers::params::accumulate(&mut total, &g, 1.0);
        }
        if valid == 0 {
            return Ok((0.0, zeros_like(self)));
        }
        let inv = 1.0 / valid as f64;
        total.visit_mut("", &mut |_, _, t| t.scale(inv));
        Ok((loss * inv, total))
    }

    /// Batch loss without gradients.
    pub fn loss(&self, batch: &Batch) -> Result<f64> {
        let p = self.config.patch;
        let valid = batch.target_mask.iter().filter(|&&m| m).count();
        if valid == 0 {
            return Ok(0.0);
        }
        let mut sum = 0.0;
        for b in 0..batch.len() {
            let y = self.forward(batch.context.row(b))?;
            let pred: Vec<f64> = y.iter().map(|&v| batch.stats[b].unnormalize_value(v)).collect();
            sum += mae_loss(&pred, batch.target.row(b), &batch.target_mask[b * p..(b + 1) * p])?.0;
        }
        Ok(sum / valid as f64)
    }
}

impl Parameters for Model {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, ParamKind, &'a Tensor2)) {
        f(join(prefix, "embed.w"), ParamKind::Weight, &self.embed_w);
        f(join(prefix, "embed.b"), ParamKind::Bias, &self.embed_b);
        for (i, b) in self.blocks.iter().enumerate() {
            let base = join(prefix, &format!("blocks.{i}"));
            match &b.mixer {
                Mixer::Conv(p) => p.visit(&join(&base, "conv"), f),
                Mixer::DeltaNet(p) => p.visit(&join(&base, "deltanet"), f),
            }
            b.mlp.visit(&join(&base, "mlp"), f);
        }
        self.decoder.visit(&join(prefix, "decoder"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, ParamKind, &mut Tensor2)) {
        f(join(prefix, "embed.w"), ParamKind::Weight, &mut self.embed_w);
        f(join(prefix, "embed.b"), ParamKind::Bias, &mut self.embed_b);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            let base = join(prefix, &format!("blocks.{i}"));
            match &mut b.mixer {
                Mixer::Conv(p) => p.visit_mut(&join(&base, "conv"), f),
                Mixer::DeltaNet(p) => p.visit_mut(&join(&base, "deltanet"), f),
            }
            b.mlp.visit_mut(&join(&base, "mlp"), f);
        }
        self.decoder.visit_mut(&join(prefix, "decoder"), f);
    }
}
