//! Named parameter traversal shared by every block.
//!
//! Gradients live in a value of the same type as the parameters (zeroed with
//! [`zeros_like`]), so the optimizer, checkpointing and gradient checks can
//! all walk parameters and gradients in the same fixed order.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::numerics::Tensor2;

/// How a tensor is treated by initialization and weight decay.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    /// Projection or convolution weights; decayed.
    Weight,
    /// Additive biases; not decayed.
    Bias,
    /// LayerNorm gains and biases and similar scalars; not decayed.
    Norm,
}

impl ParamKind {
    pub fn decays(self) -> bool {
        matches!(self, ParamKind::Weight)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ParamKind::Weight => "weight",
            ParamKind::Bias => "bias",
            ParamKind::Norm => "norm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "weight" => Some(ParamKind::Weight),
            "bias" => Some(ParamKind::Bias),
            "norm" => Some(ParamKind::Norm),
            _ => None,
        }
    }
}

pub trait Parameters {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, ParamKind, &'a Tensor2));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, ParamKind, &mut Tensor2));
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

pub fn param_count<P: Parameters + ?Sized>(p: &P) -> usize {
    let mut n = 0;
    p.visit("", &mut |_, _, t| n += t.len());
    n
}

/// All parameter values concatenated in visiting order.
pub fn flatten<P: Parameters + ?Sized>(p: &P) -> Vec<f64> {
    let mut out = Vec::with_capacity(param_count(p));
    p.visit("", &mut |_, _, t| out.extend_from_slice(t.data()));
    out
}

/// Overwrites parameters from a flat vector produced by [`flatten`].
pub fn assign_flat<P: Parameters + ?Sized>(p: &mut P, flat: &[f64]) {
    let mut off = 0;
    p.visit_mut("", &mut |_, _, t| {
        let n = t.len();
        t.data_mut().copy_from_slice(&flat[off..off + n]);
        off += n;
    });
    assert_eq!(off, flat.len(), "flat vector length mismatch");
}

/// Per-scalar decay mask aligned with [`flatten`].
pub fn decay_mask<P: Parameters + ?Sized>(p: &P) -> Vec<bool> {
    let mut out = Vec::new();
    p.visit("", &mut |_, kind, t| out.extend(std::iter::repeat_n(kind.decays(), t.len())));
    out
}

/// `(name, kind, shape)` for every tensor in visiting order.
pub fn manifest<P: Parameters + ?Sized>(p: &P) -> Vec<(String, ParamKind, (usize, usize))> {
    let mut out = Vec::new();
    p.visit("", &mut |name, kind, t| out.push((name, kind, t.shape())));
    out
}

pub fn zeros_like<P: Parameters + Clone>(p: &P) -> P {
    let mut z = p.clone();
    z.visit_mut("", &mut |_, _, t| t.fill(0.0));
    z
}

/// `acc += other * scale`, tensor by tensor.
pub fn accumulate<P: Parameters>(acc: &mut P, other: &P, scale: f64) {
    let src = flatten(other);
    let mut off = 0;
    acc.visit_mut("", &mut |_, _, t| {
        for v in t.data_mut() {
            *v += src[off] * scale;
            off += 1;
        }
    });
}

/// Draws from a normal with the given std, resampling beyond two std.
pub fn truncated_normal(rng: &mut impl Rng, std: f64) -> f64 {
    loop {
        let z: f64 = StandardNormal.sample(rng);
        if z.abs() <= 2.0 {
            return z * std;
        }
    }
}

pub fn truncated_normal_tensor(rows: usize, cols: usize, std: f64, rng: &mut impl Rng) -> Tensor2 {
    let data = (0..rows * cols).map(|_| truncated_normal(rng, std)).collect();
    Tensor2::from_vec(rows, cols, data).expect("shape")
}
