//! Elementwise activations and their derivatives.

use super::tensor::Tensor2;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn sigmoid_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

#[inline]
pub fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

#[inline]
pub fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

#[inline]
pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Subgradient 0 at the kink.
#[inline]
pub fn relu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Which pointwise nonlinearity to apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Silu,
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Silu => silu(x),
            Activation::Relu => relu(x),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Silu => silu_grad(x),
            Activation::Relu => relu_grad(x),
            Activation::Sigmoid => sigmoid_grad(x),
        }
    }

    pub fn forward(self, x: &Tensor2) -> Tensor2 {
        x.map(|v| self.apply(v))
    }

    /// Gradient w.r.t. the pre-activation input `x`.
    pub fn backward(self, x: &Tensor2, dy: &Tensor2) -> Tensor2 {
        let mut out = dy.clone();
        for (o, &v) in out.data_mut().iter_mut().zip(x.data()) {
            *o *= self.derivative(v);
        }
        out
    }
}
