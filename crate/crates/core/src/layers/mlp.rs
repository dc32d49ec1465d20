//! Channel-mixing MLP: `x + LayerNorm(ReLU(x W_up + b_up) W_down + b_down)`.

use rand::Rng;

use super::conv_block::add_into;
use super::params::{join, truncated_normal_tensor, ParamKind, Parameters};
use crate::error::Result;
use crate::numerics::{
    layernorm, layernorm_backward, linear, linear_backward, Activation, LayerNormCache, Tensor2,
};

/// Hidden width multiplier.
pub const MLP_EXPANSION: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    pub w_up: Tensor2,
    pub b_up: Tensor2,
    pub w_down: Tensor2,
    pub b_down: Tensor2,
    pub ln_gain: Tensor2,
    pub ln_bias: Tensor2,
}

pub struct MlpCache {
    x: Tensor2,
    pre: Tensor2,
    hidden: Tensor2,
    ln: LayerNormCache,
}

impl MlpParams {
    pub fn zeros(dim: usize) -> Self {
        let h = dim * MLP_EXPANSION;
        Self {
            w_up: Tensor2::zeros(dim, h),
            b_up: Tensor2::zeros(1, h),
            w_down: Tensor2::zeros(h, dim),
            b_down: Tensor2::zeros(1, dim),
            ln_gain: Tensor2::filled(1, dim, 1.0),
            ln_bias: Tensor2::zeros(1, dim),
        }
    }

    pub fn init(dim: usize, std: f64, rng: &mut impl Rng) -> Self {
        let h = dim * MLP_EXPANSION;
        Self {
            w_up: truncated_normal_tensor(dim, h, std, rng),
            w_down: truncated_normal_tensor(h, dim, std, rng),
            ..Self::zeros(dim)
        }
    }

    pub fn forward(&self, x: &Tensor2) -> Result<(Tensor2, MlpCache)> {
        let pre = linear(x, &self.w_up, Some(self.b_up.data()))?;
        let hidden = Activation::Relu.forward(&pre);
        let m = linear(&hidden, &self.w_down, Some(self.b_down.data()))?;
        let (normed, ln) = layernorm(&m, self.ln_gain.data(), self.ln_bias.data());
        let mut out = x.clone();
        out.add_assign(&normed);
        Ok((out, MlpCache { x: x.clone(), pre, hidden, ln }))
    }

    pub fn backward(&self, cache: &MlpCache, dout: &Tensor2, grads: &mut Self) -> Tensor2 {
        let lg = layernorm_backward(&cache.ln, self.ln_gain.data(), dout);
        add_into(grads.ln_gain.data_mut(), &lg.dgain);
        add_into(grads.ln_bias.data_mut(), &lg.dbias);
        let down = linear_backward(&cache.hidden, &self.w_down, &lg.dx);
        grads.w_down.add_assign(&down.dw);
        add_into(grads.b_down.data_mut(), &down.db);
        let dpre = Activation::Relu.backward(&cache.pre, &down.dx);
        let up = linear_backward(&cache.x, &self.w_up, &dpre);
        grads.w_up.add_assign(&up.dw);
        add_into(grads.b_up.data_mut(), &up.db);
        let mut dx = dout.clone();
        dx.add_assign(&up.dx);
        dx
    }
}

impl Parameters for MlpParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, ParamKind, &'a Tensor2)) {
        f(join(prefix, "w_up"), ParamKind::Weight, &self.w_up);
        f(join(prefix, "b_up"), ParamKind::Bias, &self.b_up);
        f(join(prefix, "w_down"), ParamKind::Weight, &self.w_down);
        f(join(prefix, "b_down"), ParamKind::Bias, &self.b_down);
        f(join(prefix, "ln_gain"), ParamKind::Norm, &self.ln_gain);
        f(join(prefix, "ln_bias"), ParamKind::Norm, &self.ln_bias);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, ParamKind, &mut Tensor2)) {
        f(join(prefix, "w_up"), ParamKind::Weight, &mut self.w_up);
        f(join(prefix, "b_up"), ParamKind::Bias, &mut self.b_up);
        f(join(prefix, "w_down"), ParamKind::Weight, &mut self.w_down);
        f(join(prefix, "b_down"), ParamKind::Bias, &mut self.b_down);
        f(join(prefix, "ln_gain"), ParamKind::Norm, &mut self.ln_gain);
        f(join(prefix, "ln_bias"), ParamKind::Norm, &mut self.ln_bias);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::params::{assign_flat, flatten, zeros_like};
    use crate::layers::testutil::{random_tensor, randomize};
    use crate::numerics::grad_check;
    use crate::rng::RngStream;

    #[test]
    fn zero_weights_are_identity() {
        let mut rng = RngStream::new(1).rng();
        let x = random_tensor(5, 3, &mut rng);
        let (y, _) = MlpParams::zeros(3).forward(&x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn single_position_hand_case() {
        // d = 1, hidden = 4: LayerNorm over one channel always yields the bias.
        let mut p = MlpParams::zeros(1);
        p.w_up = Tensor2::row_vector(&[1.0, -1.0, 2.0, 0.5]);
        p.w_down = Tensor2::column(&[1.0, 1.0, 1.0, 1.0]);
        p.ln_bias = Tensor2::row_vector(&[0.25]);
        let (y, _) = p.forward(&Tensor2::row_vector(&[3.0])).unwrap();
        assert!((y.get(0, 0) - 3.25).abs() < 1e-15);

        // d = 2 hand evaluation of relu(x W_up) W_down, then normalize.
        let mut p = MlpParams::zeros(2);
        p.w_up.set(0, 0, 1.0);
        p.w_up.set(1, 1, -1.0);
        p.w_down.set(0, 0, 2.0);
        p.w_down.set(1, 1, 1.0);
        let x = Tensor2::row_vector(&[1.0, -3.0]);
        // hidden = [1, 3, 0...], m = [2, 3] -> normalized [-1, 1]
        let (y, _) = p.forward(&x).unwrap();
        assert!((y.get(0, 0) - 0.0).abs() < 1e-12);
        assert!((y.get(0, 1) - -2.0).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_fd() {
        let mut rng = RngStream::new(2).rng();
        let (l, d) = (4, 3);
        let mut p = MlpParams::zeros(d);
        randomize(&mut p, &mut rng);
        let x = random_tensor(l, d, &mut rng);
        let proj = random_tensor(l, d, &mut rng);
        let loss = |p: &MlpParams, x: &Tensor2| {
            let (y, _) = p.forward(x).unwrap();
            y.data().iter().zip(proj.data()).map(|(a, b)| a * b).sum::<f64>()
        };
        let (_, cache) = p.forward(&x).unwrap();
        let mut grads = zeros_like(&p);
        let dx = p.backward(&cache, &proj, &mut grads);
        let fp = |t: &[f64]| {
            let mut q = p.clone();
            assign_flat(&mut q, t);
            loss(&q, &x)
        };
        assert!(grad_check(fp, &flatten(&p), &flatten(&grads)) < 1e-4);
        let fx = |t: &[f64]| loss(&p, &Tensor2::from_vec(l, d, t.to_vec()).unwrap());
        assert!(grad_check(fx, x.data(), dx.data()) < 1e-4);
    }
}
