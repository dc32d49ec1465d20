//! Deterministic double-precision kernels with analytic backward passes.

pub mod activation;
pub mod attention;
pub mod conv;
pub mod fft;
pub mod gradcheck;
pub mod layernorm;
pub mod linear;
pub mod tensor;

pub use activation::{relu, sigmoid, silu, Activation};
pub use attention::{softmax_attention, softmax_attention_backward, AttentionCache};
pub use conv::{causal_conv_direct, causal_conv_direct_backward, causal_conv_fft, causal_conv_fft_backward};
pub use fft::{dft, irfft, rfft, FftPlan};
pub use gradcheck::{grad_check, numeric_grad};
pub use layernorm::{layernorm, layernorm_backward, LayerNormCache, LN_EPS};
pub use linear::{linear, linear_backward, matmul, matmul_nt, matmul_tn};
pub use tensor::Tensor2;
