//! Network blocks, each with a forward pass that returns a cache and a
//! backward pass that accumulates into a gradient value of the same type.

pub mod conv_block;
pub mod decoder;
pub mod deltanet;
pub mod mlp;
pub mod params;

#[cfg(test)]
pub(crate) mod testutil;

pub use conv_block::ConvBlockParams;
pub use decoder::{sincos_table, DecoderKind, DecoderParams};
pub use deltanet::{DeltaNetParams, DELTANET_HEADS};
pub use mlp::{MlpParams, MLP_EXPANSION};
pub use params::{ParamKind, Parameters};
