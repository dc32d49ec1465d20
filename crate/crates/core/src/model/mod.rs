//! The assembled forecaster, its configuration, normalization, loss and
//! checkpoint format.

pub mod checkpoint;
pub mod config;
pub mod loss;
pub mod network;
pub mod norm;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, OptimizerSnapshot};
pub use config::{MixerPattern, MixerVariant, ModelConfig, Preset, WeaveMode};
pub use loss::{mae_loss, masked_mae};
pub use network::{Batch, Block, Mixer, Model, ModelCache};
pub use norm::{impute, impute_and_pad, normalize, unnormalize, NormStats};
