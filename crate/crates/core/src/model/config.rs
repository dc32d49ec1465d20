//! Architecture hyperparameters and presets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{DecoderKind, DELTANET_HEADS};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixerVariant {
    #[default]
    Deltanet,
    GatedDeltanet,
}

/// Which sequence mixer each block uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixerPattern {
    /// Long convolution on even blocks, DeltaNet on odd blocks.
    #[default]
    Alternating,
    ConvOnly,
    DeltanetOnly,
}

/// Source of the vector added to position 0 before each DeltaNet block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeaveMode {
    /// Last position of the tensor entering the block.
    #[default]
    Predecessor,
    /// Last position of the previous DeltaNet block's output.
    PreviousDeltanet,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Nano,
    Small,
    Base,
}

impl Preset {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nano" => Some(Preset::Nano),
            "small" => Some(Preset::Small),
            "base" => Some(Preset::Base),
            _ => None,
        }
    }

    /// `(n_layers, dim)`.
    pub fn shape(self) -> (usize, usize) {
        match self {
            Preset::Nano => (2, 32),
            Preset::Small => (4, 64),
            Preset::Base => (8, 128),
        }
    }

    /// Published parameter count for the preset at `L = 2048`, `p = 48`.
    pub fn reference_params(self) -> usize {
        match self {
            Preset::Nano => 200_000,
            Preset::Small => 550_000,
            Preset::Base => 2_600_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub dim: usize,
    pub context: usize,
    pub patch: usize,
    pub n_heads: usize,
    pub short_kernel: usize,
    pub mixer_pattern: MixerPattern,
    pub mixer_variant: MixerVariant,
    pub decoder: DecoderKind,
    pub use_posemb: bool,
    pub weave: WeaveMode,
    /// Chunk size of the inference-time DeltaNet path; 0 runs the
    /// sequential recurrence.
    pub deltanet_chunk: usize,
    pub init_std: f64,
    /// Std of the 1 -> d embedding weights.
    pub embed_std: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::preset(Preset::Nano)
    }
}

impl ModelConfig {
    pub fn preset(p: Preset) -> Self {
        let (n_layers, dim) = p.shape();
        Self {
            n_layers,
            dim,
            context: 2048,
            patch: 48,
            n_heads: DELTANET_HEADS,
            short_kernel: 4,
            mixer_pattern: MixerPattern::Alternating,
            mixer_variant: MixerVariant::Deltanet,
            decoder: DecoderKind::Attention,
            use_posemb: false,
            weave: WeaveMode::Predecessor,
            deltanet_chunk: 64,
            init_std: 0.02,
            embed_std: 1.0,
        }
    }

    pub fn with_context(mut self, context: usize, patch: usize) -> Self {
        self.context = context;
        self.patch = patch;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_layers == 0 || self.dim == 0 {
            return fail("n_layers and dim must be positive".into());
        }
        if self.patch == 0 || self.patch > self.context {
            return fail(format!("need 1 <= patch <= context, got patch {} context {}", self.patch, self.context));
        }
        if self.n_heads != DELTANET_HEADS {
            return fail(format!("n_heads is fixed at {DELTANET_HEADS}"));
        }
        if !self.dim.is_multiple_of(self.n_heads) {
            return fail(format!("dim {} not divisible by {} heads", self.dim, self.n_heads));
        }
        if self.short_kernel == 0 || self.short_kernel > self.context {
            return fail(format!("short kernel {} out of range", self.short_kernel));
        }
        if !(self.init_std > 0.0 && self.embed_std > 0.0) {
            return fail("init std must be positive".into());
        }
        Ok(())
    }

    /// Whether block `i` mixes with DeltaNet (otherwise the long convolution).
    pub fn is_deltanet_block(&self, i: usize) -> bool {
        match self.mixer_pattern {
            MixerPattern::Alternating => i % 2 == 1,
            MixerPattern::ConvOnly => false,
            MixerPattern::DeltanetOnly => true,
        }
    }

    /// `key=value` lines, in a fixed order.
    pub fn to_kv(&self) -> Vec<(String, String)> {
        let v = serde_json::to_value(self).expect("config serializes");
        let obj = v.as_object().expect("object");
        obj.iter()
            .map(|(k, v)| {
                let s = match v {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                (k.clone(), s)
            })
            .collect()
    }

    pub fn from_kv(pairs: &[(String, String)]) -> Result<Self> {
        let mut obj = serde_json::Map::new();
        for (k, v) in pairs {
            let val = serde_json::from_str(v).unwrap_or_else(|_| serde_json::Value::String(v.clone()));
            obj.insert(k.clone(), val);
        }
        let cfg: Self = serde_json::from_value(serde_json::Value::Object(obj))
            .map_err(|e| Error::Format(format!("model config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
