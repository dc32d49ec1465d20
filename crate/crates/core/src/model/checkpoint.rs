//! Binary checkpoint format.
//!
//! ```text
//! "RVSO"                      4 bytes magic
//! version                     u32 LE
//! header length               u64 LE
//! header                      UTF-8 text, sections of key=value lines
//! blob                        f64 LE: parameters, then optimizer m and v
//! ```
//!
//! The header has a `[config]` section (model configuration), a
//! `[manifest]` section with one `name kind rowsxcols offset` line per
//! tensor (offset in bytes from the start of the blob, in visiting order),
//! an optional `[optimizer]` section (`step`, `m_offset`, `v_offset`) and an
//! optional `[meta]` section of free-form pairs.

use std::io::{Read, Write};
use std::path::Path;

use super::config::ModelConfig;
use super::network::Model;
use crate::error::{Error, Result};
use crate::layers::params::{assign_flat, flatten, manifest, param_count};

pub const MAGIC: &[u8; 4] = b"RVSO";
pub const FORMAT_VERSION: u32 = 1;

/// AdamW moments aligned with the flattened parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerSnapshot {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub optimizer: Option<OptimizerSnapshot>,
    pub meta: Vec<(String, String)>,
}

impl Checkpoint {
    pub fn new(model: Model) -> Self {
        Self { model, optimizer: None, meta: Vec::new() }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let params = flatten(&self.model);
        let mut header = String::from("[config]\n");
        for (k, v) in self.model.config.to_kv() {
            header.push_str(&format!("{k}={v}\n"));
        }
        header.push_str("[manifest]\n");
        let mut offset = 0usize;
        for (name, kind, (r, c)) in manifest(&self.model) {
            header.push_str(&format!("{name} {} {r}x{c} {offset}\n", kind.as_str()));
            offset += r * c * 8;
        }
        if let Some(opt) = &self.optimizer {
            if opt.m.len() != params.len() || opt.v.len() != params.len() {
                return Err(Error::InvalidArgument("optimizer moments do not match parameters".into()));
            }
            header.push_str("[optimizer]\n");
            header.push_str(&format!("step={}\n", opt.step));
            header.push_str(&format!("m_offset={}\n", params.len() * 8));
            header.push_str(&format!("v_offset={}\n", params.len() * 16));
        }
        if !self.meta.is_empty() {
            header.push_str("[meta]\n");
            for (k, v) in &self.meta {
                if k.contains(['=', '\n']) || v.contains('\n') {
                    return Err(Error::InvalidArgument(format!("meta entry {k:?} is not a single line")));
                }
                header.push_str(&format!("{k}={v}\n"));
            }
        }
        let mut out = Vec::with_capacity(16 + header.len() + params.len() * 24);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        let mut push = |xs: &[f64]| xs.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
        push(&params);
        if let Some(opt) = &self.optimizer {
            push(&opt.m);
            push(&opt.v);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("checkpoint: {m}"));
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(bad("missing RVSO magic"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let header = bytes
            .get(16..16 + hlen)
            .ok_or_else(|| bad("truncated header"))
            .and_then(|h| std::str::from_utf8(h).map_err(|_| bad("header is not UTF-8")))?;
        let blob = &bytes[16 + hlen..];
        if !blob.len().is_multiple_of(8) {
            return Err(bad("blob length is not a multiple of 8"));
        }
        let values: Vec<f64> =
            blob.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();

        let mut section = "";
        let mut config = Vec::new();
        let mut entries = Vec::new();
        let mut opt = Vec::new();
        let mut meta = Vec::new();
        for line in header.lines().filter(|l| !l.trim().is_empty()) {
            if line.starts_with('[') && line.ends_with(']') {
                section = match line {
                    "[config]" | "[manifest]" | "[optimizer]" | "[meta]" => line,
                    _ => return Err(bad(&format!("unknown section {line}"))),
                };
                continue;
            }
            let kv = || {
                line.split_once('=')
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .ok_or_else(|| bad(&format!("expected key=value, got {line:?}")))
            };
            match section {
                "[config]" => config.push(kv()?),
                "[optimizer]" => opt.push(kv()?),
                "[meta]" => meta.push(kv()?),
                "[manifest]" => entries.push(line.to_string()),
                _ => return Err(bad("content before the first section")),
            }
        }
        let config = ModelConfig::from_kv(&config)?;
        let mut model = Model::zeros(&config)?;
        let want = manifest(&model);
        if want.len() != entries.len() {
            return Err(bad("manifest does not match the configured architecture"));
        }
        let mut offset = 0usize;
        for ((name, kind, (r, c)), line) in want.iter().zip(&entries) {
            let expect = format!("{name} {} {r}x{c} {offset}", kind.as_str());
            if line.trim() != expect {
                return Err(bad(&format!("manifest entry {line:?}, expected {expect:?}")));
            }
            offset += r * c * 8;
        }
        let n = param_count(&model);
        if values.len() < n {
            return Err(bad("truncated parameter blob"));
        }
        assign_flat(&mut model, &values[..n]);
        let optimizer = if opt.is_empty() {
            if values.len() != n {
                return Err(bad("unexpected trailing data"));
            }
            None
        } else {
            let get = |k: &str| -> Result<u64> {
                opt.iter()
                    .find(|(key, _)| key == k)
                    .and_then(|(_, v)| v.parse().ok())
                    .ok_or_else(|| bad(&format!("optimizer section lacks {k}")))
            };
            if values.len() != 3 * n || get("m_offset")? != (n * 8) as u64 || get("v_offset")? != (n * 16) as u64 {
                return Err(bad("optimizer blob layout mismatch"));
            }
            Some(OptimizerSnapshot { step: get("step")?, m: values[n..2 * n].to_vec(), v: values[2 * n..].to_vec() })
        };
        Ok(Self { model, optimizer, meta })
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let bytes = ckpt.to_bytes()?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    Checkpoint::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::DecoderKind;
    use crate::model::config::{MixerVariant, Preset};
    use crate::rng::RngStream;

    fn model() -> Model {
        let mut c = ModelConfig::preset(Preset::Nano).with_context(32, 8);
        c.mixer_variant = MixerVariant::GatedDeltanet;
        c.decoder = DecoderKind::Attention;
        c.use_posemb = true;
        Model::init(&c, RngStream::new(1)).unwrap()
    }

    #[test]
    fn round_trip_with_optimizer() {
        let m = model();
        let n = m.param_count();
        let opt = OptimizerSnapshot { step: 17, m: vec![0.25; n], v: (0..n).map(|i| i as f64).collect() };
        let ck = Checkpoint { model: m, optimizer: Some(opt), meta: vec![("seed".into(), "42".into())] };
        let bytes = ck.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"RVSO");
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.meta("seed"), Some("42"));
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.rvso");
        let ck = Checkpoint::new(model());
        save_checkpoint(&path, &ck).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), ck);
    }

    #[test]
    fn header_lists_offsets() {
        let bytes = Checkpoint::new(model()).to_bytes().unwrap();
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let header = std::str::from_utf8(&bytes[16..16 + hlen]).unwrap();
        assert!(header.contains("embed.w weight 1x32 0\n"));
        assert!(header.contains("embed.b bias 1x32 256\n"));
        assert!(header.contains("dim=32\n"));
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let bytes = Checkpoint::new(model()).to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(b"NOPE").is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(Checkpoint::from_bytes(&wrong).is_err());
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 8]).is_err());
        let mut version = bytes.clone();
        version[4] = 9;
        assert!(Checkpoint::from_bytes(&version).is_err());
    }
}
