//! Training loop: prefetched augmented batches, AdamW under a WSD schedule,
//! metrics CSV and resumable checkpoints.

pub mod optim;

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::mpsc::sync_channel;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::augment::{plan_sampler, AugmentConfig, BatchBuilder};
use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::layers::params::{assign_flat, decay_mask, flatten};
use crate::model::{save_checkpoint, Batch, Checkpoint, Model, ModelConfig, OptimizerSnapshot, Preset};
use crate::rng::RngStream;

pub use optim::{adamw_step, clip_global_norm, wsd_lr, AdamWConfig, OptimState, ScheduleConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub augment: AugmentConfig,
    pub schedule: ScheduleConfig,
    pub optimizer: AdamWConfig,
    pub steps: u64,
    pub batch_size: usize,
    /// Micro-batches averaged per optimizer step.
    pub grad_accum: usize,
    pub clip_norm: f64,
    pub seed: u64,
    /// Metrics CSV row interval.
    pub log_every: u64,
    /// Checkpoint interval; 0 writes only the final checkpoint.
    pub checkpoint_every: u64,
    pub n_max: usize,
    pub series_cap: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::preset(Preset::Nano).with_context(512, 48),
            augment: AugmentConfig::default(),
            schedule: ScheduleConfig::default(),
            optimizer: AdamWConfig::default(),
            steps: 1000,
            batch_size: 64,
            grad_accum: 1,
            clip_norm: 1.0,
            seed: 0,
            log_every: 10,
            checkpoint_every: 0,
            n_max: crate::augment::sampler::DEFAULT_N_MAX,
            series_cap: crate::augment::sampler::DEFAULT_SERIES_CAP,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.augment.validate()?;
        self.schedule.validate()?;
        if self.batch_size == 0 || self.grad_accum == 0 {
            return Err(Error::Config("batch_size and grad_accum must be positive".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::Config("clip_norm must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub step: u64,
    pub lr: f64,
    pub loss: f64,
    pub grad_norm: f64,
    pub wallclock_s: f64,
}

#[derive(Default)]
pub struct TrainOptions<'a> {
    /// Metrics CSV, checkpoints and divergence dumps go here.
    pub out_dir: Option<PathBuf>,
    /// Continue from this checkpoint (must carry optimizer state).
    pub resume: Option<Checkpoint>,
    /// Stop after this many total steps instead of `cfg.steps` (the
    /// schedule still spans `cfg.steps`).
    pub stop_at: Option<u64>,
    pub progress: Option<&'a (dyn Fn(&LogRecord) + Sync)>,
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    /// One record per optimizer step run.
    pub log: Vec<LogRecord>,
}

pub fn checkpoint_name(step: u64) -> String {
    format!("ckpt-{step:07}.rvso")
}

fn write_checkpoint(dir: &Path, ck: &Checkpoint, step: u64) -> Result<()> {
    save_checkpoint(dir.join(checkpoint_name(step)), ck)?;
    save_checkpoint(dir.join("last.rvso"), ck)
}

fn batch_json(b: &Batch) -> serde_json::Value {
    let rows = |t: &crate::numerics::Tensor2| -> Vec<Vec<f64>> { (0..t.rows()).map(|r| t.row(r).to_vec()).collect() };
    serde_json::json!({
        "context": rows(&b.context),
        "target": rows(&b.target),
        "target_mask": b.target_mask,
        "stats": b.stats,
    })
}

fn lists_of(corpus: &[Dataset]) -> Vec<(String, Vec<usize>)> {
    corpus.iter().map(|d| (d.id.clone(), d.series.iter().map(|s| s.len()).collect())).collect()
}

fn snapshot(model: &Model, state: &OptimState, cfg: &TrainConfig) -> Result<Checkpoint> {
    Ok(Checkpoint {
        model: model.clone(),
        optimizer: Some(OptimizerSnapshot { step: state.step, m: state.m.clone(), v: state.v.clone() }),
        meta: vec![
            ("step".into(), state.step.to_string()),
            ("seed".into(), cfg.seed.to_string()),
            ("train_config".into(), serde_json::to_string(cfg)?),
        ],
    })
}

/// Mean loss and gradient over the micro-batches of one step.
fn step_gradient(model: &Model, batches: &[Batch]) -> Result<(f64, Vec<f64>)> {
    let mut loss = 0.0;
    let mut grad = vec![0.0; model.param_count()];
    for b in batches {
        let (l, g) = model.loss_and_grad(b)?;
        loss += l;
        for (acc, x) in grad.iter_mut().zip(flatten(&g)) {
            *acc += x;
        }
    }
    let inv = 1.0 / batches.len() as f64;
    grad.iter_mut().for_each(|x| *x *= inv);
    Ok((loss * inv, grad))
}

/// Runs (or resumes) training. Given the same seed, config and corpus the
/// result is bitwise reproducible regardless of the rayon thread count,
/// and a resumed run continues exactly where the checkpoint left off.
pub fn train(cfg: &TrainConfig, corpus: &[Dataset], opts: TrainOptions<'_>) -> Result<TrainOutcome> {
    cfg.validate()?;
    let root = RngStream::new(cfg.seed);
    let (mut model, mut state) = match opts.resume {
        Some(ck) => {
            if ck.model.config != cfg.model {
                return Err(Error::Config("checkpoint model configuration differs from the training config".into()));
            }
            let opt = ck.optimizer.ok_or_else(|| Error::InvalidInput("checkpoint has no optimizer state".into()))?;
            (ck.model, OptimState { step: opt.step, m: opt.m, v: opt.v })
        }
        None => {
            let model = Model::init(&cfg.model, root.named("init"))?;
            let n = model.param_count();
            (model, OptimState::new(n))
        }
    };
    let decay = decay_mask(&model);
    let plan = plan_sampler(&lists_of(corpus), cfg.n_max, cfg.series_cap)?;
    let builder = BatchBuilder::new(
        corpus,
        plan,
        cfg.augment.clone(),
        root.named("data"),
        cfg.batch_size,
        cfg.model.context,
        cfg.model.patch,
    )?;

    let mut metrics = match &opts.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join("metrics.csv");
            let fresh = !path.exists();
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            if fresh {
                writeln!(f, "step,lr,loss,grad_norm,wallclock_s")?;
            }
            Some(f)
        }
        None => None,
    };

    let start = state.step;
    let end = opts.stop_at.unwrap_or(cfg.steps).min(cfg.steps);
    let accum = cfg.grad_accum as u64;
    let clock = Instant::now();
    let mut log = Vec::new();

    std::thread::scope(|scope| -> Result<()> {
        let (tx, rx) = sync_channel::<Result<Batch>>(2 * cfg.grad_accum);
        let builder = &builder;
        scope.spawn(move || {
            for micro in start * accum..end * accum {
                if tx.send(builder.batch(micro)).is_err() {
                    break;
                }
            }
        });

        for step in start..end {
            let batches = (0..accum)
                .map(|_| rx.recv().map_err(|_| Error::InvalidInput("batch producer stopped".into()))?)
                .collect::<Result<Vec<Batch>>>()?;
            let lr = wsd_lr(step, cfg.steps, &cfg.schedule);
            let (loss, mut grad) = step_gradient(&model, &batches)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                let mut detail = format!("loss = {loss}");
                if let Some(dir) = &opts.out_dir {
                    let path = dir.join("diverged-batch.json");
                    let dump = serde_json::Value::Array(batches.iter().map(batch_json).collect());
                    std::fs::write(&path, serde_json::to_string(&dump)?)?;
                    detail.push_str(&format!("; batch written to {}", path.display()));
                }
                return Err(Error::Diverged { step: step as usize, detail });
            }
            let grad_norm = clip_global_norm(&mut grad, cfg.clip_norm);
            let mut params = flatten(&model);
            adamw_step(&mut params, &grad, &decay, &mut state, lr, &cfg.optimizer)?;
            assign_flat(&mut model, &params);

            let rec = LogRecord { step, lr, loss, grad_norm, wallclock_s: clock.elapsed().as_secs_f64() };
            let done = step + 1;
            if let Some(f) = metrics.as_mut() {
                if done % cfg.log_every.max(1) == 0 || done == end {
                    writeln!(f, "{},{},{},{},{}", rec.step, rec.lr, rec.loss, rec.grad_norm, rec.wallclock_s)?;
                }
            }
            if let Some(cb) = opts.progress {
                if done % cfg.log_every.max(1) == 0 || done == end {
                    cb(&rec);
                }
            }
            log.push(rec);
            if let Some(dir) = &opts.out_dir {
                if cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && done != end {
                    write_checkpoint(dir, &snapshot(&model, &state, cfg)?, done)?;
                }
            }
        }
        drop(rx);
        Ok(())
    })?;

    let checkpoint = snapshot(&model, &state, cfg)?;
    if let Some(dir) = &opts.out_dir {
        write_checkpoint(dir, &checkpoint, state.step)?;
    }
    Ok(TrainOutcome { checkpoint, log })
}

/// Repeatedly steps on one fixed batch at a constant learning rate and
/// returns the loss before each step.
pub fn overfit_batch(model: &mut Model, batch: &Batch, steps: usize, lr: f64, opt: &AdamWConfig) -> Result<Vec<f64>> {
    let decay = decay_mask(model);
    let mut state = OptimState::new(model.param_count());
    let mut losses = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (loss, g) = model.loss_and_grad(batch)?;
        losses.push(loss);
        let mut params = flatten(model);
        adamw_step(&mut params, &flatten(&g), &decay, &mut state, lr, opt)?;
        assign_flat(model, &params);
    }
    Ok(losses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Series, Source};
    use crate::synthgen::sinusoid;

    fn tiny_cfg() -> TrainConfig {
        let mut model = ModelConfig::preset(Preset::Nano).with_context(32, 8);
        model.dim = 8;
        TrainConfig { model, steps: 6, batch_size: 4, log_every: 1, ..Default::default() }
    }

    fn corpus() -> Vec<Dataset> {
        let series =
            (0..6).map(|i| Series::new(format!("s{i}"), Source::Real, sinusoid(120, 10.0 + i as f64, 1.0, 0.2 * i as f64, 3.0))).collect();
        vec![Dataset::new("toy", series)]
    }

    #[test]
    fn config_json() {
        let c = tiny_cfg();
        let back = TrainConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(TrainConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert_eq!(TrainConfig::from_json("{}").unwrap(), TrainConfig::default());
    }

    #[test]
    fn lr_trace_follows_schedule() {
        let c = tiny_cfg();
        let out = train(&c, &corpus(), TrainOptions::default()).unwrap();
        assert_eq!(out.log.len(), 6);
        for r in &out.log {
            assert_eq!(r.lr, wsd_lr(r.step, 6, &c.schedule));
        }
        assert_eq!(out.checkpoint.optimizer.as_ref().unwrap().step, 6);
    }

    #[test]
    fn resume_is_bitwise() {
        let c = tiny_cfg();
        let full = train(&c, &corpus(), TrainOptions::default()).unwrap();
        let half = train(&c, &corpus(), TrainOptions { stop_at: Some(3), ..Default::default() }).unwrap();
        let rest = train(&c, &corpus(), TrainOptions { resume: Some(half.checkpoint), ..Default::default() }).unwrap();
        assert_eq!(rest.log[0].step, 3);
        for (a, b) in full.log[3..].iter().zip(&rest.log) {
            assert_eq!(a.loss.to_bits(), b.loss.to_bits());
        }
        assert_eq!(full.checkpoint.to_bytes().unwrap(), rest.checkpoint.to_bytes().unwrap());
    }

    #[test]
    fn writes_metrics_and_checkpoints() {
        let dir = tempfile::tempdir().unwrap();
        let c = TrainConfig { checkpoint_every: 2, ..tiny_cfg() };
        train(&c, &corpus(), TrainOptions { out_dir: Some(dir.path().into()), ..Default::default() }).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.starts_with("step,lr,loss,grad_norm,wallclock_s\n"));
        for s in [2, 4, 6] {
            assert!(dir.path().join(checkpoint_name(s)).exists());
        }
        let last = crate::model::load_checkpoint(dir.path().join("last.rvso")).unwrap();
        assert_eq!(last.meta("step"), Some("6"));
    }

    #[test]
    fn divergence_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let mut bad = corpus();
        for s in &mut bad[0].series {
            s.values = [1e308, -1e308, 1e308, -1e308].repeat(30);
        }
        let c = TrainConfig { augment: AugmentConfig::disabled(), ..tiny_cfg() };
        let err = train(&c, &bad, TrainOptions { out_dir: Some(dir.path().into()), ..Default::default() });
        match err {
            Err(Error::Diverged { step, .. }) => assert_eq!(step, 0),
            other => panic!("expected divergence, got {:?}", other.map(|o| o.log.len())),
        }
        assert!(dir.path().join("diverged-batch.json").exists());
    }
}
