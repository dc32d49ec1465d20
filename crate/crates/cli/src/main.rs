use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use tsfm::augment::{plan_sampler, AugmentConfig, BatchBuilder};
use tsfm::corpus::{read_csv_series, read_jsonl_series, save_corpus, Dataset};
use tsfm::harness::{self, load_dataset, load_tasks, TaskData};
use tsfm::inference::{forecast, FlipMode, InferenceConfig, SeasonalNaive};
use tsfm::layers::params::manifest;
use tsfm::model::{load_checkpoint, Model, ModelConfig, Preset};
use tsfm::synthgen::{generate_corpus, SynthConfig};
use tsfm::trainer::{train, TrainConfig, TrainOptions};
use tsfm::RngStream;

#[derive(Parser)]
#[command(name = "tsfm", version, about = "Train, run and evaluate small time-series forecasters")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
    /// Preview augmented training windows as JSON lines.
    Augment(AugmentArgs),
    /// Train a model.
    Train(TrainArgs),
    /// Forecast one series.
    Forecast(ForecastArgs),
    /// Evaluate on a task list.
    Eval(EvalArgs),
    /// Describe a checkpoint or preset.
    Inspect(InspectArgs),
    /// Emit a forecast-vs-actual CSV for plotting.
    Plotdata(PlotArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output file; `.tscb` writes the binary format, anything else NDJSON.
    #[arg(short, long)]
    out: PathBuf,
    /// JSON synthesis config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    length: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct AugmentArgs {
    /// Corpus or series files, one dataset each.
    #[arg(long = "corpus", required = true)]
    corpora: Vec<PathBuf>,
    /// JSON augmentation config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    batch_size: usize,
    #[arg(long, default_value_t = 512)]
    context: usize,
    #[arg(long, default_value_t = 48)]
    patch: usize,
    #[arg(long, default_value_t = 1)]
    batches: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    /// JSON training config (defaults apply to missing keys).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "corpus", required = true)]
    corpora: Vec<PathBuf>,
    /// Output directory for metrics and checkpoints.
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Rayon worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Flip {
    None,
    Once,
    Every,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Args, Clone)]
struct InferArgs {
    #[arg(long, value_enum, default_value = "none")]
    flip: Flip,
    #[arg(long, value_enum, default_value = "off")]
    downsample: OnOff,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long, default_value_t = 4.0)]
    beta: f64,
    /// Full periods the downsampled context should hold.
    #[arg(long, default_value_t = 8)]
    min_periods: usize,
}

impl InferArgs {
    fn config(&self) -> Result<InferenceConfig> {
        let cfg = InferenceConfig {
            flip: match self.flip {
                Flip::None => FlipMode::None,
                Flip::Once => FlipMode::Once,
                Flip::Every => FlipMode::Every,
            },
            downsample: matches!(self.downsample, OnOff::On),
            alpha: self.alpha,
            beta: self.beta,
            min_periods: self.min_periods,
            ..InferenceConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct ForecastArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// CSV or JSONL series file, or `-` for one number per line on stdin.
    #[arg(long, default_value = "-")]
    input: String,
    #[arg(long)]
    horizon: usize,
    #[command(flatten)]
    infer: InferArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Model checkpoint; without one the seasonal-naive baseline is scored.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Task list CSV: dataset, frequency, horizon_class, horizon, s_naive.
    #[arg(long)]
    tasks: PathBuf,
    /// Results CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Context length of the baseline.
    #[arg(long, default_value_t = 512)]
    baseline_context: usize,
    #[command(flatten)]
    infer: InferArgs,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long, conflicts_with = "preset")]
    checkpoint: Option<PathBuf>,
    /// nano, small or base.
    #[arg(long)]
    preset: Option<String>,
    /// List every parameter tensor.
    #[arg(long)]
    tensors: bool,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Series file; its last `horizon` points are the actuals.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    horizon: usize,
    /// History points to include before the forecast.
    #[arg(long, default_value_t = 512)]
    tail: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    infer: InferArgs,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_datasets(paths: &[PathBuf]) -> Result<Vec<Dataset>> {
    paths
        .iter()
        .map(|p| {
            let series = load_dataset(p).with_context(|| format!("loading {}", p.display()))?;
            let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset").to_string();
            Ok(Dataset::new(id, series))
        })
        .collect()
}

fn read_series_input(input: &str) -> Result<Vec<f64>> {
    if input != "-" {
        let series = load_dataset(input).with_context(|| format!("loading {input}"))?;
        return match series.into_iter().next() {
            Some(s) => Ok(s.values),
            None => bail!("{input} holds no series"),
        };
    }
    let mut text = String::new();
    std::io::stdin().read_to_string(&mut text)?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let values = if first.trim_start().starts_with('{') {
        read_jsonl_series(BufReader::new(text.as_bytes()))?
    } else if first.contains(',') || first.chars().any(|c| c.is_ascii_alphabetic() && c != 'e' && c != 'E') {
        read_csv_series(text.as_bytes())?
    } else {
        text.as_bytes()
            .lines()
            .map_while(|l| l.ok())
            .filter(|l| !l.trim().is_empty())
            .map(|l| match l.trim() {
                "" | "nan" | "NaN" | "null" => Ok(f64::NAN),
                t => t.parse::<f64>().with_context(|| format!("not a number: {t:?}")),
            })
            .collect::<Result<_>>()?
    };
    Ok(values)
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg: SynthConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => SynthConfig::default(),
    };
    if let Some(c) = a.count {
        cfg.count = c;
    }
    if let Some(l) = a.length {
        cfg.length = l;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let series = generate_corpus(&cfg)?;
    save_corpus(&a.out, &series)?;
    eprintln!("wrote {} series of length {} to {}", series.len(), cfg.length, a.out.display());
    Ok(())
}

fn augment(a: AugmentArgs) -> Result<()> {
    let cfg: AugmentConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => AugmentConfig::default(),
    };
    let data = load_datasets(&a.corpora)?;
    let lens: Vec<(String, Vec<usize>)> =
        data.iter().map(|d| (d.id.clone(), d.series.iter().map(|s| s.len()).collect())).collect();
    let plan = plan_sampler(&lens, tsfm::augment::sampler::DEFAULT_N_MAX, tsfm::augment::sampler::DEFAULT_SERIES_CAP)?;
    for d in &plan.datasets {
        eprintln!("dataset {}: stride {}, {} windows per epoch", d.id, d.stride, d.total_windows());
    }
    let builder = BatchBuilder::new(&data, plan, cfg, RngStream::new(a.seed).named("data"), a.batch_size, a.context, a.patch)?;
    let mut out = std::io::stdout().lock();
    for step in 0..a.batches {
        let raw = builder.raw_batch(step);
        for ((w, r), trace) in raw.windows.iter().zip(&raw.refs).zip(&raw.traces) {
            let d = &data[r.dataset];
            let rec = serde_json::json!({
                "step": step,
                "dataset": d.id,
                "series": d.series[r.series].id,
                "stages": trace,
                "context": w[..a.context].iter().map(|v| v.is_finite().then_some(*v)).collect::<Vec<_>>(),
                "target": w[a.context..].iter().map(|v| v.is_finite().then_some(*v)).collect::<Vec<_>>(),
            });
            writeln!(out, "{rec}")?;
        }
    }
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    if a.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(a.threads).build_global()?;
    }
    let mut cfg: TrainConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = a.steps {
        cfg.steps = s;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let data = load_datasets(&a.corpora)?;
    let resume = a.resume.as_ref().map(load_checkpoint).transpose()?;
    let progress = |r: &tsfm::trainer::LogRecord| {
        eprintln!("step {:>7}  lr {:.3e}  loss {:.5}  grad {:.3}  {:.1}s", r.step + 1, r.lr, r.loss, r.grad_norm, r.wallclock_s)
    };
    let out = train(&cfg, &data, TrainOptions { out_dir: Some(a.out.clone()), resume, stop_at: None, progress: Some(&progress) })?;
    eprintln!(
        "finished at step {}; checkpoint {}",
        out.checkpoint.optimizer.as_ref().map_or(0, |o| o.step),
        a.out.join("last.rvso").display()
    );
    Ok(())
}

fn forecast_cmd(a: ForecastArgs) -> Result<()> {
    let model = load_checkpoint(&a.checkpoint)?.model;
    let history = read_series_input(&a.input)?;
    let cfg = a.infer.config()?;
    let start = std::time::Instant::now();
    let out = forecast(&model, model.context_len(), &history, a.horizon, &cfg, None)?;
    let resp = serde_json::json!({
        "forecast": out.values,
        "stride": out.stride,
        "seasonality": out.seasonality,
        "elapsed_ms": start.elapsed().as_secs_f64() * 1e3,
    });
    println!("{resp}");
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let cfg = a.infer.config()?;
    let tasks: Vec<TaskData> = load_tasks(&a.tasks)?.into_iter().map(TaskData::load).collect::<tsfm::Result<_>>()?;
    let result = match &a.checkpoint {
        Some(p) => {
            let model = load_checkpoint(p)?.model;
            harness::run_benchmark(&model, model.context_len(), &tasks, &cfg)?
        }
        None => {
            let ctx = a.baseline_context;
            // each task scores the naive forecaster with its own season
            let results = tasks
                .iter()
                .map(|t| {
                    let sn = SeasonalNaive { period: Some(t.task.s_naive), context: ctx, patch: t.task.horizon };
                    harness::run_task(&sn, ctx, t, &cfg)
                })
                .collect::<tsfm::Result<Vec<_>>>()?;
            harness::aggregate(results)
        }
    };
    print!("{}", harness::summary(&result));
    if let Some(out) = &a.out {
        std::fs::write(out, harness::results_csv(&result))?;
    }
    Ok(())
}

fn describe(model: &Model, tensors: bool) {
    let c = &model.config;
    println!("parameters: {}", model.param_count());
    println!(
        "layers {}  dim {}  context {}  patch {}  mixer {:?}/{:?}  decoder {}  weave {:?}",
        c.n_layers,
        c.dim,
        c.context,
        c.patch,
        c.mixer_pattern,
        c.mixer_variant,
        c.decoder.as_str(),
        c.weave
    );
    if tensors {
        for (name, kind, (r, cc)) in manifest(model) {
            println!("  {name:<32} {:<7} {r}x{cc}", kind.as_str());
        }
    }
}

fn inspect(a: InspectArgs) -> Result<()> {
    match (&a.checkpoint, &a.preset) {
        (Some(p), _) => {
            let ck = load_checkpoint(p)?;
            describe(&ck.model, a.tensors);
            if let Some(o) = &ck.optimizer {
                println!("optimizer step: {}", o.step);
            }
            for (k, v) in &ck.meta {
                if k != "train_config" {
                    println!("{k}: {v}");
                }
            }
        }
        (None, Some(name)) => {
            let preset = Preset::parse(name).with_context(|| format!("unknown preset {name:?} (nano, small, base)"))?;
            let model = Model::zeros(&ModelConfig::preset(preset))?;
            describe(&model, a.tensors);
            println!("reference size: {}", preset.reference_params());
        }
        (None, None) => bail!("give --checkpoint or --preset"),
    }
    Ok(())
}

fn plotdata(a: PlotArgs) -> Result<()> {
    let model = load_checkpoint(&a.checkpoint)?.model;
    let series = load_dataset(&a.input)?.into_iter().next().context("input holds no series")?;
    if series.len() <= a.horizon {
        bail!("series of length {} is not longer than the horizon {}", series.len(), a.horizon);
    }
    let (hist, actual) = series.values.split_at(series.len() - a.horizon);
    let out = forecast(&model, model.context_len(), hist, a.horizon, &a.infer.config()?, None)?;
    let csv = harness::plot_csv(hist, actual, &out.values, a.tail);
    match &a.out {
        Some(p) => std::fs::write(p, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Synth(a) => synth(a),
        Cmd::Augment(a) => augment(a),
        Cmd::Train(a) => train_cmd(a),
        Cmd::Forecast(a) => forecast_cmd(a),
        Cmd::Eval(a) => eval_cmd(a),
        Cmd::Inspect(a) => inspect(a),
        Cmd::Plotdata(a) => plotdata(a),
    }
}
