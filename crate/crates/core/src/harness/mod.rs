//! Benchmark evaluation: MASE/MAE over (dataset, horizon) tasks, result
//! tables and plot data.

pub mod metrics;
pub mod tasks;
pub mod toy;

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Series;
use crate::error::{Error, Result};
use crate::inference::{
    dataset_stride_average, detect_seasonality, effective_stride, forecast, InferenceConfig, PatchForecaster,
    SeasonalityReport,
};

pub use metrics::{mae, mase, seasonal_naive_scale};
pub use tasks::{load_dataset, load_tasks, read_tasks, seasonal_period, HorizonClass, Task};

/// A task with its series loaded.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskData {
    pub task: Task,
    pub series: Vec<Series>,
}

impl TaskData {
    pub fn load(task: Task) -> Result<Self> {
        let series = load_dataset(&task.dataset)?;
        Ok(Self { task, series })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub series: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub name: String,
    pub frequency: String,
    pub class: HorizonClass,
    pub horizon: usize,
    pub s_naive: usize,
    pub n_series: usize,
    /// Series with a defined MASE.
    pub n_scored: usize,
    /// Mean per-series MASE; `None` when no series had one.
    pub mase: Option<f64>,
    pub mae: Option<f64>,
    /// Downsampling stride shared by the task's series.
    pub stride: usize,
    pub skipped: Vec<Skipped>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: HorizonClass,
    pub n_tasks: usize,
    pub mase: f64,
    pub mae: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub tasks: Vec<TaskResult>,
    pub by_class: Vec<ClassSummary>,
    pub overall_mase: Option<f64>,
    pub overall_mae: Option<f64>,
    /// Tasks left out of the aggregates because MASE was undefined.
    pub undefined: Vec<String>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Splits off the last `horizon` points as the target.
fn split(series: &Series, horizon: usize) -> Option<(&[f64], &[f64])> {
    (series.len() > horizon).then(|| series.values.split_at(series.len() - horizon))
}

/// Shared stride for a task: per-series detection, averaged over the group.
fn task_stride(data: &TaskData, context_len: usize, cfg: &InferenceConfig) -> usize {
    if !cfg.downsample {
        return 1;
    }
    let reports: Vec<SeasonalityReport> = data
        .series
        .iter()
        .filter_map(|s| split(s, data.task.horizon))
        .filter_map(|(hist, _)| detect_seasonality(hist, context_len, cfg).ok())
        .map(|mut r| {
            r.stride = effective_stride(&r, data.task.horizon, cfg);
            r.significant &= r.stride > 1;
            r
        })
        .collect();
    dataset_stride_average(&reports)
}

pub fn run_task<F: PatchForecaster + ?Sized>(
    f: &F,
    context_len: usize,
    data: &TaskData,
    cfg: &InferenceConfig,
) -> Result<TaskResult> {
    let t = &data.task;
    let stride = task_stride(data, context_len, cfg);
    let mut mases = Vec::new();
    let mut maes = Vec::new();
    let mut skipped = Vec::new();
    for s in &data.series {
        let Some((hist, actual)) = split(s, t.horizon) else {
            skipped.push(Skipped { series: s.id.clone(), reason: format!("shorter than horizon {}", t.horizon) });
            continue;
        };
        let out = match forecast(f, context_len, hist, t.horizon, cfg, Some(stride)) {
            Ok(o) => o,
            Err(Error::InvalidInput(msg)) => {
                skipped.push(Skipped { series: s.id.clone(), reason: msg });
                continue;
            }
            Err(e) => return Err(e),
        };
        match mae(&out.values, actual) {
            Ok(m) => maes.push(m),
            Err(e) => {
                skipped.push(Skipped { series: s.id.clone(), reason: e.to_string() });
                continue;
            }
        }
        match mase(&out.values, actual, hist, t.s_naive) {
            Ok(m) => mases.push(m),
            Err(e) => skipped.push(Skipped { series: s.id.clone(), reason: e.to_string() }),
        }
    }
    Ok(TaskResult {
        name: t.name(),
        frequency: t.frequency.clone(),
        class: t.class,
        horizon: t.horizon,
        s_naive: t.s_naive,
        n_series: data.series.len(),
        n_scored: mases.len(),
        mase: mean(&mases),
        mae: mean(&maes),
        stride,
        skipped,
    })
}

/// Evaluates every task (in parallel, results kept in task order) and
/// aggregates arithmetic means per horizon class and overall. Tasks with
/// an undefined MASE are listed and left out of the aggregates.
pub fn run_benchmark<F: PatchForecaster + ?Sized>(
    f: &F,
    context_len: usize,
    tasks: &[TaskData],
    cfg: &InferenceConfig,
) -> Result<EvalResult> {
    cfg.validate()?;
    let results: Vec<TaskResult> =
        tasks.par_iter().map(|d| run_task(f, context_len, d, cfg)).collect::<Result<_>>()?;
    Ok(aggregate(results))
}

pub fn aggregate(tasks: Vec<TaskResult>) -> EvalResult {
    let defined: Vec<&TaskResult> = tasks.iter().filter(|t| t.mase.is_some()).collect();
    let undefined = tasks.iter().filter(|t| t.mase.is_none()).map(|t| t.name.clone()).collect();
    let by_class = [HorizonClass::Short, HorizonClass::Medium, HorizonClass::Long]
        .into_iter()
        .filter_map(|class| {
            let ts: Vec<&&TaskResult> = defined.iter().filter(|t| t.class == class).collect();
            let mase = mean(&ts.iter().filter_map(|t| t.mase).collect::<Vec<_>>())?;
            let mae = mean(&ts.iter().filter_map(|t| t.mae).collect::<Vec<_>>()).unwrap_or(f64::NAN);
            Some(ClassSummary { class, n_tasks: ts.len(), mase, mae })
        })
        .collect();
    let overall_mase = mean(&defined.iter().filter_map(|t| t.mase).collect::<Vec<_>>());
    let overall_mae = mean(&defined.iter().filter_map(|t| t.mae).collect::<Vec<_>>());
    EvalResult { tasks, by_class, overall_mase, overall_mae, undefined }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// One CSV row per task.
pub fn results_csv(r: &EvalResult) -> String {
    let mut s = String::from("task,frequency,horizon_class,horizon,s_naive,stride,n_series,n_scored,mase,mae\n");
    for t in &r.tasks {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            t.name,
            t.frequency,
            t.class.as_str(),
            t.horizon,
            t.s_naive,
            t.stride,
            t.n_series,
            t.n_scored,
            opt(t.mase),
            opt(t.mae)
        );
    }
    s
}

pub fn summary(r: &EvalResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<40} {:>10} {:>10}", "task", "MASE", "MAE");
    for t in &r.tasks {
        let _ = writeln!(s, "{:<40} {:>10} {:>10}", t.name, opt(t.mase), opt(t.mae));
    }
    let _ = writeln!(s);
    for c in &r.by_class {
        let _ = writeln!(s, "{:<40} {:>10.6} {:>10.6}", format!("{} ({} tasks)", c.class.as_str(), c.n_tasks), c.mase, c.mae);
    }
    let _ = writeln!(s, "{:<40} {:>10} {:>10}", "overall", opt(r.overall_mase), opt(r.overall_mae));
    if !r.undefined.is_empty() {
        let _ = writeln!(s, "undefined MASE (excluded): {}", r.undefined.join(", "));
    }
    let skipped: usize = r.tasks.iter().map(|t| t.skipped.len()).sum();
    if skipped > 0 {
        let _ = writeln!(s, "series skipped: {skipped}");
    }
    s
}

/// Forecast-vs-actual table: the last `tail` history points, then the
/// horizon. Columns `t,history,actual,forecast` with `t = 0` at the first
/// forecast point; empty cells where a column does not apply.
pub fn plot_csv(history: &[f64], actual: &[f64], forecast: &[f64], tail: usize) -> String {
    let mut s = String::from("t,history,actual,forecast\n");
    let h = &history[history.len().saturating_sub(tail)..];
    let cell = |v: Option<&f64>| v.filter(|x| x.is_finite()).map(|x| x.to_string()).unwrap_or_default();
    for (i, v) in h.iter().enumerate() {
        let _ = writeln!(s, "{},{},,", i as i64 - h.len() as i64, cell(Some(v)));
    }
    for i in 0..actual.len().max(forecast.len()) {
        let _ = writeln!(s, "{i},,{},{}", cell(actual.get(i)), cell(forecast.get(i)));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Source;
    use crate::inference::SeasonalNaive;
    use std::path::PathBuf;

    fn task(class: HorizonClass, horizon: usize) -> Task {
        Task { dataset: PathBuf::from("toy.ndjson"), frequency: "H".into(), class, horizon, s_naive: 4 }
    }

    fn periodic(id: &str, n: usize) -> Series {
        Series::new(id, Source::Real, (0..n).map(|t| [1.0, 3.0, 2.0, 5.0][t % 4] + 0.01 * t as f64).collect())
    }

    #[test]
    fn seasonal_naive_on_its_own_pattern() {
        let sn = SeasonalNaive { period: Some(4), context: 64, patch: 4 };
        let data = TaskData { task: task(HorizonClass::Short, 8), series: vec![periodic("a", 100), periodic("b", 60)] };
        let r = run_task(&sn, 64, &data, &InferenceConfig::default()).unwrap();
        assert_eq!(r.n_scored, 2);
        // errors grow with the drift: 0.04 per season
        let m = r.mase.unwrap();
        assert!(m > 0.0 && m < 2.0, "{m}");
    }

    #[test]
    fn undefined_mase_is_excluded() {
        let sn = SeasonalNaive { period: Some(1), context: 16, patch: 4 };
        let flat = Series::new("flat", Source::Real, vec![2.0; 40]);
        let tasks = vec![
            TaskData { task: task(HorizonClass::Short, 4), series: vec![flat.clone()] },
            TaskData { task: task(HorizonClass::Long, 8), series: vec![periodic("p", 80), flat] },
        ];
        let r = run_benchmark(&sn, 16, &tasks, &InferenceConfig::default()).unwrap();
        assert_eq!(r.undefined, ["toy/H/short"]);
        assert_eq!(r.by_class.len(), 1);
        assert_eq!(r.tasks[1].n_scored, 1);
        assert_eq!(r.tasks[1].skipped.len(), 1);
        assert_eq!(r.overall_mase, r.tasks[1].mase);
        assert!(summary(&r).contains("undefined MASE"));
        assert_eq!(results_csv(&r).lines().count(), 3);
    }

    #[test]
    fn class_means() {
        let mk = |name: &str, class, m| TaskResult {
            name: name.into(),
            frequency: "H".into(),
            class,
            horizon: 1,
            s_naive: 1,
            n_series: 1,
            n_scored: 1,
            mase: Some(m),
            mae: Some(2.0 * m),
            stride: 1,
            skipped: vec![],
        };
        let r = aggregate(vec![mk("a", HorizonClass::Short, 1.0), mk("b", HorizonClass::Short, 2.0), mk("c", HorizonClass::Long, 4.0)]);
        assert_eq!(r.by_class[0].mase, 1.5);
        assert_eq!(r.by_class[1].class, HorizonClass::Long);
        assert_eq!(r.overall_mase, Some(7.0 / 3.0));
    }

    #[test]
    fn plot_table() {
        let s = plot_csv(&[1.0, 2.0, 3.0], &[4.0, 5.0], &[4.5, 5.5], 2);
        assert_eq!(s, "t,history,actual,forecast\n-2,2,,\n-1,3,,\n0,,4,4.5\n1,,5,5.5\n");
    }
}
