//! Benchmark task lists and dataset loading.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{load_corpus, load_series_file, Series};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonClass {
    Short,
    Medium,
    Long,
}

impl HorizonClass {
    pub fn as_str(self) -> &'static str {
        match self {
            HorizonClass::Short => "short",
            HorizonClass::Medium => "medium",
            HorizonClass::Long => "long",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "short" => Ok(HorizonClass::Short),
            "medium" => Ok(HorizonClass::Medium),
            "long" => Ok(HorizonClass::Long),
            other => Err(Error::Format(format!("unknown horizon class {other:?}"))),
        }
    }
}

/// Conventional seasonal period for a frequency tag: `hourly`/`H` 24,
/// `daily`/`D` 7, `weekly`/`W` 52, `monthly`/`M` 12, `quarterly`/`Q` 4,
/// `yearly`/`Y`/`A` 1, and points per day for sub-hourly tags such as
/// `15min`, `15T`, `10S` or `30s`.
pub fn seasonal_period(freq: &str) -> Option<usize> {
    let f = freq.trim();
    let named = match f.to_ascii_lowercase().as_str() {
        "h" | "hourly" | "1h" => Some(24),
        "d" | "daily" | "1d" => Some(7),
        "w" | "weekly" | "1w" => Some(52),
        "m" | "monthly" | "ms" | "me" => Some(12),
        "q" | "quarterly" | "qs" | "qe" => Some(4),
        "y" | "a" | "yearly" | "annual" | "ys" | "ye" => Some(1),
        _ => None,
    };
    if named.is_some() {
        return named;
    }
    let split = f.find(|c: char| !c.is_ascii_digit()).unwrap_or(f.len());
    let (num, unit) = f.split_at(split);
    let n: u64 = if num.is_empty() { 1 } else { num.parse().ok()? };
    let secs = match unit {
        "S" | "s" | "sec" => 1,
        "T" | "min" | "minutes" => 60,
        "H" | "h" => 3600,
        _ => return None,
    } * n;
    if secs == 0 || secs > 86_400 {
        return None;
    }
    Some((86_400 / secs) as usize)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub dataset: PathBuf,
    pub frequency: String,
    pub class: HorizonClass,
    pub horizon: usize,
    pub s_naive: usize,
}

impl Task {
    pub fn name(&self) -> String {
        let stem = self.dataset.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
        format!("{stem}/{}/{}", self.frequency, self.class.as_str())
    }
}

#[derive(Deserialize)]
struct TaskRow {
    dataset: String,
    frequency: String,
    horizon_class: String,
    horizon: usize,
    #[serde(default)]
    s_naive: Option<usize>,
}

/// Reads a task list CSV with columns `dataset, frequency, horizon_class,
/// horizon, s_naive` (`s_naive` may be empty, then it comes from the
/// frequency). Relative dataset paths resolve against `base`.
pub fn read_tasks(r: impl std::io::Read, base: &Path) -> Result<Vec<Task>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut out = Vec::new();
    for row in rdr.deserialize::<TaskRow>() {
        let row = row?;
        let s_naive = match row.s_naive {
            Some(s) => s,
            None => seasonal_period(&row.frequency)
                .ok_or_else(|| Error::Format(format!("no seasonal period known for frequency {:?}", row.frequency)))?,
        };
        if row.horizon == 0 || s_naive == 0 {
            return Err(Error::Format(format!("task {}: horizon and s_naive must be positive", row.dataset)));
        }
        let path = PathBuf::from(&row.dataset);
        out.push(Task {
            dataset: if path.is_absolute() { path } else { base.join(path) },
            frequency: row.frequency,
            class: HorizonClass::parse(&row.horizon_class)?,
            horizon: row.horizon,
            s_naive,
        });
    }
    Ok(out)
}

pub fn load_tasks(path: impl AsRef<Path>) -> Result<Vec<Task>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new("."));
    read_tasks(std::fs::File::open(path)?, base)
}

/// Loads the series of a dataset: a corpus file (`.tscb`, or NDJSON
/// records), a single CSV/JSONL series, or a directory of such series
/// files (sorted by name).
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<Series>> {
    let path = path.as_ref();
    if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        files.retain(|p| {
            matches!(p.extension().and_then(|e| e.to_str()), Some("csv" | "jsonl" | "json"))
        });
        files.sort();
        return files.iter().map(load_series_file).collect();
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("tscb") => load_corpus(path),
        Some("ndjson") => load_corpus(path).or_else(|_| load_series_file(path).map(|s| vec![s])),
        _ => load_series_file(path).map(|s| vec![s]),
    }
}
