//! Series containers and corpus file formats.
//!
//! * NDJSON: one `{"id", "source", "length", "values"}` object per line,
//!   missing values written as `null`.
//! * Binary columnar (`.tscb`): magic `TSCB`, `u32` version, `u64` series
//!   count, then per series a `u64` length, a `u8` source tag and a
//!   `u32`-length-prefixed UTF-8 id, followed by all values packed as
//!   little-endian `f32` in series order. All integers little-endian.
//! * Real data: CSV with a `value` column (optionally `timestamp`), or JSONL
//!   lines `{"timestamp": ..., "value": ...}`; empty, `NaN` or `null`
//!   values are missing.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Kernelsynth,
    Spike,
    Tsi,
    Real,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Kernelsynth => "kernelsynth",
            Source::Spike => "spike",
            Source::Tsi => "tsi",
            Source::Real => "real",
        }
    }

    fn tag(self) -> u8 {
        match self {
            Source::Kernelsynth => 0,
            Source::Spike => 1,
            Source::Tsi => 2,
            Source::Real => 3,
        }
    }

    fn from_tag(t: u8) -> Option<Self> {
        [Source::Kernelsynth, Source::Spike, Source::Tsi, Source::Real].get(t as usize).copied()
    }
}

/// A univariate series; NaN marks a missing value.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub id: String,
    pub source: Source,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(id: impl Into<String>, source: Source, values: Vec<f64>) -> Self {
        Self { id: id.into(), source, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A named group of series sharing a sampling stride during training.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub id: String,
    pub series: Vec<Series>,
}

impl Dataset {
    pub fn new(id: impl Into<String>, series: Vec<Series>) -> Self {
        Self { id: id.into(), series }
    }

    pub fn total_len(&self) -> usize {
        self.series.iter().map(Series::len).sum()
    }
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    source: Source,
    length: usize,
    values: Vec<Option<f64>>,
}

pub fn write_ndjson(w: &mut impl Write, series: &[Series]) -> Result<()> {
    for s in series {
        let rec = Record {
            id: s.id.clone(),
            source: s.source,
            length: s.len(),
            values: s.values.iter().map(|&v| v.is_finite().then_some(v)).collect(),
        };
        serde_json::to_writer(&mut *w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_ndjson(r: impl BufRead) -> Result<Vec<Series>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line)?;
        if rec.length != rec.values.len() {
            return Err(Error::Format(format!(
                "line {}: length {} but {} values",
                i + 1,
                rec.length,
                rec.values.len()
            )));
        }
        out.push(Series::new(rec.id, rec.source, rec.values.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect()));
    }
    Ok(out)
}

const BIN_MAGIC: &[u8; 4] = b"TSCB";
const BIN_VERSION: u32 = 1;

pub fn write_binary(w: &mut impl Write, series: &[Series]) -> Result<()> {
    w.write_all(BIN_MAGIC)?;
    w.write_all(&BIN_VERSION.to_le_bytes())?;
    w.write_all(&(series.len() as u64).to_le_bytes())?;
    for s in series {
        w.write_all(&(s.len() as u64).to_le_bytes())?;
        w.write_all(&[s.source.tag()])?;
        w.write_all(&(s.id.len() as u32).to_le_bytes())?;
        w.write_all(s.id.as_bytes())?;
    }
    for s in series {
        for &v in &s.values {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_binary(r: &mut impl Read) -> Result<Vec<Series>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let bad = |m: &str| Error::Format(format!("binary corpus: {m}"));
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated"))?;
        pos += n;
        Ok(s)
    };
    if take(4)? != BIN_MAGIC {
        return Err(bad("missing TSCB magic"));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().expect("4"));
    if version != BIN_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let count = u64::from_le_bytes(take(8)?.try_into().expect("8")) as usize;
    let mut heads = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let len = u64::from_le_bytes(take(8)?.try_into().expect("8")) as usize;
        let source = Source::from_tag(take(1)?[0]).ok_or_else(|| bad("unknown source tag"))?;
        let idlen = u32::from_le_bytes(take(4)?.try_into().expect("4")) as usize;
        let id = std::str::from_utf8(take(idlen)?).map_err(|_| bad("id is not UTF-8"))?.to_string();
        heads.push((len, source, id));
    }
    let mut out = Vec::with_capacity(heads.len());
    for (len, source, id) in heads {
        let raw = take(len.checked_mul(4).ok_or_else(|| bad("length overflow"))?)?;
        let values = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4")) as f64).collect();
        out.push(Series::new(id, source, values));
    }
    if pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok(out)
}

/// Writes a corpus, choosing the format from the extension (`.tscb` is
/// binary, anything else NDJSON).
pub fn save_corpus(path: impl AsRef<Path>, series: &[Series]) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path)?);
    if is_binary(path) {
        write_binary(&mut w, series)?;
    } else {
        write_ndjson(&mut w, series)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Series>> {
    let path = path.as_ref();
    let f = File::open(path)?;
    if is_binary(path) {
        read_binary(&mut BufReader::new(f))
    } else {
        read_ndjson(BufReader::new(f))
    }
}

fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "tscb")
}

fn parse_value(s: &str) -> Result<f64> {
    let t = s.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("nan") || t.eq_ignore_ascii_case("null") || t.eq_ignore_ascii_case("na") {
        return Ok(f64::NAN);
    }
    t.parse::<f64>().map_err(|_| Error::Format(format!("not a number: {t:?}")))
}

/// Reads one series from CSV. Uses the `value` column when the header has
/// one, otherwise the last column.
pub fn read_csv_series(r: impl Read) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(r);
    let headers = rdr.headers()?.clone();
    let col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("value"))
        .unwrap_or(headers.len().saturating_sub(1));
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.push(parse_value(rec.get(col).unwrap_or(""))?);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct JsonPoint {
    #[allow(dead_code)]
    #[serde(default)]
    timestamp: Option<serde_json::Value>,
    value: Option<serde_json::Value>,
}

/// Reads one series from JSONL lines with a `value` field.
pub fn read_jsonl_series(r: impl BufRead) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: JsonPoint = serde_json::from_str(&line)?;
        let v = match p.value {
            None | Some(serde_json::Value::Null) => f64::NAN,
            Some(serde_json::Value::Number(n)) => n.as_f64().unwrap_or(f64::NAN),
            Some(serde_json::Value::String(s)) => parse_value(&s)?,
            Some(other) => return Err(Error::Format(format!("bad value {other}"))),
        };
        out.push(v);
    }
    Ok(out)
}

/// Loads a real-data series from a `.csv` or `.jsonl`/`.json` file; the id
/// is the file stem.
pub fn load_series_file(path: impl AsRef<Path>) -> Result<Series> {
    let path = path.as_ref();
    let f = File::open(path)?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let values = match ext.as_str() {
        "csv" => read_csv_series(f)?,
        "jsonl" | "json" | "ndjson" => read_jsonl_series(BufReader::new(f))?,
        _ => return Err(Error::Format(format!("unsupported series file {}", path.display()))),
    };
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("series").to_string();
    Ok(Series::new(id, Source::Real, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<Series> {
        vec![
            Series::new("a", Source::Kernelsynth, vec![1.0, f64::NAN, -2.5]),
            Series::new("b-2", Source::Tsi, vec![]),
            Series::new("c", Source::Spike, vec![0.125; 5]),
        ]
    }

    fn same(a: &[Series], b: &[Series]) -> bool {
        a.len() == b.len()
            && a.iter().zip(b).all(|(x, y)| {
                x.id == y.id
                    && x.source == y.source
                    && x.values.len() == y.values.len()
                    && x.values.iter().zip(&y.values).all(|(u, v)| u == v || (u.is_nan() && v.is_nan()))
            })
    }

    #[test]
    fn ndjson_round_trip() {
        let mut buf = Vec::new();
        write_ndjson(&mut buf, &sample()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(r#"{"id":"a","source":"kernelsynth","length":3,"values":[1.0,null,-2.5]}"#));
        assert!(same(&read_ndjson(&buf[..]).unwrap(), &sample()));
    }

    #[test]
    fn binary_round_trip() {
        let mut buf = Vec::new();
        write_binary(&mut buf, &sample()).unwrap();
        assert_eq!(&buf[..4], b"TSCB");
        assert!(same(&read_binary(&mut &buf[..]).unwrap(), &sample()));
        assert!(read_binary(&mut &buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn ndjson_length_mismatch() {
        let line = r#"{"id":"x","source":"tsi","length":2,"values":[1.0]}"#;
        assert!(matches!(read_ndjson(line.as_bytes()), Err(Error::Format(_))));
    }

    #[test]
    fn csv_and_jsonl() {
        let csv = "timestamp,value\n2020-01-01,1.5\n2020-01-02,\n2020-01-03,NaN\n2020-01-04,4\n";
        let v = read_csv_series(csv.as_bytes()).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(v[0], 1.5);
        assert!(v[1].is_nan() && v[2].is_nan());
        let v = read_csv_series("x\n3\n4\n".as_bytes()).unwrap();
        assert_eq!(v, [3.0, 4.0]);
        let jl = "{\"timestamp\": 1, \"value\": 2.0}\n{\"value\": null}\n{\"value\": \"7\"}\n";
        let v = read_jsonl_series(jl.as_bytes()).unwrap();
        assert_eq!(v[0], 2.0);
        assert!(v[1].is_nan());
        assert_eq!(v[2], 7.0);
    }

    #[test]
    fn files_by_extension() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["c.ndjson", "c.tscb"] {
            let p = dir.path().join(name);
            save_corpus(&p, &sample()).unwrap();
            assert!(same(&load_corpus(&p).unwrap(), &sample()));
        }
        let p = dir.path().join("load.csv");
        std::fs::write(&p, "value\n1\n2\n").unwrap();
        let s = load_series_file(&p).unwrap();
        assert_eq!(s.id, "load");
        assert_eq!(s.values, [1.0, 2.0]);
    }
}
