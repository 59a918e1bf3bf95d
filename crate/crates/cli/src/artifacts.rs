//! Line-delimited JSON artifacts: datasets and training logs.
//!
//! Each file opens with a `{"header": {...}}` line carrying the hashes that
//! produced it. Dataset records follow as
//! `{"numbers":[a,b,c,d],"target":t,"solution_count":n,"split":"test_lowdiv"}`.
//! Readers also accept dataset files without a header.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use anyhow::{bail, Context};
use gameofn_core::dataset::{DatasetSizes, PuzzleRecord};
use gameofn_core::trainer::{ProbeLog, StepLog, TrainLog};
use serde::{Deserialize, Serialize};

use crate::hashing::json_hash;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub stage_hash: String,
    pub config_hash: String,
    pub target: i64,
    pub seed: u64,
    pub operand_range: [i64; 2],
    pub sizes: DatasetSizes,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine<T> {
    header: T,
}

/// Content hash of a dataset build: everything the records depend on.
pub fn dataset_stage_hash(target: i64, seed: u64, operand_range: [i64; 2], sizes: DatasetSizes) -> String {
    json_hash(&("dataset", 1, target, seed, operand_range, sizes))
}

pub(crate) fn create_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

/// Writes `bytes` to a temporary sibling and renames it into place, so a
/// crash never leaves a half-written artifact under the final name.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    create_parent(path)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", path.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("moving into {}", path.display()))?;
    Ok(())
}

fn json_line<T: Serialize>(out: &mut Vec<u8>, value: &T) {
    serde_json::to_writer(&mut *out, value).expect("serializable value");
    out.push(b'\n');
}

pub fn write_dataset(path: &Path, meta: &DatasetMeta, records: &[PuzzleRecord]) -> anyhow::Result<()> {
    let mut out = Vec::new();
    json_line(&mut out, &HeaderLine { header: meta });
    for r in records {
        json_line(&mut out, r);
    }
    write_atomic(path, &out)
}

pub fn read_dataset(path: &Path) -> anyhow::Result<(Option<DatasetMeta>, Vec<PuzzleRecord>)> {
    let file = fs::File::open(path).with_context(|| format!("opening dataset {}", path.display()))?;
    let mut meta = None;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 && line.starts_with("{\"header\"") {
            let h: HeaderLine<DatasetMeta> =
                serde_json::from_str(&line).with_context(|| format!("{}:1: bad header", path.display()))?;
            meta = Some(h.header);
            continue;
        }
        let r: PuzzleRecord =
            serde_json::from_str(&line).with_context(|| format!("{}:{}: bad record", path.display(), i + 1))?;
        records.push(r);
    }
    if records.is_empty() {
        bail!("dataset {} holds no records", path.display());
    }
    let target = records[0].target;
    if records.iter().any(|r| r.target != target) {
        bail!("dataset {} mixes targets", path.display());
    }
    Ok((meta, records))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogMeta {
    pub stage_hash: String,
    pub config_hash: String,
    pub train_target: i64,
    pub steps: usize,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LogLine<'a> {
    Step(&'a StepLog),
    Probe(&'a ProbeLog),
}

/// Header, then one `{"kind":"step",...}` line per optimizer step, then
/// the probe lines.
pub fn write_train_log(path: &Path, meta: &TrainLogMeta, log: &TrainLog) -> anyhow::Result<()> {
    let mut out = Vec::new();
    json_line(&mut out, &HeaderLine { header: meta });
    for s in &log.steps {
        json_line(&mut out, &LogLine::Step(s));
    }
    for p in &log.probes {
        json_line(&mut out, &LogLine::Probe(p));
    }
    write_atomic(path, &out)
}

/// Reads the header line of any artifact written by this module.
pub fn read_header<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut first = String::new();
    BufReader::new(file).read_line(&mut first)?;
    let h: HeaderLine<T> = serde_json::from_str(&first).with_context(|| format!("{}: bad header", path.display()))?;
    Ok(h.header)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    write_atomic(path, &out)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    write_atomic(path, text.as_bytes())
}

/// Appends to a writer, ignoring closed pipes.
pub fn say(out: &mut dyn Write, line: &str) {
    let _ = writeln!(out, "{line}");
}
