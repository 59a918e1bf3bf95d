//! The staged experiment: datasets, training, evaluation, reports.
//!
//! Every stage has a content hash over its inputs (including the hashes of
//! upstream stages). An existing artifact whose embedded stage hash matches
//! is reused; anything else is rebuilt. Reused artifacts whose embedded
//! config hash differs from the current one are re-stamped, so a run
//! directory never mixes config hashes. Output layout under `output_dir`:
//!
//! ```text
//! datasets/{target}_{seed}.jsonl
//! checkpoints/gfn_{target}_{seed}.ckpt
//! logs/train_{target}_{seed}.jsonl
//! reports/eval_{target}.json
//! reports/tables.txt
//! reports/cells.jsonl
//! reports/gap.jsonl
//! reports/plot_top10.csv
//! manifest.json
//! ```

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use gameofn_core::dataset::{build_dataset, train_puzzles, DatasetSizes, PuzzleRecord, Split};
use gameofn_core::decoding::DecodeConfig;
use gameofn_core::eval::{evaluate_records, EvalReport, TrainedPolicy, ATTEMPTS};
use gameofn_core::trainer::{train, TrainConfig, TrainError};
use serde::Serialize;

use crate::artifacts::{
    dataset_stage_hash, read_dataset, read_header, read_json, say, write_dataset, write_json, write_text,
    write_train_log, DatasetMeta, TrainLogMeta,
};
use crate::checkpoint::{train_config_hash, Checkpoint, CheckpointMeta, EncoderSpec};
use crate::config::ExperimentConfig;
use crate::hashing::{json_hash, short};
use crate::report::{cell_records, gap_records, plot_csv, render_report};

pub const PLOT_STRATEGY: &str = "Top-10";

pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Layout { root: root.to_path_buf() }
    }

    pub fn dataset(&self, target: i64, seed: u64) -> PathBuf {
        self.root.join("datasets").join(format!("{target}_{seed}.jsonl"))
    }

    pub fn checkpoint(&self, target: i64, seed: u64) -> PathBuf {
        self.root.join("checkpoints").join(format!("gfn_{target}_{seed}.ckpt"))
    }

    pub fn train_log(&self, target: i64, seed: u64) -> PathBuf {
        self.root.join("logs").join(format!("train_{target}_{seed}.jsonl"))
    }

    pub fn eval_report(&self, target: i64) -> PathBuf {
        self.root.join("reports").join(format!("eval_{target}.json"))
    }

    pub fn tables(&self) -> PathBuf {
        self.root.join("reports").join("tables.txt")
    }

    pub fn cells(&self) -> PathBuf {
        self.root.join("reports").join("cells.jsonl")
    }

    pub fn gaps(&self) -> PathBuf {
        self.root.join("reports").join("gap.jsonl")
    }

    pub fn plot(&self) -> PathBuf {
        self.root.join("reports").join("plot_top10.csv")
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    fn relative(&self, path: &Path) -> String {
        let rel = path.strip_prefix(&self.root).unwrap_or(path);
        rel.components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Built,
    Reused,
}

impl Status {
    fn word(self) -> &'static str {
        match self {
            Status::Built => "built",
            Status::Reused => "up to date, skipped",
        }
    }
}

/// What happened to each stage, in order.
#[derive(Debug, Default)]
pub struct RunSummary {
    pub stages: Vec<(String, Status)>,
}

impl RunSummary {
    pub fn all_reused(&self) -> bool {
        self.stages.iter().all(|(_, s)| *s == Status::Reused)
    }
}

pub fn train_stage_hash(config: &TrainConfig, train_target: i64, dataset_hash: &str) -> String {
    json_hash(&("train", 1, EncoderSpec::current(), config, train_target, dataset_hash))
}

pub fn eval_stage_hash(train_hash: &str, dataset_hash: &str, grid: &[DecodeConfig], seed: u64) -> String {
    json_hash(&("eval", 1, train_hash, dataset_hash, grid, seed, ATTEMPTS))
}

/// Replaces the header line of a line-delimited artifact.
fn restamp_jsonl<T: Serialize>(path: &Path, header: &T) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(path)?;
    let rest = text.split_once('\n').map_or("", |(_, r)| r);
    let line = serde_json::to_string(&serde_json::json!({ "header": header }))?;
    write_text(path, &format!("{line}\n{rest}"))
}

pub fn dataset_stage(
    path: &Path,
    target: i64,
    seed: u64,
    range: [i64; 2],
    sizes: DatasetSizes,
    config_hash: &str,
) -> anyhow::Result<(DatasetMeta, Vec<PuzzleRecord>, Status)> {
    let stage_hash = dataset_stage_hash(target, seed, range, sizes);
    if let Ok(mut meta) = read_header::<DatasetMeta>(path) {
        if meta.stage_hash == stage_hash {
            let (_, records) = read_dataset(path)?;
            if meta.config_hash != config_hash {
                meta.config_hash = config_hash.to_string();
                restamp_jsonl(path, &meta)?;
            }
            return Ok((meta, records, Status::Reused));
        }
    }
    let records = build_dataset(target, seed, sizes, range[0], range[1])?;
    let meta = DatasetMeta {
        stage_hash,
        config_hash: config_hash.to_string(),
        target,
        seed,
        operand_range: range,
        sizes,
    };
    write_dataset(path, &meta, &records)?;
    Ok((meta, records, Status::Built))
}

/// Trains on the train splits of `records` and writes checkpoint and log.
/// On divergence the last finite model is saved next to the checkpoint.
pub fn train_and_save(
    config: &TrainConfig,
    records: &[PuzzleRecord],
    dataset_hash: &str,
    config_hash: &str,
    ckpt_path: &Path,
    log_path: &Path,
) -> anyhow::Result<(Checkpoint, String)> {
    let train_target = records.first().map(|r| r.target).context("empty dataset")?;
    let stage_hash = train_stage_hash(config, train_target, dataset_hash);
    let meta = CheckpointMeta {
        train_target,
        train_config: config.clone(),
        train_config_hash: train_config_hash(config, train_target),
        dataset_hash: dataset_hash.to_string(),
        stage_hash: stage_hash.clone(),
        config_hash: config_hash.to_string(),
    };
    let (model, log) = match train(config, &train_puzzles(records)?) {
        Ok(out) => out,
        Err(TrainError::DivergenceDetected { step, last_good }) => {
            let mut path = ckpt_path.as_os_str().to_owned();
            path.push(".last_good");
            let path = PathBuf::from(path);
            Checkpoint { model: *last_good, meta }.write(&path)?;
            bail!("loss diverged at step {step}; last finite model saved to {}", path.display());
        }
        Err(e) => return Err(e.into()),
    };
    let log_meta = TrainLogMeta {
        stage_hash,
        config_hash: config_hash.to_string(),
        train_target,
        steps: config.steps,
    };
    write_train_log(log_path, &log_meta, &log)?;
    let ckpt = Checkpoint { model, meta };
    let hash = ckpt.write(ckpt_path)?;
    Ok((ckpt, hash))
}

fn train_stage(
    config: &ExperimentConfig,
    layout: &Layout,
    records: &[PuzzleRecord],
    dataset_hash: &str,
    config_hash: &str,
) -> anyhow::Result<(Checkpoint, String, Status)> {
    let tc = config.train_config();
    let ckpt_path = layout.checkpoint(config.target_train, config.seed);
    let log_path = layout.train_log(config.target_train, config.seed);
    let stage_hash = train_stage_hash(&tc, config.target_train, dataset_hash);
    if let (Ok((mut ckpt, mut hash)), Ok(mut log_meta)) =
        (Checkpoint::read(&ckpt_path), read_header::<TrainLogMeta>(&log_path))
    {
        if ckpt.meta.stage_hash == stage_hash && log_meta.stage_hash == stage_hash {
            if ckpt.meta.config_hash != config_hash {
                ckpt.meta.config_hash = config_hash.to_string();
                hash = ckpt.write(&ckpt_path)?;
            }
            if log_meta.config_hash != config_hash {
                log_meta.config_hash = config_hash.to_string();
                restamp_jsonl(&log_path, &log_meta)?;
            }
            return Ok((ckpt, hash, Status::Reused));
        }
    }
    let (ckpt, hash) = train_and_save(&tc, records, dataset_hash, config_hash, &ckpt_path, &log_path)?;
    Ok((ckpt, hash, Status::Built))
}

/// Untrained and trained blocks for one dataset, with provenance filled in.
pub fn evaluate_checkpoint(
    ckpt: &Checkpoint,
    checkpoint_hash: &str,
    records: &[PuzzleRecord],
    dataset_hash: &str,
    grid: &[DecodeConfig],
    seed: u64,
    config_hash: &str,
) -> anyhow::Result<EvalReport> {
    if grid.is_empty() {
        bail!("decode grid is empty");
    }
    let baseline = ckpt.meta.train_config.initial_model();
    let mut report = evaluate_records(&ckpt.model, &baseline, records, grid, seed)?;
    report.meta.checkpoint_hash = checkpoint_hash.to_string();
    report.meta.dataset_hash = dataset_hash.to_string();
    report.meta.config_hash = config_hash.to_string();
    report.meta.stage_hash = eval_stage_hash(&ckpt.meta.stage_hash, dataset_hash, grid, seed);
    Ok(report)
}

#[derive(Serialize)]
struct ManifestEntry {
    stage: String,
    stage_hash: String,
    path: String,
}

#[derive(Serialize)]
struct Manifest {
    config_hash: String,
    seed: u64,
    artifacts: Vec<ManifestEntry>,
}

/// Runs every stage for `config`, reusing up-to-date artifacts. Progress
/// lines go to `out`. Errors name the failing stage.
pub fn cmd_run(config: &ExperimentConfig, out: &mut dyn Write) -> anyhow::Result<RunSummary> {
    config.validate()?;
    let layout = Layout::new(&config.output_dir);
    let config_hash = config.hash();
    let seed = config.seed;
    let dseed = config.dataset_seed();
    let mut summary = RunSummary::default();
    let mut manifest = Manifest {
        config_hash: config_hash.clone(),
        seed,
        artifacts: Vec::new(),
    };
    say(out, &format!("config {} seed {seed} -> {}", short(&config_hash), layout.root.display()));

    let mut datasets = Vec::new();
    for target in config.targets() {
        let stage = format!("dataset {target}");
        let path = layout.dataset(target, dseed);
        let (meta, records, status) = dataset_stage(
            &path,
            target,
            dseed,
            config.operand_range,
            config.dataset.sizes(),
            &config_hash,
        )
        .with_context(|| format!("stage `{stage}` failed"))?;
        say(out, &format!("{stage}: {} ({})", status.word(), short(&meta.stage_hash)));
        manifest.artifacts.push(ManifestEntry {
            stage: stage.clone(),
            stage_hash: meta.stage_hash.clone(),
            path: layout.relative(&path),
        });
        summary.stages.push((stage, status));
        datasets.push((target, meta, records));
    }

    let (_, source_meta, source_records) = &datasets[0];
    let (ckpt, ckpt_hash, status) = train_stage(config, &layout, source_records, &source_meta.stage_hash, &config_hash)
        .context("stage `train` failed")?;
    say(out, &format!("train: {} ({})", status.word(), short(&ckpt.meta.stage_hash)));
    for path in [
        layout.checkpoint(config.target_train, seed),
        layout.train_log(config.target_train, seed),
    ] {
        manifest.artifacts.push(ManifestEntry {
            stage: "train".into(),
            stage_hash: ckpt.meta.stage_hash.clone(),
            path: layout.relative(&path),
        });
    }
    summary.stages.push(("train".into(), status));

    let trained = TrainedPolicy {
        model: ckpt.model.clone(),
        train_target: ckpt.meta.train_target,
    };
    let mut reports = Vec::new();
    for (target, meta, records) in &datasets {
        if !config.target_eval.contains(target) {
            continue;
        }
        let stage = format!("eval {target}");
        let path = layout.eval_report(*target);
        let stage_hash = eval_stage_hash(&ckpt.meta.stage_hash, &meta.stage_hash, &config.grid, seed);
        let run = || -> anyhow::Result<(EvalReport, Status)> {
            if *target == config.target_train {
                trained.check_source(records)?;
                if ckpt.meta.dataset_hash != meta.stage_hash {
                    bail!("checkpoint was trained on dataset {}, not {}", ckpt.meta.dataset_hash, meta.stage_hash);
                }
            }
            if let Ok(mut report) = read_json::<EvalReport>(&path) {
                if report.meta.stage_hash == stage_hash {
                    if report.meta.config_hash != config_hash || report.meta.checkpoint_hash != ckpt_hash {
                        report.meta.config_hash = config_hash.clone();
                        report.meta.checkpoint_hash = ckpt_hash.clone();
                        write_json(&path, &report)?;
                    }
                    return Ok((report, Status::Reused));
                }
            }
            let report =
                evaluate_checkpoint(&ckpt, &ckpt_hash, records, &meta.stage_hash, &config.grid, seed, &config_hash)?;
            write_json(&path, &report)?;
            Ok((report, Status::Built))
        };
        let (report, status) = run().with_context(|| format!("stage `{stage}` failed"))?;
        say(out, &format!("{stage}: {} ({})", status.word(), short(&stage_hash)));
        manifest.artifacts.push(ManifestEntry {
            stage: stage.clone(),
            stage_hash,
            path: layout.relative(&path),
        });
        summary.stages.push((stage, status));
        reports.push(report);
    }

    let write_reports = || -> anyhow::Result<()> {
        write_text(&layout.tables(), &render_report(&reports, config.target_train))?;
        write_text(&layout.cells(), &cell_records(&reports))?;
        write_text(&layout.gaps(), &gap_records(&reports, config.target_train))?;
        write_text(&layout.plot(), &plot_csv(&reports, Split::TestLowdiv.name(), PLOT_STRATEGY)?)?;
        Ok(())
    };
    write_reports().context("stage `report` failed")?;
    for path in [layout.tables(), layout.cells(), layout.gaps(), layout.plot()] {
        manifest.artifacts.push(ManifestEntry {
            stage: "report".into(),
            stage_hash: config_hash.clone(),
            path: layout.relative(&path),
        });
    }
    write_json(&layout.manifest(), &manifest)?;
    say(out, &format!("reports: {}", layout.tables().display()));
    Ok(summary)
}
