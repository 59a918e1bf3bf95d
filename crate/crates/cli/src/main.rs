use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use gameofn::artifacts::{
    dataset_stage_hash, read_dataset, read_json, say, write_dataset, write_json, write_text, DatasetMeta,
};
use gameofn::checkpoint::Checkpoint;
use gameofn::config::ExperimentConfig;
use gameofn::hashing::{json_hash, short};
use gameofn::report::{cell_records, gap_records, plot_csv, render_report};
use gameofn::runner::{cmd_run, evaluate_checkpoint, train_and_save, PLOT_STRATEGY};
use gameofn_core::dataset::{build_dataset, DatasetSizes, Split};
use gameofn_core::decoding::DecodeConfig;
use gameofn_core::eval::EvalReport;
use gameofn_core::game::{render_trajectory, Puzzle};
use gameofn_core::oracle::enumerate_solutions;

/// Exit status for malformed command lines and inputs.
const EXIT_USAGE: u8 = 64;
/// Exit status of `enumerate` when the puzzle has no solution.
const EXIT_NO_SOLUTION: u8 = 2;

#[derive(Parser)]
#[command(name = "gameofn", version, about = "GFlowNet training and evaluation for Game-of-N puzzles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List every distinct solution of a puzzle.
    Enumerate {
        /// The four starting numbers.
        #[arg(num_args = 4, required = true, allow_negative_numbers = true)]
        numbers: Vec<i64>,
        #[arg(long)]
        target: i64,
        /// Largest allowed starting number.
        #[arg(long, default_value_t = gameofn_core::game::DEFAULT_MAX_OPERAND)]
        max_operand: i64,
        /// Print only the count.
        #[arg(long)]
        count_only: bool,
    },
    /// Build the four train/test splits for one target.
    BuildDataset {
        #[arg(long)]
        target: i64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [1, 13])]
        range: Vec<i64>,
        #[arg(long, default_value_t = 10)]
        train_easy: usize,
        #[arg(long, default_value_t = 10)]
        train_hard: usize,
        #[arg(long, default_value_t = 50)]
        test: usize,
        /// Output file; defaults to `{target}_{seed}.jsonl`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a policy on the train splits of a dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Experiment config; its `[train]` section and `seed` are used.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Training log; defaults to the checkpoint path with `.log.jsonl`.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a checkpoint and its untrained baseline over a decoding grid.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Experiment config supplying the grid; defaults to the 3x3 grid.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Evaluation seed; defaults to the checkpoint's training seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the whole experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Render tables, cell records and plot data from evaluation reports.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Target the other reports are compared against; defaults to the
        /// checkpoint's training target recorded in the first report's name.
        #[arg(long)]
        source_target: Option<i64>,
        /// Write the report files here instead of printing the tables.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match dispatch(cli.command, &mut out) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<u8, Failure> {
    match command {
        Command::Enumerate {
            numbers,
            target,
            max_operand,
            count_only,
        } => enumerate(&numbers, target, max_operand, count_only, out),
        Command::BuildDataset {
            target,
            seed,
            range,
            train_easy,
            train_hard,
            test,
            out: path,
        } => {
            let range = [range[0], range[1]];
            if range[0] < 1 || range[0] > range[1] || target < 1 {
                return Err(Failure::Usage(format!("bad target {target} or range {range:?}")));
            }
            let sizes = DatasetSizes {
                train_easy,
                train_hard,
                test,
            };
            let path = path.unwrap_or_else(|| PathBuf::from(format!("{target}_{seed}.jsonl")));
            build(&path, target, seed, range, sizes, out)?;
            Ok(0)
        }
        Command::Train {
            dataset,
            config,
            out: path,
            log,
            seed,
        } => {
            train_cmd(&dataset, &config, &path, log, seed, out)?;
            Ok(0)
        }
        Command::Eval {
            checkpoint,
            dataset,
            config,
            seed,
            out: path,
        } => {
            eval_cmd(&checkpoint, &dataset, config.as_deref(), seed, &path, out)?;
            Ok(0)
        }
        Command::Run { config, seed, out_dir } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg = cfg.with_seed(s);
            }
            if let Some(dir) = out_dir {
                cfg.output_dir = dir;
            }
            cmd_run(&cfg, out)?;
            Ok(0)
        }
        Command::Report {
            reports,
            source_target,
            out_dir,
        } => {
            report_cmd(&reports, source_target, out_dir.as_deref(), out)?;
            Ok(0)
        }
    }
}

fn enumerate(numbers: &[i64], target: i64, max_operand: i64, count_only: bool, out: &mut dyn Write) -> Result<u8, Failure> {
    let numbers: [i64; 4] = numbers
        .try_into()
        .map_err(|_| Failure::Usage("expected exactly four numbers".into()))?;
    let puzzle =
        Puzzle::with_max_operand(numbers, target, max_operand).map_err(|e| Failure::Usage(e.to_string()))?;
    let set = enumerate_solutions(&puzzle);
    say(out, &format!("{} solutions", set.count));
    if !count_only {
        for t in &set.solutions {
            say(out, "");
            let _ = write!(out, "{}", render_trajectory(t));
        }
    }
    Ok(if set.count == 0 { EXIT_NO_SOLUTION } else { 0 })
}

fn build(path: &Path, target: i64, seed: u64, range: [i64; 2], sizes: DatasetSizes, out: &mut dyn Write) -> anyhow::Result<()> {
    let records = build_dataset(target, seed, sizes, range[0], range[1])?;
    let stage_hash = dataset_stage_hash(target, seed, range, sizes);
    let meta = DatasetMeta {
        config_hash: stage_hash.clone(),
        stage_hash,
        target,
        seed,
        operand_range: range,
        sizes,
    };
    write_dataset(path, &meta, &records)?;
    for split in Split::ALL {
        let n = records.iter().filter(|r| r.split == split).count();
        say(out, &format!("{:<13} {n}", split.name()));
    }
    say(out, &format!("wrote {} ({})", path.display(), short(&meta.stage_hash)));
    Ok(())
}

fn dataset_hash(meta: &Option<DatasetMeta>, records: &[gameofn_core::dataset::PuzzleRecord]) -> String {
    meta.as_ref().map_or_else(|| json_hash(records), |m| m.stage_hash.clone())
}

fn train_cmd(
    dataset: &Path,
    config: &Path,
    path: &Path,
    log: Option<PathBuf>,
    seed: Option<u64>,
    out: &mut dyn Write,
) -> anyhow::Result<()> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = seed {
        cfg = cfg.with_seed(s);
    }
    let (meta, records) = read_dataset(dataset)?;
    let log = log.unwrap_or_else(|| path.with_extension("log.jsonl"));
    let (ckpt, hash) = train_and_save(
        &cfg.train_config(),
        &records,
        &dataset_hash(&meta, &records),
        &cfg.hash(),
        path,
        &log,
    )?;
    say(out, &format!("log_z {:.4}", ckpt.model.log_z));
    say(out, &format!("wrote {} ({}) and {}", path.display(), short(&hash), log.display()));
    Ok(())
}

fn eval_cmd(
    checkpoint: &Path,
    dataset: &Path,
    config: Option<&Path>,
    seed: Option<u64>,
    path: &Path,
    out: &mut dyn Write,
) -> anyhow::Result<()> {
    let (ckpt, ckpt_hash) = Checkpoint::read(checkpoint)?;
    let (meta, records) = read_dataset(dataset)?;
    let (grid, config_hash) = match config {
        Some(p) => {
            let cfg = ExperimentConfig::load(p)?;
            (cfg.grid.clone(), cfg.hash())
        }
        None => {
            let grid = DecodeConfig::optimal_grid();
            let hash = json_hash(&grid);
            (grid, hash)
        }
    };
    let seed = seed.unwrap_or(ckpt.meta.train_config.seed);
    let report = evaluate_checkpoint(
        &ckpt,
        &ckpt_hash,
        &records,
        &dataset_hash(&meta, &records),
        &grid,
        seed,
        &config_hash,
    )?;
    write_json(path, &report)?;
    say(out, &format!("wrote {}", path.display()));
    Ok(())
}

fn report_cmd(paths: &[PathBuf], source_target: Option<i64>, out_dir: Option<&Path>, out: &mut dyn Write) -> anyhow::Result<()> {
    let reports = paths
        .iter()
        .map(|p| read_json::<EvalReport>(p))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let first = &reports[0].meta;
    for (r, p) in reports.iter().zip(paths) {
        if r.meta.checkpoint_hash != first.checkpoint_hash || r.meta.config_hash != first.config_hash {
            bail!("{} comes from a different checkpoint or config than {}", p.display(), paths[0].display());
        }
    }
    let source = source_target.unwrap_or(reports[0].target);
    let tables = render_report(&reports, source);
    match out_dir {
        None => {
            let _ = write!(out, "{tables}");
        }
        Some(dir) => {
            let files = [
                ("tables.txt", tables),
                ("cells.jsonl", cell_records(&reports)),
                ("gap.jsonl", gap_records(&reports, source)),
                ("plot_top10.csv", plot_csv(&reports, Split::TestLowdiv.name(), PLOT_STRATEGY)?),
            ];
            for (name, text) in files {
                let path = dir.join(name);
                write_text(&path, &text).with_context(|| format!("writing {}", path.display()))?;
                say(out, &format!("wrote {}", path.display()));
            }
        }
    }
    Ok(())
}
