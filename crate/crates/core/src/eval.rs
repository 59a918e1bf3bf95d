//! Success rate (SR) and trajectory count (TC) evaluation.
//!
//! Each puzzle gets a fixed number of independent decoded rollouts (20 by
//! default). SR is 1 if any attempt reaches the target; TC is the number of
//! distinct canonical solutions among the attempts. A grid cell averages SR
//! and TC over the test puzzles and reports TC/SR as a ratio of sums over the
//! solved puzzles.
//!
//! Attempt seeds are derived from the root seed, the decode configuration,
//! the puzzle's numbers and target, and the attempt index. Results therefore
//! do not depend on the order of puzzles or grid cells.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{puzzles_in, PuzzleRecord, Split};
use crate::decoding::{decode_sample, DecodeConfig, Strategy};
use crate::error::{Error, Result};
use crate::game::{apply, Puzzle, Trajectory};
use crate::policy::PolicyModel;
use crate::rng;

pub const ATTEMPTS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptResult {
    pub trajectory: Trajectory,
    pub success: bool,
    pub canonical_key: String,
}

impl AttemptResult {
    pub fn grade(trajectory: Trajectory) -> Self {
        AttemptResult {
            success: trajectory.is_success(),
            canonical_key: trajectory.canonical_key(),
            trajectory,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PuzzleEval {
    pub puzzle: Puzzle,
    pub attempts: Vec<AttemptResult>,
    pub sr: u8,
    pub tc: usize,
}

impl PuzzleEval {
    pub fn from_attempts(puzzle: Puzzle, attempts: Vec<AttemptResult>) -> Self {
        let distinct: BTreeSet<&str> = attempts
            .iter()
            .filter(|a| a.success)
            .map(|a| a.canonical_key.as_str())
            .collect();
        let tc = distinct.len();
        PuzzleEval {
            puzzle,
            sr: u8::from(tc > 0),
            tc,
            attempts,
        }
    }
}

/// One decoded episode.
pub fn rollout<R: Rng + ?Sized>(
    model: &PolicyModel,
    puzzle: &Puzzle,
    config: &DecodeConfig,
    rng: &mut R,
) -> Result<Trajectory> {
    let mut state = puzzle.initial_state();
    let mut steps = Vec::with_capacity(crate::game::EPISODE_STEPS);
    while !state.is_terminal() {
        let action = decode_sample(model, &state, config, rng)?;
        state = apply(&state, &action)?;
        steps.push(action);
    }
    Trajectory::from_steps(*puzzle, steps)
}

pub fn attempt_seed(root: u64, config: &DecodeConfig, puzzle: &Puzzle, attempt: usize) -> u64 {
    let cell = rng::fnv1a(config.key().as_bytes());
    let mut key = [0u8; 40];
    for (i, n) in puzzle.numbers().iter().chain(&[puzzle.target()]).enumerate() {
        key[i * 8..(i + 1) * 8].copy_from_slice(&n.to_le_bytes());
    }
    let seed = rng::derive(rng::derive(root, rng::EVAL), cell);
    rng::derive(rng::derive(seed, rng::fnv1a(&key)), attempt as u64)
}

pub fn evaluate_puzzle(model: &PolicyModel, puzzle: &Puzzle, config: &DecodeConfig, seed: u64) -> Result<PuzzleEval> {
    evaluate_puzzle_n(model, puzzle, config, seed, ATTEMPTS)
}

pub fn evaluate_puzzle_n(
    model: &PolicyModel,
    puzzle: &Puzzle,
    config: &DecodeConfig,
    seed: u64,
    attempts: usize,
) -> Result<PuzzleEval> {
    config.validate()?;
    let results = (0..attempts)
        .map(|a| {
            let mut r = rng::from_seed(attempt_seed(seed, config, puzzle, a));
            rollout(model, puzzle, config, &mut r).map(AttemptResult::grade)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PuzzleEval::from_attempts(*puzzle, results))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub temperature: f64,
    pub strategy: Strategy,
    pub label: String,
    pub puzzles: usize,
    pub sr_sum: usize,
    pub tc_sum: usize,
    pub mean_sr: f64,
    pub mean_tc: f64,
    /// `sum tc / sum sr`; `None` when nothing was solved.
    pub tc_per_sr: Option<f64>,
    /// Mean of per-puzzle `tc / sr` over solved puzzles.
    pub tc_per_sr_mean_of_ratios: Option<f64>,
}

impl CellResult {
    pub fn aggregate(config: &DecodeConfig, evals: &[PuzzleEval]) -> Self {
        let n = evals.len();
        for e in evals {
            assert!(e.sr <= 1 && e.tc >= e.sr as usize, "tc < sr for {:?}", e.puzzle);
        }
        let sr_sum: usize = evals.iter().map(|e| e.sr as usize).sum();
        let tc_sum: usize = evals.iter().map(|e| e.tc).sum();
        // sr is 0 or 1, so each solved puzzle's ratio is its tc
        let ratio_sum: usize = evals.iter().filter(|e| e.sr == 1).map(|e| e.tc / e.sr as usize).sum();
        let per = |total: usize| if n == 0 { 0.0 } else { total as f64 / n as f64 };
        CellResult {
            temperature: config.temperature,
            strategy: config.strategy,
            label: config.strategy.label(),
            puzzles: n,
            sr_sum,
            tc_sum,
            mean_sr: per(sr_sum),
            mean_tc: per(tc_sum),
            tc_per_sr: (sr_sum > 0).then(|| tc_sum as f64 / sr_sum as f64),
            tc_per_sr_mean_of_ratios: (sr_sum > 0).then(|| ratio_sum as f64 / sr_sum as f64),
        }
    }

    pub fn config(&self) -> DecodeConfig {
        DecodeConfig {
            temperature: self.temperature,
            strategy: self.strategy,
        }
    }
}

pub fn evaluate_cell(
    model: &PolicyModel,
    puzzles: &[Puzzle],
    config: &DecodeConfig,
    seed: u64,
    attempts: usize,
) -> Result<(CellResult, Vec<PuzzleEval>)> {
    let evals = puzzles
        .iter()
        .map(|p| evaluate_puzzle_n(model, p, config, seed, attempts))
        .collect::<Result<Vec<_>>>()?;
    Ok((CellResult::aggregate(config, &evals), evals))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBlock {
    pub model: String,
    pub split: String,
    pub cells: Vec<CellResult>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub checkpoint_hash: String,
    pub dataset_hash: String,
    pub config_hash: String,
    /// Hash of the evaluation stage inputs, used to skip reruns.
    #[serde(default)]
    pub stage_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub target: i64,
    pub attempts: usize,
    pub meta: ReportMeta,
    pub blocks: Vec<ReportBlock>,
}

impl EvalReport {
    pub fn block(&self, model: &str, split: &str) -> Option<&ReportBlock> {
        self.blocks.iter().find(|b| b.model == model && b.split == split)
    }
}

pub fn grid_block(
    model: &PolicyModel,
    puzzles: &[Puzzle],
    grid: &[DecodeConfig],
    seed: u64,
    attempts: usize,
) -> Result<Vec<CellResult>> {
    grid.iter()
        .map(|c| evaluate_cell(model, puzzles, c, seed, attempts).map(|(cell, _)| cell))
        .collect()
}

/// Evaluates every grid point on `test_split` (one report block).
pub fn run_grid(model: &PolicyModel, test_split: &[Puzzle], grid: &[DecodeConfig], seed: u64) -> Result<EvalReport> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("decode grid is empty".into()));
    }
    let target = test_split.first().map(|p| p.target()).unwrap_or(0);
    Ok(EvalReport {
        target,
        attempts: ATTEMPTS,
        meta: ReportMeta {
            seed,
            ..ReportMeta::default()
        },
        blocks: alloc::vec![ReportBlock {
            model: "model".into(),
            split: "test".into(),
            cells: grid_block(model, test_split, grid, seed, ATTEMPTS)?,
        }],
    })
}

pub const TRAINED: &str = "trained";
pub const UNTRAINED: &str = "untrained";

/// A trained policy together with the target it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPolicy {
    pub model: PolicyModel,
    pub train_target: i64,
}

impl TrainedPolicy {
    /// Fails with `ChecksumMismatch` unless `source` holds puzzles for the
    /// training target.
    pub fn check_source(&self, source: &[PuzzleRecord]) -> Result<()> {
        let expected = source.first().map(|r| r.target).unwrap_or(self.train_target);
        if self.train_target != expected {
            return Err(Error::ChecksumMismatch {
                expected,
                found: self.train_target,
            });
        }
        Ok(())
    }
}

/// Untrained and trained blocks on the test splits of one dataset.
pub fn evaluate_records(
    trained: &PolicyModel,
    baseline: &PolicyModel,
    records: &[PuzzleRecord],
    grid: &[DecodeConfig],
    seed: u64,
) -> Result<EvalReport> {
    let target = records
        .first()
        .map(|r| r.target)
        .ok_or_else(|| Error::InvalidConfig("empty dataset".into()))?;
    let mut blocks = Vec::new();
    for split in [Split::TestLowdiv, Split::TestHighdiv] {
        let puzzles = puzzles_in(records, split)?;
        if puzzles.is_empty() {
            continue;
        }
        for (label, model) in [(UNTRAINED, baseline), (TRAINED, trained)] {
            blocks.push(ReportBlock {
                model: label.into(),
                split: split.name().into(),
                cells: grid_block(model, &puzzles, grid, seed, ATTEMPTS)?,
            });
        }
    }
    Ok(EvalReport {
        target,
        attempts: ATTEMPTS,
        meta: ReportMeta {
            seed,
            ..ReportMeta::default()
        },
        blocks,
    })
}

/// In-distribution and zero-shot reports for the trained policy and the
/// untrained baseline. `source` must hold puzzles for the training target.
pub fn transfer_experiment(
    trained: &TrainedPolicy,
    baseline: &PolicyModel,
    source: &[PuzzleRecord],
    transfer: &[PuzzleRecord],
    grid: &[DecodeConfig],
    seed: u64,
) -> Result<(EvalReport, EvalReport)> {
    trained.check_source(source)?;
    if grid.is_empty() {
        return Err(Error::InvalidConfig("decode grid is empty".into()));
    }
    let in_dist = evaluate_records(&trained.model, baseline, source, grid, seed)?;
    let zero_shot = evaluate_records(&trained.model, baseline, transfer, grid, seed)?;
    Ok((in_dist, zero_shot))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub model: String,
    pub split: String,
    pub temperature: f64,
    pub label: String,
    pub source_target: i64,
    pub transfer_target: i64,
    pub sr_source: f64,
    pub sr_transfer: f64,
    /// `sr_transfer - sr_source`.
    pub sr_gap: f64,
}

/// Per-cell SR difference between the transfer and in-distribution reports.
pub fn sr_gap(source: &EvalReport, transfer: &EvalReport) -> Vec<GapRow> {
    let mut rows = Vec::new();
    for block in &source.blocks {
        let Some(other) = transfer.block(&block.model, &block.split) else {
            continue;
        };
        for cell in &block.cells {
            let Some(t) = other.cells.iter().find(|c| c.config() == cell.config()) else {
                continue;
            };
            rows.push(GapRow {
                model: block.model.clone(),
                split: block.split.clone(),
                temperature: cell.temperature,
                label: cell.label.clone(),
                source_target: source.target,
                transfer_target: transfer.target,
                sr_source: cell.mean_sr,
                sr_transfer: t.mean_sr,
                sr_gap: t.mean_sr - cell.mean_sr,
            });
        }
    }
    rows
}
