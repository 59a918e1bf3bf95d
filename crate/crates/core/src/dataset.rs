//! Train/test splits stratified by solution count.
//!
//! Every 4-multiset in the operand range is scored by the oracle. Puzzles
//! with more solutions count as easier. Training puzzles come from the top
//! and bottom quartiles of the solvable pool; the accuracy test set holds
//! puzzles with one or two solutions and the diversity test set puzzles with
//! at least seven. No multiset appears in more than one split.

use alloc::collections::BTreeSet;
use alloc::string::ToString;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Puzzle;
use crate::oracle::{multisets, solution_count};
use crate::rng;

pub const LOWDIV_MAX_SOLUTIONS: usize = 2;
pub const HIGHDIV_MIN_SOLUTIONS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    TrainEasy,
    TrainHard,
    TestLowdiv,
    TestHighdiv,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::TrainEasy, Split::TrainHard, Split::TestLowdiv, Split::TestHighdiv];

    pub fn name(self) -> &'static str {
        match self {
            Split::TrainEasy => "train_easy",
            Split::TrainHard => "train_hard",
            Split::TestLowdiv => "test_lowdiv",
            Split::TestHighdiv => "test_highdiv",
        }
    }

    pub fn from_name(name: &str) -> Option<Split> {
        Split::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn is_train(self) -> bool {
        matches!(self, Split::TrainEasy | Split::TrainHard)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PuzzleRecord {
    pub numbers: [i64; 4],
    pub target: i64,
    pub solution_count: usize,
    pub split: Split,
}

impl PuzzleRecord {
    pub fn puzzle(&self) -> Result<Puzzle> {
        let max = self.numbers.iter().copied().max().unwrap_or(1);
        Puzzle::with_max_operand(self.numbers, self.target, max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSizes {
    pub train_easy: usize,
    pub train_hard: usize,
    pub test: usize,
}

impl Default for DatasetSizes {
    fn default() -> Self {
        DatasetSizes {
            train_easy: 10,
            train_hard: 10,
            test: 50,
        }
    }
}

/// Oracle solution count for every multiset over `[lo, hi]`.
pub fn sweep(target: i64, lo: i64, hi: i64) -> Result<Vec<(Puzzle, usize)>> {
    if lo < 1 || lo > hi {
        return Err(Error::InvalidConfig(alloc::format!("bad operand range [{lo}, {hi}]")));
    }
    multisets(lo, hi)
        .map(|n| {
            let p = Puzzle::with_max_operand(n, target, hi)?;
            Ok((p, solution_count(&p)))
        })
        .collect()
}

pub fn build_dataset(target: i64, seed: u64, sizes: DatasetSizes, lo: i64, hi: i64) -> Result<Vec<PuzzleRecord>> {
    let scored = sweep(target, lo, hi)?;
    build_from_sweep(&scored, target, seed, sizes)
}

fn draw(
    pool: &[(Puzzle, usize)],
    used: &BTreeSet<[i64; 4]>,
    n: usize,
    split: Split,
    rng: &mut rng::Rng,
) -> Result<Vec<PuzzleRecord>> {
    let mut candidates: Vec<&(Puzzle, usize)> = pool
        .iter()
        .filter(|(p, _)| !used.contains(&p.sorted_numbers()))
        .collect();
    if candidates.len() < n {
        return Err(Error::InsufficientPuzzles {
            split: split.name().to_string(),
            needed: n,
            available: candidates.len(),
        });
    }
    candidates.shuffle(rng);
    let mut picked: Vec<PuzzleRecord> = candidates[..n]
        .iter()
        .map(|(p, c)| PuzzleRecord {
            numbers: p.sorted_numbers(),
            target: p.target(),
            solution_count: *c,
            split,
        })
        .collect();
    picked.sort_by_key(|a| a.numbers);
    Ok(picked)
}

/// Builds the four splits from precomputed oracle counts.
pub fn build_from_sweep(
    scored: &[(Puzzle, usize)],
    target: i64,
    seed: u64,
    sizes: DatasetSizes,
) -> Result<Vec<PuzzleRecord>> {
    let mut solvable: Vec<(Puzzle, usize)> = scored
        .iter()
        .filter(|(p, c)| *c > 0 && p.target() == target)
        .copied()
        .collect();
    solvable.sort_by_key(|(p, c)| (*c, p.sorted_numbers()));
    let quartile = solvable.len().div_ceil(4);
    let bottom = &solvable[..quartile];
    let top = &solvable[solvable.len() - quartile..];

    let mut rng = rng::from_seed(rng::derive(seed, rng::DATASET));
    let mut used = BTreeSet::new();
    let mut out = Vec::new();

    let lowdiv: Vec<(Puzzle, usize)> = solvable
        .iter()
        .filter(|(_, c)| *c <= LOWDIV_MAX_SOLUTIONS)
        .copied()
        .collect();
    let highdiv: Vec<(Puzzle, usize)> = solvable
        .iter()
        .filter(|(_, c)| *c >= HIGHDIV_MIN_SOLUTIONS)
        .copied()
        .collect();

    for (pool, n, split) in [
        (top, sizes.train_easy, Split::TrainEasy),
        (bottom, sizes.train_hard, Split::TrainHard),
        (&lowdiv[..], sizes.test, Split::TestLowdiv),
        (&highdiv[..], sizes.test, Split::TestHighdiv),
    ] {
        let picked = draw(pool, &used, n, split, &mut rng)?;
        used.extend(picked.iter().map(|r| r.numbers));
        out.extend(picked);
    }
    Ok(out)
}

pub fn puzzles_in(records: &[PuzzleRecord], split: Split) -> Result<Vec<Puzzle>> {
    records.iter().filter(|r| r.split == split).map(PuzzleRecord::puzzle).collect()
}

pub fn train_puzzles(records: &[PuzzleRecord]) -> Result<Vec<Puzzle>> {
    records.iter().filter(|r| r.split.is_train()).map(PuzzleRecord::puzzle).collect()
}
