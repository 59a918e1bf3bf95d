//! Acceptance checks for the whole workspace.
//!
//! Each check returns an [`Outcome`]; the `acceptance` test target runs them
//! in order and prints one PASS or FAIL line per check. The long checks
//! drive the real pipeline through [`gameofn::runner::cmd_run`] with the
//! shipped default config.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{ensure, Context};
use gameofn::config::ExperimentConfig;
use gameofn::runner::cmd_run;
use gameofn_core::check::verify_rendered;
use gameofn_core::dataset::{build_dataset, puzzles_in, DatasetSizes, Split};
use gameofn_core::decoding::{apply_temperature, min_p, top_k, top_p, DecodeConfig, Distribution};
use gameofn_core::eval::{evaluate_cell, AttemptResult, EvalReport, GapRow, PuzzleEval, TRAINED, UNTRAINED};
use gameofn_core::flow::terminal_distribution;
use gameofn_core::game::{render_trajectory, reward, Puzzle};
use gameofn_core::oracle::{
    enumerate_solutions, positional_solution_keys, solution_count, solvable_tuple_count, terminal_values,
};
use gameofn_core::policy::{log_pb_trajectory, Gradient, PolicyConfig, PolicyModel};
use gameofn_core::trainer::{sample_trajectory, tb_loss, tb_loss_and_grad, train, TrainConfig};
use gameofn_core::{rng, ArithStep, Op, Rational, Trajectory};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn within(elapsed: Duration, limit: Duration) -> (bool, String) {
    (elapsed < limit, format!("{:.1}s of {}s", elapsed.as_secs_f64(), limit.as_secs()))
}

pub fn shipped_config(name: &str) -> anyhow::Result<ExperimentConfig> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::load(&path)
}

/// Oracle soundness on 200 random tuples and both targets.
pub fn oracle_soundness() -> anyhow::Result<Outcome> {
    let start = Instant::now();
    let mut r = rng::from_seed(0x0AC1E);
    let mut solutions = 0;
    for _ in 0..200 {
        let numbers = [0; 4].map(|_| r.gen_range(1..=13));
        for target in [24, 42] {
            let puzzle = Puzzle::new(numbers, target)?;
            let set = enumerate_solutions(&puzzle);
            for t in &set.solutions {
                let text = render_trajectory(t);
                ensure!(verify_rendered(&text, target) == Ok(true), "{numbers:?} -> {target}: rejected\n{text}");
            }
            let positional = positional_solution_keys(&puzzle).len();
            ensure!(
                positional == set.count,
                "{numbers:?} -> {target}: positional {positional}, canonical {}",
                set.count
            );
            solutions += set.count;
        }
    }
    let (fast, time) = within(start.elapsed(), Duration::from_secs(60));
    Ok(Outcome::new(fast, format!("{solutions} solutions re-verified, counts agree, {time}")))
}

fn random_dist(r: &mut rng::Rng) -> Vec<f64> {
    let n = r.gen_range(1..=10);
    loop {
        let raw: Vec<f64> = (0..n).map(|_| r.gen_range(0..6) as f64).collect();
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            return raw.iter().map(|x| x / total).collect();
        }
    }
}

fn renormalize(p: &[f64], keep: &[bool]) -> Vec<f64> {
    let mut total = 0.0;
    for i in 0..p.len() {
        if keep[i] {
            total += p[i];
        }
    }
    (0..p.len()).map(|i| if keep[i] { p[i] / total } else { 0.0 }).collect()
}

fn naive_rank(p: &[f64]) -> Vec<usize> {
    let mut taken = vec![false; p.len()];
    let mut order = Vec::new();
    for _ in 0..p.len() {
        let mut best: Option<usize> = None;
        for i in 0..p.len() {
            if !taken[i] && best.is_none_or(|b| p[i] > p[b]) {
                best = Some(i);
            }
        }
        let b = best.expect("an untaken index");
        taken[b] = true;
        order.push(b);
    }
    order
}

fn naive_top_k(p: &[f64], k: usize) -> Vec<f64> {
    let mut keep = vec![false; p.len()];
    for &i in naive_rank(p).iter().take(k) {
        keep[i] = true;
    }
    renormalize(p, &keep)
}

fn naive_top_p(p: &[f64], mass: f64) -> Vec<f64> {
    let mut keep = vec![false; p.len()];
    let mut cum = 0.0;
    for i in naive_rank(p) {
        keep[i] = true;
        cum += p[i];
        if cum >= mass {
            break;
        }
    }
    renormalize(p, &keep)
}

fn naive_min_p(p: &[f64], rel: f64) -> Vec<f64> {
    let max = p.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<bool> = p.iter().map(|&q| q >= rel * max).collect();
    renormalize(p, &keep)
}

fn naive_temperature(p: &[f64], t: f64) -> Vec<f64> {
    let w: Vec<f64> = p.iter().map(|&q| q.powf(1.0 / t)).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn softened(p: &[f64], floor: f64) -> Vec<f64> {
    let q: Vec<f64> = p.iter().map(|x| x + floor).collect();
    let total: f64 = q.iter().sum();
    q.iter().map(|x| x / total).collect()
}

/// Filters against naive references, temperature against the power form,
/// and the identity settings.
pub fn decoding_equivalence() -> anyhow::Result<Outcome> {
    let start = Instant::now();
    let mut r = rng::from_seed(0xDEC0DE);
    let mut temp_err: f64 = 0.0;
    let mut ident_err: f64 = 0.0;
    for _ in 0..1000 {
        let p = random_dist(&mut r);
        let d = Distribution::new(p.clone())?;
        let k = r.gen_range(1..=12);
        let mass = r.gen_range(0.05..=1.0);
        let rel = r.gen_range(0.0..1.0);
        ensure!(top_k(&d, k).probs() == &naive_top_k(&p, k)[..], "top_k {k} on {p:?}");
        ensure!(top_p(&d, mass).probs() == &naive_top_p(&p, mass)[..], "top_p {mass} on {p:?}");
        ensure!(min_p(&d, rel).probs() == &naive_min_p(&p, rel)[..], "min_p {rel} on {p:?}");

        let positive = softened(&p, 0.01);
        let logits: Vec<f64> = positive.iter().map(|q| q.ln()).collect();
        let t = r.gen_range(0.1..3.0);
        temp_err = temp_err.max(max_abs_diff(apply_temperature(&logits, t)?.probs(), &naive_temperature(&positive, t)));

        ident_err = ident_err
            .max(max_abs_diff(apply_temperature(&logits, 1.0)?.probs(), &positive))
            .max(max_abs_diff(top_k(&d, p.len()).probs(), &p))
            .max(max_abs_diff(top_k(&d, p.len() + 3).probs(), &p))
            .max(max_abs_diff(top_p(&d, 1.0).probs(), &p))
            .max(max_abs_diff(min_p(&d, 0.0).probs(), &p));
    }
    let (fast, time) = within(start.elapsed(), Duration::from_secs(10));
    let pass = fast && temp_err < 1e-12 && ident_err < 1e-12;
    Ok(Outcome::new(
        pass,
        format!("filters exact, temperature err {temp_err:.1e}, identity err {ident_err:.1e}, {time}"),
    ))
}

/// Analytic trajectory-balance gradients against central differences.
pub fn gradient_check() -> anyhow::Result<Outcome> {
    let h = 1e-5;
    let mut r = rng::from_seed(0x6AD);
    let uniform = PolicyModel::zeros(PolicyConfig { hidden: 1 });
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for case in 0..20u64 {
        let mut model = PolicyModel::initial(PolicyConfig { hidden: 6 }, case);
        model.log_z = r.gen_range(-3.0..3.0);
        let numbers = [0; 4].map(|_| r.gen_range(1..=13));
        let puzzle = Puzzle::new(numbers, if case % 2 == 0 { 24 } else { 42 })?;
        let traj = sample_trajectory(&uniform, &puzzle, &mut r, 0.0)?;
        let mut grad = Gradient::zeros_like(&model);
        tb_loss_and_grad(&model, &traj, reward(&traj).ln(), log_pb_trajectory(&traj), 1.0, &mut grad)?;

        let mut compare = |analytic: f64, numeric: f64| {
            let scale = analytic.abs().max(numeric.abs());
            let excess = (analytic - numeric).abs() - 1e-8;
            if excess > 0.0 {
                worst = worst.max(excess / scale);
            }
            checked += 1;
        };
        for i in 0..model.params().len() {
            let (mut plus, mut minus) = (model.clone(), model.clone());
            plus.params_mut()[i] += h;
            minus.params_mut()[i] -= h;
            compare(grad.params[i], (tb_loss(&plus, &traj)? - tb_loss(&minus, &traj)?) / (2.0 * h));
        }
        let (mut plus, mut minus) = (model.clone(), model.clone());
        plus.log_z += h;
        minus.log_z -= h;
        compare(grad.log_z, (tb_loss(&plus, &traj)? - tb_loss(&minus, &traj)?) / (2.0 * h));
    }
    Ok(Outcome::new(
        worst <= 1e-4,
        format!("{checked} partial derivatives, worst relative error {worst:.1e} (rtol 1e-4)"),
    ))
}

/// Trains on one puzzle and compares the sampler with `R(x) / sum R`.
fn proportionality(
    puzzle: &Puzzle,
    success: f64,
    fail: f64,
    steps: usize,
    samples: usize,
) -> anyhow::Result<(f64, f64, f64)> {
    let config = TrainConfig {
        steps,
        hidden: 32,
        reward_success: success,
        reward_fail: fail,
        log_z_init: success.ln(),
        probe_every: 0,
        seed: 4,
        ..TrainConfig::default()
    };
    let (model, _) = train(&config, std::slice::from_ref(puzzle))?;
    let goal = Rational::from_int(puzzle.target());
    let values = terminal_values(puzzle);
    let r = |v: &Rational| if *v == goal { success } else { fail };
    let total: f64 = values.iter().map(r).sum();

    let mut counts: BTreeMap<Rational, usize> = BTreeMap::new();
    let mut g = rng::from_seed(rng::derive(config.seed, 0x5A3));
    for _ in 0..samples {
        let t = sample_trajectory(&model, puzzle, &mut g, 0.0)?;
        *counts.entry(t.terminal_value()).or_default() += 1;
    }
    ensure!(counts.keys().all(|v| values.contains(v)), "sampled a value the oracle does not list");
    let tv = values
        .iter()
        .map(|v| (counts.get(v).copied().unwrap_or(0) as f64 / samples as f64 - r(v) / total).abs())
        .sum::<f64>()
        / 2.0;
    let exact = terminal_distribution(&model, puzzle)?;
    let exact_tv = values
        .iter()
        .map(|v| (exact.get(v).copied().unwrap_or(0.0) - r(v) / total).abs())
        .sum::<f64>()
        / 2.0;
    let z_err = (model.log_z.exp() - total).abs() / total;
    ensure!(exact_tv.is_finite());
    Ok((tv, exact_tv, z_err))
}

/// Sampling proportional to reward on (4, 4, 4, 4) -> 24. The default
/// rewards put almost all mass on 24, so a flat 20:1 reward is checked as
/// well; it exercises the proportionality among the failing values.
pub fn gflownet_contract() -> anyhow::Result<Outcome> {
    let start = Instant::now();
    let puzzle = Puzzle::new([4, 4, 4, 4], 24)?;
    let (tv, exact_tv, z_err) = proportionality(
        &puzzle,
        gameofn_core::game::REWARD_SUCCESS,
        gameofn_core::game::REWARD_FAIL,
        6_000,
        50_000,
    )?;
    let (flat_tv, flat_exact, flat_z) = proportionality(&puzzle, 20.0, 1.0, 20_000, 50_000)?;
    let (fast, time) = within(start.elapsed(), Duration::from_secs(600));
    let pass = fast && tv < 0.05 && z_err < 0.1 && flat_tv < 0.05 && flat_z < 0.1;
    Ok(Outcome::new(
        pass,
        format!(
            "{} terminal values; rewards 100/0.001: TV {tv:.4} (exact {exact_tv:.4}), Z off by {:.1}%; \
             rewards 20/1: TV {flat_tv:.4} (exact {flat_exact:.4}), Z off by {:.1}%; {time}",
            terminal_values(&puzzle).len(),
            100.0 * z_err,
            100.0 * flat_z
        ),
    ))
}

fn path(numbers: [i64; 4], target: i64, steps: &[(i64, Op, i64)]) -> anyhow::Result<Trajectory> {
    let steps = steps
        .iter()
        .map(|&(l, op, r)| ArithStep::ints(l, op, r))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Trajectory::from_steps(Puzzle::new(numbers, target)?, steps)?)
}

fn check_eval(e: &PuzzleEval) -> anyhow::Result<()> {
    ensure!(e.tc >= e.sr as usize, "tc {} < sr {}", e.tc, e.sr);
    ensure!(e.tc <= solution_count(&e.puzzle), "tc {} above the oracle count", e.tc);
    for a in &e.attempts {
        let verdict = verify_rendered(&render_trajectory(&a.trajectory), e.puzzle.target());
        ensure!(verdict == Ok(a.success), "grading disagrees with the checker");
    }
    Ok(())
}

/// Metric invariants on real evaluations plus the three-success fixture.
pub fn metric_semantics(trained: &[(PolicyModel, Vec<Puzzle>)]) -> anyhow::Result<Outcome> {
    use Op::*;
    let n = [2, 4, 8, 10];
    let wins = [
        path(n, 24, &[(8, Div, 4), (10, Add, 2), (2, Mul, 12)])?,
        path(n, 24, &[(2, Add, 10), (8, Mul, 12), (96, Div, 4)])?,
        path(n, 24, &[(2, Add, 10), (4, Add, 8), (12, Add, 12)])?,
    ];
    let miss = path(n, 24, &[(2, Add, 10), (8, Sub, 4), (12, Sub, 4)])?;
    // The fourth winner repeats the first up to operand order.
    let repeat = path(n, 24, &[(8, Div, 4), (2, Add, 10), (12, Mul, 2)])?;
    let mut attempts = Vec::new();
    for i in 0..20 {
        let t = match i {
            0 | 7 => wins[0].clone(),
            3 => wins[1].clone(),
            11 | 15 => wins[2].clone(),
            18 => repeat.clone(),
            _ => miss.clone(),
        };
        attempts.push(AttemptResult::grade(t));
    }
    let fixture = PuzzleEval::from_attempts(Puzzle::new(n, 24)?, attempts);
    ensure!((fixture.sr, fixture.tc) == (1, 3), "fixture graded sr {} tc {}", fixture.sr, fixture.tc);
    check_eval(&fixture)?;

    let mut evals = 0;
    for (model, puzzles) in trained {
        for config in DecodeConfig::optimal_grid() {
            let (_, per_puzzle) = evaluate_cell(model, puzzles, &config, 17, 20)?;
            for e in &per_puzzle {
                check_eval(e)?;
                evals += 1;
            }
        }
    }
    Ok(Outcome::new(
        true,
        format!("fixture tc=3; tc >= sr and tc <= oracle count on {evals} per-puzzle evaluations"),
    ))
}

/// Full pipeline outputs for one seed of the default config.
pub struct SeedRun {
    pub seed: u64,
    pub dir: PathBuf,
    pub elapsed: Duration,
}

pub fn run_default(seed: u64, dir: &Path) -> anyhow::Result<SeedRun> {
    let mut config = shipped_config("default.toml")?.with_seed(seed);
    config.output_dir = dir.to_path_buf();
    let start = Instant::now();
    cmd_run(&config, &mut std::io::sink())?;
    Ok(SeedRun {
        seed,
        dir: dir.to_path_buf(),
        elapsed: start.elapsed(),
    })
}

fn read_report(dir: &Path, target: i64) -> anyhow::Result<EvalReport> {
    gameofn::artifacts::read_json(&dir.join(format!("reports/eval_{target}.json")))
}

fn sr_at(report: &EvalReport, model: &str, split: &str, temperature: f64, label: &str) -> anyhow::Result<f64> {
    report
        .block(model, split)
        .and_then(|b| b.cells.iter().find(|c| c.temperature == temperature && c.label == label))
        .map(|c| c.mean_sr)
        .with_context(|| format!("no {model} {split} {label} T={temperature} cell"))
}

/// Trained beats untrained on test_lowdiv for 24 at top-k 10, T = 0.7.
pub fn directional_reproduction(runs: &[SeedRun]) -> anyhow::Result<Outcome> {
    let mut parts = Vec::new();
    let mut pass = runs.len() == 3;
    let mut total = Duration::ZERO;
    for run in runs {
        let report = read_report(&run.dir, 24)?;
        let split = Split::TestLowdiv.name();
        let puzzles = report.block(TRAINED, split).and_then(|b| b.cells.first()).map_or(0, |c| c.puzzles);
        ensure!(puzzles == 50, "lowdiv split holds {puzzles} puzzles");
        let t = sr_at(&report, TRAINED, split, 0.7, "Top-10")?;
        let u = sr_at(&report, UNTRAINED, split, 0.7, "Top-10")?;
        pass &= t > u;
        total += run.elapsed;
        parts.push(format!("seed {}: {t:.2} vs {u:.2}", run.seed));
    }
    let (fast, time) = within(total, Duration::from_secs(1800));
    Ok(Outcome::new(pass && fast, format!("trained vs untrained SR, {}; {time}", parts.join(", "))))
}

/// Every file under `root`, keyed by relative path.
pub fn snapshot(root: &Path) -> anyhow::Result<BTreeMap<PathBuf, Vec<u8>>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(path.strip_prefix(root)?.to_path_buf(), std::fs::read(&path)?);
            }
        }
    }
    Ok(files)
}

fn differing(a: &BTreeMap<PathBuf, Vec<u8>>, b: &BTreeMap<PathBuf, Vec<u8>>) -> Vec<String> {
    let keys: BTreeSet<&PathBuf> = a.keys().chain(b.keys()).collect();
    keys.into_iter()
        .filter(|k| a.get(*k) != b.get(*k))
        .map(|k| k.display().to_string())
        .collect()
}

/// The gap report covers both models, every split and the full grid, and
/// reproduces byte for byte, both from scratch and on a rerun in place.
pub fn transfer_gap_report(first: &SeedRun, second: &SeedRun) -> anyhow::Result<Outcome> {
    let grid = DecodeConfig::optimal_grid();
    let gap_text = std::fs::read_to_string(first.dir.join("reports/gap.jsonl"))?;
    let rows: Vec<GapRow> = gap_text
        .lines()
        .map(serde_json::from_str)
        .collect::<Result<_, _>>()?;
    let mut missing = Vec::new();
    for model in [UNTRAINED, TRAINED] {
        for split in [Split::TestLowdiv, Split::TestHighdiv] {
            for c in &grid {
                let found = rows.iter().any(|r| {
                    r.model == model
                        && r.split == split.name()
                        && r.temperature == c.temperature
                        && r.label == c.strategy.label()
                        && r.source_target == 24
                        && r.transfer_target == 42
                });
                if !found {
                    missing.push(format!("{model}/{}/{}@{}", split.name(), c.strategy.label(), c.temperature));
                }
            }
        }
    }
    let tables = std::fs::read_to_string(first.dir.join("reports/tables.txt"))?;
    let has_tables = tables.contains("SR gap, Game of 42 minus Game of 24") && !tables.contains("NaN");

    let before = snapshot(&first.dir)?;
    let reports_only = |s: &BTreeMap<PathBuf, Vec<u8>>| -> BTreeMap<PathBuf, Vec<u8>> {
        s.iter().filter(|(k, _)| k.starts_with("reports")).map(|(k, v)| (k.clone(), v.clone())).collect()
    };
    let fresh = differing(&reports_only(&before), &reports_only(&snapshot(&second.dir)?));
    let again = run_default(first.seed, &first.dir)?;
    let rerun = differing(&before, &snapshot(&again.dir)?);

    let pass = missing.is_empty() && has_tables && fresh.is_empty() && rerun.is_empty();
    let mut detail = format!(
        "{} gap rows (2 models x 2 test splits x {} cells), tables present: {has_tables}",
        rows.len(),
        grid.len()
    );
    if !missing.is_empty() {
        detail.push_str(&format!("; missing {}", missing.join(", ")));
    }
    detail.push_str(&match (fresh.is_empty(), rerun.is_empty()) {
        (true, true) => "; identical from scratch and on rerun".to_string(),
        _ => format!("; differing: fresh {fresh:?}, rerun {rerun:?}"),
    });
    Ok(Outcome::new(pass, detail))
}

/// The solvable-tuple counts for 42 and 24 over [1, 13].
pub fn solvable_counts() -> anyhow::Result<Outcome> {
    let start = Instant::now();
    let c42 = solvable_tuple_count(42, 1, 13);
    let c24 = solvable_tuple_count(24, 1, 13);
    let (fast, time) = within(start.elapsed(), Duration::from_secs(300));
    Ok(Outcome::new(
        fast && c42 > c24,
        format!("solvable 4-multisets over [1, 13]: 42 -> {c42}, 24 -> {c24}; {time}"),
    ))
}

/// Two fresh runs with the same seed write identical datasets, checkpoints,
/// logs and reports.
pub fn determinism(first: &SeedRun, second: &SeedRun) -> anyhow::Result<Outcome> {
    let (a, b) = (snapshot(&first.dir)?, snapshot(&second.dir)?);
    let diff = differing(&a, &b);
    let kinds = ["datasets", "checkpoints", "logs", "reports"];
    let covered = kinds.iter().all(|k| a.keys().any(|p| p.starts_with(k)));
    Ok(Outcome::new(
        diff.is_empty() && covered,
        if diff.is_empty() {
            format!("{} files identical across two runs with seed {}", a.len(), first.seed)
        } else {
            format!("differing files: {}", diff.join(", "))
        },
    ))
}

/// Models and test puzzles from finished runs, for the metric checks.
pub fn trained_models(runs: &[SeedRun]) -> anyhow::Result<Vec<(PolicyModel, Vec<Puzzle>)>> {
    let mut out = Vec::new();
    for run in runs {
        let path = run.dir.join(format!("checkpoints/gfn_24_{}.ckpt", run.seed));
        let (ckpt, _) = gameofn::checkpoint::Checkpoint::read(&path)?;
        let (_, records) = gameofn::artifacts::read_dataset(&run.dir.join(format!("datasets/24_{}.jsonl", run.seed)))?;
        let mut puzzles = puzzles_in(&records, Split::TestLowdiv)?;
        puzzles.extend(puzzles_in(&records, Split::TestHighdiv)?);
        out.push((ckpt.model, puzzles));
    }
    Ok(out)
}

/// A small fallback set when the pipeline runs failed.
pub fn untrained_models() -> anyhow::Result<Vec<(PolicyModel, Vec<Puzzle>)>> {
    let records = build_dataset(24, 0, DatasetSizes::default(), 1, 13)?;
    let puzzles = puzzles_in(&records, Split::TestHighdiv)?;
    Ok(vec![(TrainConfig::default().initial_model(), puzzles)])
}
