use gameofn_core::check::verify_rendered;
use gameofn_core::decoding::{DecodeConfig, Strategy};
use gameofn_core::eval::{evaluate_cell, evaluate_puzzle, evaluate_puzzle_n, AttemptResult, CellResult, PuzzleEval};
use gameofn_core::game::render_trajectory;
use gameofn_core::oracle::solution_count;
use gameofn_core::policy::{PolicyConfig, PolicyModel};
use gameofn_core::{rng, ArithStep, Op, Puzzle, Trajectory};
use rand::seq::SliceRandom;
use rand::Rng;

fn path(numbers: [i64; 4], target: i64, steps: &[(i64, Op, i64)]) -> Trajectory {
    let steps = steps.iter().map(|&(l, op, r)| ArithStep::ints(l, op, r).unwrap()).collect();
    Trajectory::from_steps(Puzzle::new(numbers, target).unwrap(), steps).unwrap()
}

fn check_invariants(e: &PuzzleEval) {
    assert!(e.tc >= e.sr as usize);
    assert!(e.tc <= e.attempts.len());
    assert!(e.tc <= solution_count(&e.puzzle));
    assert_eq!(e.sr == 1, e.attempts.iter().any(|a| a.success));
    for a in &e.attempts {
        let verdict = verify_rendered(&render_trajectory(&a.trajectory), e.puzzle.target()).unwrap();
        assert_eq!(verdict, a.success);
    }
}

#[test]
fn invariants_hold_on_random_puzzles() {
    let model = PolicyModel::initial(PolicyConfig { hidden: 16 }, 2);
    let mut r = rng::from_seed(31);
    let grid = DecodeConfig::optimal_grid();
    for i in 0..120 {
        let puzzle = Puzzle::new([0; 4].map(|_| r.gen_range(1..=6)), if i % 2 == 0 { 24 } else { 12 }).unwrap();
        let config = grid[i % grid.len()];
        check_invariants(&evaluate_puzzle(&model, &puzzle, &config, i as u64).unwrap());
    }
}

#[test]
fn three_distinct_successes_among_twenty() {
    use Op::*;
    let n = [2, 4, 8, 10];
    let wins = [
        path(n, 24, &[(8, Div, 4), (10, Add, 2), (2, Mul, 12)]),
        path(n, 24, &[(2, Add, 10), (8, Mul, 12), (96, Div, 4)]),
        path(n, 24, &[(2, Add, 10), (4, Add, 8), (12, Add, 12)]),
        // same as the first up to operand order
        path(n, 24, &[(8, Div, 4), (2, Add, 10), (12, Mul, 2)]),
    ];
    let miss = path(n, 24, &[(2, Add, 10), (8, Sub, 4), (12, Sub, 4)]);
    let mut attempts: Vec<AttemptResult> = Vec::new();
    for i in 0..20 {
        let t = if i % 3 == 0 { wins[(i / 3) % 4].clone() } else { miss.clone() };
        attempts.push(AttemptResult::grade(t));
    }
    let e = PuzzleEval::from_attempts(Puzzle::new(n, 24).unwrap(), attempts);
    assert_eq!((e.sr, e.tc), (1, 3));
    check_invariants(&e);
}

#[test]
fn unsolvable_puzzle_scores_zero() {
    let model = PolicyModel::initial(PolicyConfig { hidden: 8 }, 0);
    let puzzle = Puzzle::new([1, 1, 1, 1], 24).unwrap();
    for config in DecodeConfig::optimal_grid() {
        let e = evaluate_puzzle(&model, &puzzle, &config, 9).unwrap();
        assert_eq!((e.sr, e.tc), (0, 0));
    }
}

#[test]
fn aggregation_edge_cases() {
    let config = DecodeConfig::new(0.7, Strategy::TopK { k: 10 }).unwrap();
    let fail = PuzzleEval::from_attempts(
        Puzzle::new([1, 1, 1, 1], 24).unwrap(),
        vec![AttemptResult::grade(path([1, 1, 1, 1], 24, &[(1, Op::Add, 1), (1, Op::Add, 1), (2, Op::Add, 2)]))],
    );
    let cell = CellResult::aggregate(&config, &[fail.clone(), fail]);
    assert_eq!(cell.mean_sr, 0.0);
    assert_eq!(cell.tc_per_sr, None);
    assert_eq!(cell.tc_per_sr_mean_of_ratios, None);

    let win = path([2, 4, 8, 10], 24, &[(8, Op::Div, 4), (10, Op::Add, 2), (2, Op::Mul, 12)]);
    let solved = PuzzleEval::from_attempts(*win.puzzle(), vec![AttemptResult::grade(win.clone())]);
    let cell = CellResult::aggregate(&config, &[solved.clone(), solved]);
    assert_eq!(cell.mean_sr, 1.0);
    assert_eq!(cell.tc_per_sr, Some(1.0));
}

#[test]
fn order_of_puzzles_does_not_matter() {
    let model = PolicyModel::initial(PolicyConfig { hidden: 16 }, 5);
    let mut puzzles: Vec<Puzzle> = [[1, 2, 3, 4], [2, 4, 8, 10], [3, 3, 8, 8], [4, 4, 4, 4], [1, 5, 5, 5], [2, 3, 4, 6]]
        .iter()
        .map(|&n| Puzzle::new(n, 24).unwrap())
        .collect();
    let config = DecodeConfig::new(1.1, Strategy::MinP { p: 0.05, absolute: false }).unwrap();
    let (a, evals_a) = evaluate_cell(&model, &puzzles, &config, 77, 20).unwrap();
    puzzles.shuffle(&mut rng::from_seed(1));
    let (b, evals_b) = evaluate_cell(&model, &puzzles, &config, 77, 20).unwrap();
    assert_eq!(a, b);
    for e in &evals_a {
        assert!(evals_b.contains(e));
    }
}

#[test]
fn more_attempts_extend_the_same_stream() {
    let model = PolicyModel::initial(PolicyConfig { hidden: 16 }, 6);
    let config = DecodeConfig::new(1.1, Strategy::TopP { p: 0.85 }).unwrap();
    for n in [[1, 2, 3, 4], [3, 3, 8, 8], [2, 5, 7, 11]] {
        let puzzle = Puzzle::new(n, 24).unwrap();
        let short = evaluate_puzzle_n(&model, &puzzle, &config, 3, 10).unwrap();
        let long = evaluate_puzzle_n(&model, &puzzle, &config, 3, 20).unwrap();
        assert_eq!(&long.attempts[..10], &short.attempts[..]);
        assert!(long.sr >= short.sr);
        assert!(long.tc >= short.tc);
    }
}

#[test]
fn evaluation_is_deterministic_per_seed() {
    let model = PolicyModel::initial(PolicyConfig { hidden: 16 }, 7);
    let puzzle = Puzzle::new([2, 4, 8, 10], 24).unwrap();
    let config = DecodeConfig::new(0.7, Strategy::TopK { k: 10 }).unwrap();
    let a = evaluate_puzzle(&model, &puzzle, &config, 1).unwrap();
    assert_eq!(a, evaluate_puzzle(&model, &puzzle, &config, 1).unwrap());
    assert_eq!(a.attempts.len(), 20);
}
