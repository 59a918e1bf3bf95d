//! Brute-force solution oracle.
//!
//! Walks the whole three-step action DAG of a puzzle. Solutions are counted
//! at trajectory granularity: two solutions are the same iff their step lists
//! match after putting commutative operands in canonical order; step order
//! matters. A coarser expression-level count is available for reporting.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::game::{apply, legal_actions, render_trajectory, ArithStep, GameState, Op, Puzzle, Trajectory, EPISODE_STEPS};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSet {
    pub puzzle: Puzzle,
    pub solutions: Vec<Trajectory>,
    pub count: usize,
}

impl SolutionSet {
    pub fn rendered(&self) -> Vec<String> {
        self.solutions.iter().map(render_trajectory).collect()
    }

    pub fn contains(&self, trajectory: &Trajectory) -> bool {
        let key = trajectory.canonical_key();
        self.solutions.iter().any(|s| s.canonical_key() == key)
    }
}

/// Depth-first walk over every canonical action sequence from `state`.
/// Branches whose arithmetic overflows are dropped.
fn walk<F>(state: &GameState, path: &mut Vec<ArithStep>, visit: &mut F)
where
    F: FnMut(&[ArithStep], &GameState),
{
    if state.is_terminal() {
        visit(path, state);
        return;
    }
    let Ok(actions) = legal_actions(state) else {
        return;
    };
    for action in actions {
        let Ok(next) = apply(state, &action) else {
            continue;
        };
        path.push(action);
        walk(&next, path, visit);
        path.pop();
    }
}

/// Every canonical three-step trajectory of the puzzle.
pub fn all_trajectories(puzzle: &Puzzle) -> Vec<Trajectory> {
    let mut out = Vec::new();
    walk(&puzzle.initial_state(), &mut Vec::new(), &mut |path, _| {
        if let Ok(t) = Trajectory::from_steps(*puzzle, path.to_vec()) {
            out.push(t);
        }
    });
    out
}

/// All solutions, sorted by rendered text.
pub fn enumerate_solutions(puzzle: &Puzzle) -> SolutionSet {
    let target = Rational::from(puzzle.target());
    let mut keyed: Vec<(String, Trajectory)> = Vec::new();
    walk(&puzzle.initial_state(), &mut Vec::new(), &mut |path, end| {
        if end.remaining()[0] == target {
            if let Ok(t) = Trajectory::from_steps(*puzzle, path.to_vec()) {
                keyed.push((render_trajectory(&t), t));
            }
        }
    });
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    let solutions: Vec<Trajectory> = keyed.into_iter().map(|(_, t)| t).collect();
    SolutionSet {
        puzzle: *puzzle,
        count: solutions.len(),
        solutions,
    }
}

pub fn solution_count(puzzle: &Puzzle) -> usize {
    let target = Rational::from(puzzle.target());
    let mut n = 0;
    walk(&puzzle.initial_state(), &mut Vec::new(), &mut |_, end| {
        if end.remaining()[0] == target {
            n += 1;
        }
    });
    n
}

pub fn is_solvable(puzzle: &Puzzle) -> bool {
    fn go(state: &GameState, target: Rational) -> bool {
        if state.is_terminal() {
            return state.remaining()[0] == target;
        }
        let Ok(actions) = legal_actions(state) else {
            return false;
        };
        actions
            .iter()
            .filter_map(|a| apply(state, a).ok())
            .any(|next| go(&next, target))
    }
    go(&puzzle.initial_state(), Rational::from(puzzle.target()))
}

/// Distinct terminal values reachable from the puzzle.
pub fn terminal_values(puzzle: &Puzzle) -> BTreeSet<Rational> {
    let mut out = BTreeSet::new();
    walk(&puzzle.initial_state(), &mut Vec::new(), &mut |_, end| {
        out.insert(end.remaining()[0]);
    });
    out
}

/// Solution keys found by ordered-position enumeration followed by
/// canonical dedup. Shares no code with [`legal_actions`], so agreement
/// with [`solution_count`] cross-checks the canonicalization.
pub fn positional_solution_keys(puzzle: &Puzzle) -> BTreeSet<Vec<(Rational, Op, Rational)>> {
    fn go(
        values: &[Rational],
        target: Rational,
        path: &mut Vec<(Rational, Op, Rational)>,
        out: &mut BTreeSet<Vec<(Rational, Op, Rational)>>,
    ) {
        if values.len() == 1 {
            if values[0] == target {
                out.insert(path.clone());
            }
            return;
        }
        for i in 0..values.len() {
            for j in 0..values.len() {
                if i == j {
                    continue;
                }
                let rest: Vec<Rational> = values
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != i && k != j)
                    .map(|(_, &v)| v)
                    .collect();
                for op in Op::ALL {
                    let (a, b) = (values[i], values[j]);
                    let Ok(v) = op.eval(a, b) else { continue };
                    let (l, r) = if op.is_commutative() && b < a { (b, a) } else { (a, b) };
                    let mut next = rest.clone();
                    next.push(v);
                    path.push((l, op, r));
                    go(&next, target, path, out);
                    path.pop();
                }
            }
        }
    }
    let values: Vec<Rational> = puzzle.numbers().iter().map(|&n| Rational::from(n)).collect();
    let mut out = BTreeSet::new();
    go(&values, Rational::from(puzzle.target()), &mut Vec::new(), &mut out);
    out
}

/// Number of distinct solution expressions, with the children of `+` and
/// `*` sorted and nothing else normalized. Coarser than the trajectory count
/// because step order is ignored.
pub fn expression_count(puzzle: &Puzzle) -> usize {
    fn go(values: &[(Rational, String)], target: Rational, out: &mut BTreeSet<String>) {
        if values.len() == 1 {
            if values[0].0 == target {
                out.insert(values[0].1.clone());
            }
            return;
        }
        for i in 0..values.len() {
            for j in 0..values.len() {
                if i == j {
                    continue;
                }
                let (a, ea) = &values[i];
                let (b, eb) = &values[j];
                for op in Op::ALL {
                    if op.is_commutative() && i > j {
                        continue;
                    }
                    let Ok(v) = op.eval(*a, *b) else { continue };
                    let (x, y) = if op.is_commutative() && eb < ea { (eb, ea) } else { (ea, eb) };
                    let expr = format!("({x}{}{y})", op.symbol());
                    let mut next: Vec<(Rational, String)> = values
                        .iter()
                        .enumerate()
                        .filter(|&(k, _)| k != i && k != j)
                        .map(|(_, e)| e.clone())
                        .collect();
                    next.push((v, expr));
                    go(&next, target, out);
                }
            }
        }
    }
    let values: Vec<(Rational, String)> = puzzle
        .numbers()
        .iter()
        .map(|&n| (Rational::from(n), format!("{n}")))
        .collect();
    let mut out = BTreeSet::new();
    go(&values, Rational::from(puzzle.target()), &mut out);
    out.len()
}

/// Every 4-multiset over `[lo, hi]` in ascending lexicographic order.
pub fn multisets(lo: i64, hi: i64) -> impl Iterator<Item = [i64; 4]> {
    (lo..=hi).flat_map(move |a| {
        (a..=hi).flat_map(move |b| (b..=hi).flat_map(move |c| (c..=hi).map(move |d| [a, b, c, d])))
    })
}

/// Number of 4-multisets over `[lo, hi]` that admit at least one solution.
pub fn solvable_tuple_count(target: i64, lo: i64, hi: i64) -> usize {
    if lo > hi || lo < 1 || target < 1 {
        return 0;
    }
    multisets(lo, hi)
        .filter_map(|n| Puzzle::with_max_operand(n, target, hi).ok())
        .filter(is_solvable)
        .count()
}

/// In-degree of every reachable state, per depth. The in-degree counts
/// distinct (parent state, action) edges, which is the parent set of the
/// uniform backward policy.
#[derive(Debug, Clone)]
pub struct PuzzleDag {
    layers: Vec<BTreeMap<Vec<Rational>, u32>>,
}

impl PuzzleDag {
    pub fn build(puzzle: &Puzzle) -> Self {
        let mut layers: Vec<BTreeMap<Vec<Rational>, u32>> = Vec::with_capacity(EPISODE_STEPS + 1);
        let root = puzzle.initial_state();
        let mut frontier: BTreeMap<Vec<Rational>, GameState> = BTreeMap::new();
        frontier.insert(root.key(), root.clone());
        layers.push(BTreeMap::from([(root.key(), 0)]));
        for _ in 0..EPISODE_STEPS {
            let mut degrees = BTreeMap::new();
            let mut next_frontier = BTreeMap::new();
            for state in frontier.values() {
                let Ok(actions) = legal_actions(state) else { continue };
                for action in actions {
                    let Ok(child) = apply(state, &action) else { continue };
                    let key = child.key();
                    *degrees.entry(key.clone()).or_insert(0u32) += 1;
                    next_frontier.entry(key).or_insert(child);
                }
            }
            layers.push(degrees);
            frontier = next_frontier;
        }
        PuzzleDag { layers }
    }

    /// Number of incoming edges of `state`; zero if unreachable.
    pub fn in_degree(&self, state: &GameState) -> u32 {
        self.layers
            .get(state.depth())
            .and_then(|l| l.get(&state.key()))
            .copied()
            .unwrap_or(0)
    }

    pub fn states_at(&self, depth: usize) -> impl Iterator<Item = &Vec<Rational>> {
        self.layers[depth].keys()
    }

    pub fn terminal_count(&self) -> usize {
        self.layers[EPISODE_STEPS].len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check::verify_rendered;

    fn p(n: [i64; 4], t: i64) -> Puzzle {
        Puzzle::new(n, t).unwrap()
    }

    fn traj(puzzle: Puzzle, steps: &[(i64, Op, i64)]) -> Trajectory {
        let steps = steps.iter().map(|&(l, op, r)| ArithStep::ints(l, op, r).unwrap()).collect();
        Trajectory::from_steps(puzzle, steps).unwrap()
    }

    #[test]
    fn worked_example_paths_are_found() {
        let puzzle = p([2, 4, 8, 10], 24);
        let set = enumerate_solutions(&puzzle);
        assert!(set.count >= 3);
        assert_eq!(set.count, set.solutions.len());
        for steps in [
            [(8, Op::Div, 4), (10, Op::Add, 2), (2, Op::Mul, 12)],
            [(2, Op::Add, 10), (8, Op::Mul, 12), (96, Op::Div, 4)],
            [(2, Op::Add, 10), (4, Op::Add, 8), (12, Op::Add, 12)],
        ] {
            assert!(set.contains(&traj(puzzle, &steps)));
        }
        let failed = traj(puzzle, &[(2, Op::Add, 10), (8, Op::Sub, 4), (12, Op::Sub, 4)]);
        assert!(!set.contains(&failed));
    }

    #[test]
    fn ones_cannot_make_24() {
        assert_eq!(enumerate_solutions(&p([1, 1, 1, 1], 24)).count, 0);
        assert!(!is_solvable(&p([1, 1, 1, 1], 24)));
        // independent path agrees
        assert!(positional_solution_keys(&p([1, 1, 1, 1], 24)).is_empty());
    }

    #[test]
    fn sixes_counted_by_enumeration() {
        let set = enumerate_solutions(&p([6, 6, 6, 6], 24));
        assert_eq!(set.count, positional_solution_keys(&p([6, 6, 6, 6], 24)).len());
        assert!(set.count > 0);
        for text in set.rendered() {
            assert_eq!(verify_rendered(&text, 24), Ok(true));
        }
    }

    #[test]
    fn solutions_are_sorted_and_unique() {
        let set = enumerate_solutions(&p([8, 3, 1, 6], 24));
        let text = set.rendered();
        let mut sorted = text.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(text, sorted);
        assert!(set.count >= 7);
    }

    #[test]
    fn tuple_count_small_ranges() {
        assert_eq!(solvable_tuple_count(24, 1, 1), 0);
        assert_eq!(solvable_tuple_count(4, 1, 1), 1);
        assert_eq!(solvable_tuple_count(24, 3, 2), 0);
    }

    #[test]
    fn expression_count_is_coarser() {
        let puzzle = p([2, 4, 8, 10], 24);
        let e = expression_count(&puzzle);
        assert!(e >= 1);
        assert!(e <= solution_count(&puzzle));
    }

    #[test]
    fn dag_root_and_first_layer() {
        let puzzle = p([6, 6, 6, 6], 24);
        let dag = PuzzleDag::build(&puzzle);
        assert_eq!(dag.in_degree(&puzzle.initial_state()), 0);
        // {6,6,6,6} has 4 actions, each reaching a distinct child exactly once
        let first: Vec<_> = dag.states_at(1).collect();
        assert_eq!(first.len(), 4);
        let terminals = terminal_values(&puzzle);
        assert_eq!(dag.terminal_count(), terminals.len());
    }
}
