//! The Game-of-N state space.
//!
//! A puzzle is four positive integers and a target. Each step removes two
//! values from the multiset, combines them with one of `+ - * /` and puts the
//! result back, so every episode is exactly three steps long and ends with a
//! single value. States form a DAG rooted at the puzzle's numbers.
//!
//! Actions are canonical by value: a commutative step is stored with its
//! smaller operand on the left, and duplicate values in the multiset never
//! produce duplicate actions.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Rational;

pub const NUM_OPERANDS: usize = 4;
pub const EPISODE_STEPS: usize = NUM_OPERANDS - 1;
pub const DEFAULT_MAX_OPERAND: i64 = 13;

pub const REWARD_SUCCESS: f64 = 100.0;
pub const REWARD_FAIL: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Puzzle {
    numbers: [i64; NUM_OPERANDS],
    target: i64,
}

impl Puzzle {
    /// Operands must lie in `[1, 13]`.
    pub fn new(numbers: [i64; NUM_OPERANDS], target: i64) -> Result<Self> {
        Self::with_max_operand(numbers, target, DEFAULT_MAX_OPERAND)
    }

    pub fn with_max_operand(
        numbers: [i64; NUM_OPERANDS],
        target: i64,
        max_operand: i64,
    ) -> Result<Self> {
        if target < 1 {
            return Err(Error::InvalidPuzzle(format!("target {target} must be >= 1")));
        }
        if let Some(bad) = numbers.iter().find(|&&n| n < 1 || n > max_operand) {
            return Err(Error::InvalidPuzzle(format!(
                "operand {bad} outside [1, {max_operand}]"
            )));
        }
        Ok(Puzzle { numbers, target })
    }

    pub fn numbers(&self) -> [i64; NUM_OPERANDS] {
        self.numbers
    }

    pub fn target(&self) -> i64 {
        self.target
    }

    /// Numbers in ascending order; identifies the puzzle as a multiset.
    pub fn sorted_numbers(&self) -> [i64; NUM_OPERANDS] {
        let mut n = self.numbers;
        n.sort_unstable();
        n
    }

    pub fn with_target(&self, target: i64) -> Result<Self> {
        let max = self.numbers.iter().copied().max().unwrap_or(1);
        Self::with_max_operand(self.numbers, target, max)
    }

    pub fn initial_state(&self) -> GameState {
        GameState {
            remaining: self.numbers.iter().map(|&n| Rational::from(n)).collect(),
            target: self.target,
            depth: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = "+")]
    Add,
    #[serde(rename = "-")]
    Sub,
    #[serde(rename = "*")]
    Mul,
    #[serde(rename = "/")]
    Div,
}

impl Op {
    pub const ALL: [Op; 4] = [Op::Add, Op::Sub, Op::Mul, Op::Div];

    pub fn symbol(self) -> char {
        match self {
            Op::Add => '+',
            Op::Sub => '-',
            Op::Mul => '*',
            Op::Div => '/',
        }
    }

    pub fn from_symbol(c: char) -> Option<Op> {
        Op::ALL.into_iter().find(|op| op.symbol() == c)
    }

    pub fn is_commutative(self) -> bool {
        matches!(self, Op::Add | Op::Mul)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn eval(self, left: Rational, right: Rational) -> Result<Rational> {
        match self {
            Op::Add => left.checked_add(right),
            Op::Sub => left.checked_sub(right),
            Op::Mul => left.checked_mul(right),
            Op::Div => left.checked_div(right),
        }
    }
}

/// One step `left op right = result`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ArithStep {
    pub left: Rational,
    pub op: Op,
    pub right: Rational,
    pub result: Rational,
}

impl ArithStep {
    pub fn new(left: Rational, op: Op, right: Rational) -> Result<Self> {
        let result = op.eval(left, right)?;
        Ok(ArithStep {
            left,
            op,
            right,
            result,
        })
    }

    pub fn ints(left: i64, op: Op, right: i64) -> Result<Self> {
        Self::new(Rational::from(left), op, Rational::from(right))
    }

    /// Commutative steps with the smaller operand first; others unchanged.
    pub fn canonical(self) -> Self {
        if self.op.is_commutative() && self.right < self.left {
            ArithStep {
                left: self.right,
                right: self.left,
                ..self
            }
        } else {
            self
        }
    }

    pub fn same_action(&self, other: &ArithStep) -> bool {
        self.canonical() == other.canonical()
    }
}

impl fmt::Display for ArithStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} = {}",
            self.left,
            self.op.symbol(),
            self.right,
            self.result
        )
    }
}

/// A DAG node: the remaining values (kept in insertion order for rendering)
/// plus the target and the number of steps taken so far.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GameState {
    remaining: Vec<Rational>,
    target: i64,
    depth: usize,
}

impl GameState {
    pub fn remaining(&self) -> &[Rational] {
        &self.remaining
    }

    pub fn target(&self) -> i64 {
        self.target
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn is_terminal(&self) -> bool {
        self.depth >= EPISODE_STEPS
    }

    /// Sorted values: two states are the same DAG vertex iff their keys match.
    pub fn key(&self) -> Vec<Rational> {
        let mut k = self.remaining.clone();
        k.sort_unstable();
        k
    }

    pub fn same_vertex(&self, other: &GameState) -> bool {
        self.depth == other.depth && self.target == other.target && self.key() == other.key()
    }

    fn count(&self, v: Rational) -> usize {
        self.remaining.iter().filter(|&&x| x == v).count()
    }
}

/// Every distinct action available in `state`, in a fixed order: distinct
/// value pairs ascending, and within a pair `+`, `-`, `*`, `/` with both
/// orderings for the non-commutative operators.
pub fn legal_actions(state: &GameState) -> Result<Vec<ArithStep>> {
    if state.is_terminal() {
        return Err(Error::TerminalState);
    }
    let mut values = state.key();
    values.dedup();
    let mut out = Vec::new();
    for (i, &a) in values.iter().enumerate() {
        for &b in &values[i..] {
            if a == b && state.count(a) < 2 {
                continue;
            }
            for op in Op::ALL {
                let orders: &[(Rational, Rational)] = if op.is_commutative() || a == b {
                    &[(a, b)][..]
                } else {
                    &[(a, b), (b, a)][..]
                };
                for &(l, r) in orders {
                    if op == Op::Div && r.is_zero() {
                        continue;
                    }
                    out.push(ArithStep::new(l, op, r)?);
                }
            }
        }
    }
    Ok(out)
}

/// Applies `action`, accepting commutative steps in either operand order.
pub fn apply(state: &GameState, action: &ArithStep) -> Result<GameState> {
    if state.is_terminal() {
        return Err(Error::TerminalState);
    }
    let illegal = || Error::IllegalAction(format!("{action}"));
    let needed = if action.left == action.right { 2 } else { 1 };
    if state.count(action.left) < needed || state.count(action.right) < 1 {
        return Err(illegal());
    }
    if action.op == Op::Div && action.right.is_zero() {
        return Err(illegal());
    }
    let result = action.op.eval(action.left, action.right)?;
    if result != action.result {
        return Err(illegal());
    }
    let mut remaining = state.remaining.clone();
    for v in [action.left, action.right] {
        let pos = remaining.iter().position(|&x| x == v).ok_or_else(illegal)?;
        remaining.remove(pos);
    }
    remaining.push(result);
    Ok(GameState {
        remaining,
        target: state.target,
        depth: state.depth + 1,
    })
}

/// A complete episode: three steps from the puzzle's numbers to a single value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Trajectory {
    puzzle: Puzzle,
    steps: Vec<ArithStep>,
    terminal_value: Rational,
}

impl Trajectory {
    /// Replays `steps` from the puzzle and rejects anything illegal.
    pub fn from_steps(puzzle: Puzzle, steps: Vec<ArithStep>) -> Result<Self> {
        if steps.len() != EPISODE_STEPS {
            return Err(Error::InvalidTrajectory(format!(
                "expected {EPISODE_STEPS} steps, got {}",
                steps.len()
            )));
        }
        let mut state = puzzle.initial_state();
        for step in &steps {
            state = apply(&state, step)?;
        }
        let terminal_value = state.remaining[0];
        Ok(Trajectory {
            puzzle,
            steps,
            terminal_value,
        })
    }

    pub fn puzzle(&self) -> &Puzzle {
        &self.puzzle
    }

    pub fn steps(&self) -> &[ArithStep] {
        &self.steps
    }

    pub fn terminal_value(&self) -> Rational {
        self.terminal_value
    }

    pub fn is_success(&self) -> bool {
        self.terminal_value == Rational::from(self.puzzle.target)
    }

    /// `s_0, s_1, s_2, s_3`.
    pub fn states(&self) -> Vec<GameState> {
        let mut out = Vec::with_capacity(EPISODE_STEPS + 1);
        let mut state = self.puzzle.initial_state();
        for step in &self.steps {
            // validated at construction
            let next = apply(&state, step).expect("trajectory replays");
            out.push(state);
            state = next;
        }
        out.push(state);
        out
    }

    pub fn canonical(&self) -> Trajectory {
        Trajectory {
            puzzle: self.puzzle,
            steps: self.steps.iter().map(|s| s.canonical()).collect(),
            terminal_value: self.terminal_value,
        }
    }

    /// Dedup key shared by the oracle and the grader.
    pub fn canonical_key(&self) -> String {
        render_trajectory(&self.canonical())
    }
}

/// `REWARD_SUCCESS` iff the terminal value is exactly the target.
pub fn reward(trajectory: &Trajectory) -> f64 {
    reward_with(trajectory, REWARD_SUCCESS, REWARD_FAIL)
}

pub fn reward_with(trajectory: &Trajectory, success: f64, fail: f64) -> f64 {
    if trajectory.is_success() {
        success
    } else {
        fail
    }
}

/// Renders the trajectory as
///
/// ```text
/// Input: 2 4 8 10
/// Steps:
/// 8 / 4 = 2 (left: 2 10 2)
/// 10 + 2 = 12 (left: 2 12)
/// 2 * 12 = 24 (left: 24)
/// ```
pub fn render_trajectory(trajectory: &Trajectory) -> String {
    let mut out = String::new();
    out.push_str("Input:");
    for n in trajectory.puzzle.numbers {
        let _ = write!(out, " {n}");
    }
    out.push_str("\nSteps:\n");
    let states = trajectory.states();
    for (step, after) in trajectory.steps.iter().zip(&states[1..]) {
        let _ = write!(out, "{step} (left:");
        for v in after.remaining() {
            let _ = write!(out, " {v}");
        }
        out.push_str(")\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;
    use alloc::vec;

    fn state(values: &[i64], depth: usize) -> GameState {
        GameState {
            remaining: values.iter().map(|&v| Rational::from(v)).collect(),
            target: 24,
            depth,
        }
    }

    fn step(l: i64, op: Op, r: i64) -> ArithStep {
        ArithStep::ints(l, op, r).unwrap()
    }

    /// Every (position pair, op) combination, canonicalized and deduplicated.
    fn brute_force_action_count(values: &[i64]) -> usize {
        let mut seen = BTreeSet::new();
        for i in 0..values.len() {
            for j in 0..values.len() {
                if i == j {
                    continue;
                }
                for op in Op::ALL {
                    if op == Op::Div && values[j] == 0 {
                        continue;
                    }
                    let s = step(values[i], op, values[j]).canonical();
                    seen.insert((s.left, s.op, s.right));
                }
            }
        }
        seen.len()
    }

    #[test]
    fn puzzle_validation() {
        assert!(Puzzle::new([1, 2, 3, 13], 24).is_ok());
        assert!(Puzzle::new([0, 2, 3, 4], 24).is_err());
        assert!(Puzzle::new([1, 2, 3, 14], 24).is_err());
        assert!(Puzzle::new([1, 2, 3, 4], 0).is_err());
        assert!(Puzzle::with_max_operand([1, 2, 3, 20], 24, 20).is_ok());
    }

    #[test]
    fn division_example_is_legal() {
        let actions = legal_actions(&state(&[2, 4, 8, 10], 0)).unwrap();
        assert!(actions.contains(&step(8, Op::Div, 4)));
    }

    #[test]
    fn duplicate_pair_yields_four_actions() {
        let actions = legal_actions(&state(&[6, 6], 2)).unwrap();
        let expected = vec![
            step(6, Op::Add, 6),
            step(6, Op::Sub, 6),
            step(6, Op::Mul, 6),
            step(6, Op::Div, 6),
        ];
        assert_eq!(actions, expected);
    }

    #[test]
    fn three_distinct_values_action_count() {
        // brute force over ordered positions gives 18 distinct canonical triples
        assert_eq!(brute_force_action_count(&[3, 6, 24]), 18);
        assert_eq!(legal_actions(&state(&[3, 6, 24], 1)).unwrap().len(), 18);
    }

    #[test]
    fn action_count_matches_brute_force_with_duplicates() {
        for values in [[2, 2, 2, 2], [1, 1, 2, 2], [6, 6, 6, 6], [2, 4, 8, 10], [0, 0, 1, 3]] {
            let got = legal_actions(&state(&values, 0)).unwrap().len();
            assert_eq!(got, brute_force_action_count(&values), "{values:?}");
        }
    }

    #[test]
    fn zero_divisor_is_masked() {
        let actions = legal_actions(&state(&[0, 5], 2)).unwrap();
        assert!(actions.iter().all(|a| !(a.op == Op::Div && a.right.is_zero())));
        assert!(actions.contains(&step(0, Op::Div, 5)));
    }

    #[test]
    fn terminal_state_has_no_actions() {
        assert_eq!(legal_actions(&state(&[24], 3)), Err(Error::TerminalState));
    }

    #[test]
    fn apply_examples() {
        let next = apply(&state(&[2, 4, 8, 10], 0), &step(8, Op::Div, 4)).unwrap();
        assert_eq!(next.remaining(), &[2, 10, 2].map(Rational::from));
        assert_eq!(next.depth(), 1);

        let next = apply(&state(&[6, 6], 2), &step(6, Op::Div, 6)).unwrap();
        assert_eq!(next.remaining(), &[Rational::ONE]);
        assert_eq!(next.depth(), 3);
        assert!(next.is_terminal());

        let next = apply(&state(&[3, 6, 24], 1), &step(3, Op::Mul, 6)).unwrap();
        assert_eq!(next.key(), vec![Rational::from(18), Rational::from(24)]);
    }

    #[test]
    fn apply_rejects_illegal() {
        let s = state(&[2, 4, 8, 10], 0);
        assert!(matches!(
            apply(&s, &step(3, Op::Add, 4)),
            Err(Error::IllegalAction(_))
        ));
        assert!(matches!(
            apply(&s, &step(2, Op::Add, 2)),
            Err(Error::IllegalAction(_))
        ));
        let forged = ArithStep {
            result: Rational::from(99),
            ..step(2, Op::Add, 4)
        };
        assert!(matches!(apply(&s, &forged), Err(Error::IllegalAction(_))));
    }

    #[test]
    fn commutative_step_accepted_in_either_order() {
        let s = state(&[2, 10, 2], 1);
        let a = apply(&s, &step(10, Op::Add, 2)).unwrap();
        let b = apply(&s, &step(2, Op::Add, 10)).unwrap();
        assert!(a.same_vertex(&b));
    }

    fn traj(numbers: [i64; 4], target: i64, steps: &[(i64, Op, i64)]) -> Trajectory {
        let puzzle = Puzzle::new(numbers, target).unwrap();
        let steps = steps.iter().map(|&(l, op, r)| step(l, op, r)).collect();
        Trajectory::from_steps(puzzle, steps).unwrap()
    }

    #[test]
    fn reward_examples() {
        let win = traj([2, 12, 3, 6], 42, &[(2, Op::Mul, 12), (3, Op::Mul, 6), (24, Op::Add, 18)]);
        assert_eq!(reward(&win), 100.0);
        let lose = traj([2, 12, 3, 6], 42, &[(2, Op::Add, 3), (12, Op::Sub, 6), (5, Op::Add, 6)]);
        assert_eq!(lose.terminal_value(), Rational::from(11));
        assert_eq!(reward(&lose), 0.001);
    }

    #[test]
    fn render_matches_worked_examples() {
        let t = traj([2, 4, 8, 10], 24, &[(8, Op::Div, 4), (10, Op::Add, 2), (2, Op::Mul, 12)]);
        assert_eq!(
            render_trajectory(&t),
            "Input: 2 4 8 10\nSteps:\n8 / 4 = 2 (left: 2 10 2)\n10 + 2 = 12 (left: 2 12)\n2 * 12 = 24 (left: 24)\n"
        );
        let t = traj([2, 4, 8, 10], 24, &[(2, Op::Add, 10), (8, Op::Mul, 12), (96, Op::Div, 4)]);
        assert!(render_trajectory(&t).contains("96 / 4 = 24 (left: 24)\n"));
        let t = traj([2, 12, 3, 6], 42, &[(2, Op::Mul, 6), (12, Op::Sub, 3), (9, Op::Add, 12)]);
        let text = render_trajectory(&t);
        assert!(text.contains("2 * 6 = 12 (left: 12 3 12)\n"));
        assert!(text.contains("12 - 3 = 9 (left: 12 9)\n"));
        assert!(text.contains("9 + 12 = 21 (left: 21)\n"));
    }

    #[test]
    fn render_single_step_of_sixes() {
        let t = traj([6, 6, 6, 6], 24, &[(6, Op::Add, 6), (6, Op::Add, 6), (12, Op::Add, 12)]);
        let text = render_trajectory(&t);
        let first = text.lines().nth(2).unwrap();
        assert!(first.ends_with("(left: 6 6 12)"), "{first}");
    }

    #[test]
    fn render_non_integer_values() {
        let puzzle = Puzzle::new([1, 2, 3, 4], 24).unwrap();
        let half = Rational::new(1, 2).unwrap();
        let steps = vec![
            step(1, Op::Div, 2),
            ArithStep::new(half, Op::Add, Rational::from(3)).unwrap(),
            ArithStep::new(Rational::new(7, 2).unwrap(), Op::Mul, Rational::from(4)).unwrap(),
        ];
        let t = Trajectory::from_steps(puzzle, steps).unwrap();
        let text = render_trajectory(&t);
        assert!(text.contains("1 / 2 = 1/2 (left: 3 4 1/2)\n"), "{text}");
        assert!(text.contains("1/2 + 3 = 7/2 (left: 4 7/2)\n"), "{text}");
        assert!(text.contains("7/2 * 4 = 14 (left: 14)\n"), "{text}");
    }

    #[test]
    fn trajectory_requires_three_steps() {
        let puzzle = Puzzle::new([1, 2, 3, 4], 24).unwrap();
        assert!(Trajectory::from_steps(puzzle, vec![step(1, Op::Add, 2)]).is_err());
    }

    #[test]
    fn canonical_key_ignores_commutative_order() {
        let a = traj([2, 4, 8, 10], 24, &[(8, Op::Div, 4), (10, Op::Add, 2), (2, Op::Mul, 12)]);
        let b = traj([2, 4, 8, 10], 24, &[(8, Op::Div, 4), (2, Op::Add, 10), (12, Op::Mul, 2)]);
        assert_eq!(a.canonical_key(), b.canonical_key());
        let c = traj([2, 4, 8, 10], 24, &[(10, Op::Add, 2), (8, Op::Div, 4), (2, Op::Mul, 12)]);
        assert_ne!(a.canonical_key(), c.canonical_key());
    }
}
