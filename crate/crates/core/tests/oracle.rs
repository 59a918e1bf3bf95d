use std::collections::BTreeSet;

use gameofn_core::check::verify_rendered;
use gameofn_core::game::render_trajectory;
use gameofn_core::oracle::{
    enumerate_solutions, positional_solution_keys, solution_count, solvable_tuple_count, terminal_values,
};
use gameofn_core::{rng, ArithStep, Op, Puzzle, Trajectory};
use proptest::prelude::*;
use rand::Rng;

fn random_tuples(n: usize, seed: u64) -> Vec<[i64; 4]> {
    let mut r = rng::from_seed(seed);
    (0..n).map(|_| [0; 4].map(|_| r.gen_range(1..=13))).collect()
}

#[test]
fn every_solution_reverifies_and_positional_count_agrees() {
    for numbers in random_tuples(200, 11) {
        for target in [24, 42] {
            let puzzle = Puzzle::new(numbers, target).unwrap();
            let set = enumerate_solutions(&puzzle);
            assert_eq!(set.count, set.solutions.len());
            for t in &set.solutions {
                let text = render_trajectory(t);
                assert_eq!(verify_rendered(&text, target), Ok(true), "{text}");
            }
            assert_eq!(positional_solution_keys(&puzzle).len(), set.count, "{numbers:?} -> {target}");
            let keys: BTreeSet<String> = set.solutions.iter().map(|t| t.canonical_key()).collect();
            assert_eq!(keys.len(), set.count);
        }
    }
}

fn path(numbers: [i64; 4], target: i64, steps: &[(i64, Op, i64)]) -> Trajectory {
    let steps = steps.iter().map(|&(l, op, r)| ArithStep::ints(l, op, r).unwrap()).collect();
    Trajectory::from_steps(Puzzle::new(numbers, target).unwrap(), steps).unwrap()
}

#[test]
fn worked_examples() {
    use Op::*;
    let set = enumerate_solutions(&Puzzle::new([2, 4, 8, 10], 24).unwrap());
    assert!(set.count >= 3);
    for steps in [
        [(8, Div, 4), (10, Add, 2), (2, Mul, 12)],
        [(2, Add, 10), (8, Mul, 12), (96, Div, 4)],
        [(2, Add, 10), (4, Add, 8), (12, Add, 12)],
    ] {
        assert!(set.contains(&path([2, 4, 8, 10], 24, &steps)), "{steps:?}");
    }
    assert!(!set.contains(&path([2, 4, 8, 10], 24, &[(2, Add, 10), (8, Sub, 4), (12, Sub, 4)])));
    assert_eq!(solution_count(&Puzzle::new([1, 1, 1, 1], 24).unwrap()), 0);
    let set42 = enumerate_solutions(&Puzzle::new([2, 12, 3, 6], 42).unwrap());
    assert!(set42.contains(&path([2, 12, 3, 6], 42, &[(2, Mul, 12), (3, Mul, 6), (24, Add, 18)])));
}

#[test]
fn solvable_counts_grow_with_the_range() {
    for target in [24, 42] {
        let counts: Vec<usize> = (4..=9).map(|hi| solvable_tuple_count(target, 1, hi)).collect();
        assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{counts:?}");
    }
}

fn permutation() -> impl Strategy<Value = ([i64; 4], [usize; 4])> {
    (
        prop::array::uniform4(1i64..=13),
        Just([0usize, 1, 2, 3]).prop_shuffle().prop_map(|v| [v[0], v[1], v[2], v[3]]),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn count_is_permutation_invariant((numbers, perm) in permutation(), target in prop::sample::select(vec![24i64, 42])) {
        let a = Puzzle::new(numbers, target).unwrap();
        let b = Puzzle::new(perm.map(|i| numbers[i]), target).unwrap();
        prop_assert_eq!(solution_count(&a), solution_count(&b));
        prop_assert_eq!(terminal_values(&a), terminal_values(&b));
        let ka: BTreeSet<_> = enumerate_solutions(&a).solutions.iter().map(|t| t.canonical().steps().to_vec()).collect();
        let kb: BTreeSet<_> = enumerate_solutions(&b).solutions.iter().map(|t| t.canonical().steps().to_vec()).collect();
        prop_assert_eq!(ka, kb);
    }
}
