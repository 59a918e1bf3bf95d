use gameofn_core::decoding::{
    apply_temperature, min_p, softmax, top_k, top_p, DecodeConfig, Distribution, Strategy,
};
use gameofn_core::game::{apply, legal_actions};
use gameofn_core::policy::{forward_logits, PolicyConfig, PolicyModel};
use gameofn_core::{rng, Puzzle};
use rand::Rng;

/// Random distribution over at most 10 entries. Values are drawn from a
/// coarse grid so ties and zeros are common.
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

/// Selection-sort ranking: largest first, lower index wins ties.
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
        let b = best.unwrap();
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

/// `p_i^(1/T)` normalized, which equals `softmax(ln p / T)`.
fn naive_temperature(p: &[f64], t: f64) -> Vec<f64> {
    let w: Vec<f64> = p.iter().map(|&q| q.powf(1.0 / t)).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

fn support(p: &[f64]) -> Vec<usize> {
    (0..p.len()).filter(|&i| p[i] > 0.0).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn filters_match_naive_references() {
    let mut r = rng::from_seed(1);
    for _ in 0..1000 {
        let p = random_dist(&mut r);
        let d = Distribution::new(p.clone()).unwrap();
        let k = r.gen_range(1..=12);
        let mass = r.gen_range(0.05..=1.0);
        let rel = r.gen_range(0.0..1.0);
        assert_eq!(top_k(&d, k).probs(), &naive_top_k(&p, k)[..], "top_k {k} {p:?}");
        assert_eq!(top_p(&d, mass).probs(), &naive_top_p(&p, mass)[..], "top_p {mass} {p:?}");
        assert_eq!(min_p(&d, rel).probs(), &naive_min_p(&p, rel)[..], "min_p {rel} {p:?}");
    }
}

#[test]
fn temperature_matches_power_form() {
    let mut r = rng::from_seed(2);
    for _ in 0..1000 {
        let p: Vec<f64> = random_dist(&mut r).iter().map(|q| q + 0.01).collect();
        let total: f64 = p.iter().sum();
        let p: Vec<f64> = p.iter().map(|q| q / total).collect();
        let logits: Vec<f64> = p.iter().map(|q| q.ln()).collect();
        let t = r.gen_range(0.1..3.0);
        let got = apply_temperature(&logits, t).unwrap();
        assert!(max_abs_diff(got.probs(), &naive_temperature(&p, t)) < 1e-12);
    }
}

#[test]
fn identity_cases() {
    let mut r = rng::from_seed(3);
    for _ in 0..1000 {
        let p = random_dist(&mut r);
        let d = Distribution::new(p.clone()).unwrap();
        let positive: Vec<f64> = p.iter().map(|q| q + 0.05).collect();
        let total: f64 = positive.iter().sum();
        let positive: Vec<f64> = positive.iter().map(|q| q / total).collect();
        let logits: Vec<f64> = positive.iter().map(|q| q.ln()).collect();
        assert!(max_abs_diff(apply_temperature(&logits, 1.0).unwrap().probs(), &positive) < 1e-12);
        assert!(max_abs_diff(top_k(&d, p.len()).probs(), &p) < 1e-12);
        assert!(max_abs_diff(top_k(&d, p.len() + 5).probs(), &p) < 1e-12);
        assert!(max_abs_diff(top_p(&d, 1.0).probs(), &p) < 1e-12);
        assert!(max_abs_diff(min_p(&d, 0.0).probs(), &p) < 1e-12);
    }
}

#[test]
fn filters_shrink_support_and_keep_the_mode() {
    let mut r = rng::from_seed(4);
    for _ in 0..1000 {
        let p = random_dist(&mut r);
        let d = Distribution::new(p.clone()).unwrap();
        let before = support(&p);
        for s in [
            Strategy::TopK { k: r.gen_range(1..=10) },
            Strategy::TopP { p: r.gen_range(0.01..=1.0) },
            Strategy::MinP { p: r.gen_range(0.0..1.0), absolute: false },
            Strategy::MinP { p: r.gen_range(0.0..1.0), absolute: true },
        ] {
            let out = s.apply(&d);
            let after = support(out.probs());
            assert!(!after.is_empty());
            assert!(after.iter().all(|i| before.contains(i)), "{s:?}");
            assert!(out.probs()[d.argmax()] > 0.0, "{s:?} dropped the mode");
            let sum: f64 = out.probs().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            for _ in 0..20 {
                assert!(out.probs()[out.sample(&mut r)] > 0.0);
            }
        }
    }
}

#[test]
fn policy_softmax_sums_to_one_on_random_states() {
    let model = PolicyModel::initial(PolicyConfig { hidden: 16 }, 7);
    let mut r = rng::from_seed(5);
    let grid = DecodeConfig::sweep_grid();
    for _ in 0..1000 {
        let numbers = [0; 4].map(|_| r.gen_range(1..=13));
        let target = if r.gen_bool(0.5) { 24 } else { 42 };
        let mut state = Puzzle::new(numbers, target).unwrap().initial_state();
        for _ in 0..r.gen_range(0..3) {
            let actions = legal_actions(&state).unwrap();
            state = apply(&state, &actions[r.gen_range(0..actions.len())]).unwrap();
        }
        let logits: Vec<f64> = forward_logits(&model, &state).unwrap().iter().map(|s| s.1).collect();
        assert!(logits.iter().all(|l| l.is_finite()));
        let sum: f64 = softmax(&logits).iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let cfg = grid[r.gen_range(0..grid.len())];
        let sum: f64 = cfg.distribution(&logits).unwrap().probs().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(DecodeConfig::new(0.0, Strategy::None).is_err());
    assert!(DecodeConfig::new(-1.0, Strategy::None).is_err());
    assert!(DecodeConfig::new(1.0, Strategy::TopK { k: 0 }).is_err());
    assert!(DecodeConfig::new(1.0, Strategy::TopP { p: 0.0 }).is_err());
    assert!(DecodeConfig::new(1.0, Strategy::TopP { p: 1.5 }).is_err());
    assert!(DecodeConfig::new(1.0, Strategy::MinP { p: 1.0, absolute: false }).is_err());
    assert!(apply_temperature(&[0.0, 1.0], f64::NAN).is_err());
}
