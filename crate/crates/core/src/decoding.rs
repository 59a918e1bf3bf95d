//! Decoding transforms applied to the policy's action distribution.
//!
//! Temperature is always applied to the logits first; the truncation filter
//! (top-k, top-p or min-p) then acts on the resulting probabilities and the
//! survivors are renormalized. Renormalization sums the kept entries in
//! support order, so results are bit-for-bit reproducible.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, FloatBits, Result};
use crate::game::{ArithStep, GameState};
use crate::policy::{forward_logits, PolicyModel};

const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDecodeConfig("empty distribution".into()));
        }
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidDecodeConfig("negative or non-finite probability".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDecodeConfig(format!("probabilities sum to {sum}")));
        }
        Ok(Distribution { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// First index of the largest probability.
    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.probs.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(i, _)| i)
    }

    /// Inverse-CDF draw; never returns a zero-probability index.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut cum = 0.0;
        let mut last = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            cum += p;
            last = i;
            if u < cum {
                return i;
            }
        }
        last
    }

    fn keep(&self, mask: &[bool]) -> Distribution {
        let total: f64 = self
            .probs
            .iter()
            .zip(mask)
            .filter(|(_, &k)| k)
            .map(|(p, _)| *p)
            .sum();
        let probs = self
            .probs
            .iter()
            .zip(mask)
            .map(|(&p, &k)| if k { p / total } else { 0.0 })
            .collect();
        Distribution { probs }
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| libm::exp(l - max)).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `softmax(logits / t)`.
pub fn apply_temperature(logits: &[f64], t: f64) -> Result<Distribution> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidTemperature(FloatBits(t)));
    }
    if logits.is_empty() {
        return Err(Error::InvalidDecodeConfig("no logits".into()));
    }
    let scaled: Vec<f64> = logits.iter().map(|&l| l / t).collect();
    Ok(Distribution {
        probs: softmax(&scaled),
    })
}

/// Indices by descending probability, ties by ascending index.
fn ranked(dist: &Distribution) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..dist.len()).collect();
    idx.sort_by(|&a, &b| dist.probs[b].total_cmp(&dist.probs[a]).then(a.cmp(&b)));
    idx
}

pub fn top_k(dist: &Distribution, k: usize) -> Distribution {
    let mut mask = alloc::vec![false; dist.len()];
    for &i in ranked(dist).iter().take(k.max(1)) {
        mask[i] = true;
    }
    dist.keep(&mask)
}

/// Keeps the shortest most-probable prefix whose mass reaches `p`.
pub fn top_p(dist: &Distribution, p: f64) -> Distribution {
    let mut mask = alloc::vec![false; dist.len()];
    let mut cum = 0.0;
    for i in ranked(dist) {
        mask[i] = true;
        cum += dist.probs[i];
        if cum >= p {
            break;
        }
    }
    dist.keep(&mask)
}

/// Drops entries below `p * max(dist)`.
pub fn min_p(dist: &Distribution, p: f64) -> Distribution {
    let threshold = p * dist.probs[dist.argmax()];
    let mask: Vec<bool> = dist.probs.iter().map(|&q| q >= threshold).collect();
    dist.keep(&mask)
}

/// Drops entries below the absolute threshold `p`; the maximum always survives.
pub fn min_p_absolute(dist: &Distribution, p: f64) -> Distribution {
    let best = dist.argmax();
    let mask: Vec<bool> = dist
        .probs
        .iter()
        .enumerate()
        .map(|(i, &q)| i == best || q >= p)
        .collect();
    dist.keep(&mask)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum Strategy {
    None,
    TopK {
        k: usize,
    },
    TopP {
        p: f64,
    },
    MinP {
        p: f64,
        #[serde(default, skip_serializing_if = "core::ops::Not::not")]
        absolute: bool,
    },
}

impl Strategy {
    pub fn apply(&self, dist: &Distribution) -> Distribution {
        match *self {
            Strategy::None => dist.clone(),
            Strategy::TopK { k } => top_k(dist, k),
            Strategy::TopP { p } => top_p(dist, p),
            Strategy::MinP { p, absolute: false } => min_p(dist, p),
            Strategy::MinP { p, absolute: true } => min_p_absolute(dist, p),
        }
    }

    /// Column header in the style `Top-10`, `Min-0.05`, `Top-0.85`.
    pub fn label(&self) -> String {
        match *self {
            Strategy::None => "Plain".into(),
            Strategy::TopK { k } => format!("Top-{k}"),
            Strategy::TopP { p } => format!("Top-{p}"),
            Strategy::MinP { p, absolute: false } => format!("Min-{p}"),
            Strategy::MinP { p, absolute: true } => format!("MinAbs-{p}"),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::TopK { .. } => "top_k",
            Strategy::TopP { .. } => "top_p",
            Strategy::MinP { .. } => "min_p",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub temperature: f64,
    #[serde(flatten)]
    pub strategy: Strategy,
}

impl DecodeConfig {
    pub fn new(temperature: f64, strategy: Strategy) -> Result<Self> {
        let c = DecodeConfig {
            temperature,
            strategy,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::InvalidTemperature(FloatBits(self.temperature)));
        }
        let bad = |m: String| Err(Error::InvalidDecodeConfig(m));
        match self.strategy {
            Strategy::TopK { k } if k < 1 => bad(format!("top_k needs k >= 1, got {k}")),
            Strategy::TopP { p } if !(p > 0.0 && p <= 1.0) => bad(format!("top_p needs p in (0, 1], got {p}")),
            Strategy::MinP { p, .. } if !(0.0..1.0).contains(&p) => bad(format!("min_p needs p in [0, 1), got {p}")),
            _ => Ok(()),
        }
    }

    /// Stable byte key identifying the configuration (for seed derivation).
    pub fn key(&self) -> String {
        format!("{:016x}|{:?}", self.temperature.to_bits(), self.strategy)
    }

    pub fn distribution(&self, logits: &[f64]) -> Result<Distribution> {
        let dist = apply_temperature(logits, self.temperature)?;
        Ok(self.strategy.apply(&dist))
    }

    /// The evaluation grid: temperatures 0.3/0.7/1.1 against the three
    /// tuned decoding points top-k 10, min-p 0.05 and top-p 0.85.
    pub fn optimal_grid() -> Vec<DecodeConfig> {
        let mut grid = Vec::new();
        for t in [0.3, 0.7, 1.1] {
            for s in [
                Strategy::TopK { k: 10 },
                Strategy::MinP { p: 0.05, absolute: false },
                Strategy::TopP { p: 0.85 },
            ] {
                grid.push(DecodeConfig {
                    temperature: t,
                    strategy: s,
                });
            }
        }
        grid
    }

    /// Three values per strategy at three temperatures (27 points).
    pub fn sweep_grid() -> Vec<DecodeConfig> {
        let mut grid = Vec::new();
        for t in [0.3, 0.7, 1.1] {
            for k in [5, 10, 15] {
                grid.push(DecodeConfig { temperature: t, strategy: Strategy::TopK { k } });
            }
            for p in [0.05, 0.10, 0.15] {
                grid.push(DecodeConfig { temperature: t, strategy: Strategy::MinP { p, absolute: false } });
            }
            for p in [0.85, 0.90, 0.95] {
                grid.push(DecodeConfig { temperature: t, strategy: Strategy::TopP { p } });
            }
        }
        grid
    }
}

/// Samples one action: logits, then temperature, then the truncation filter.
pub fn decode_sample<R: Rng + ?Sized>(
    model: &PolicyModel,
    state: &GameState,
    config: &DecodeConfig,
    rng: &mut R,
) -> Result<ArithStep> {
    let scored = forward_logits(model, state)?;
    let logits: Vec<f64> = scored.iter().map(|(_, l)| *l).collect();
    let dist = config.distribution(&logits)?;
    Ok(scored[dist.sample(rng)].0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn d(p: &[f64]) -> Distribution {
        Distribution::new(p.to_vec()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn temperature_examples() {
        let plain = apply_temperature(&[1.0, 2.0, 3.0], 1.0).unwrap();
        assert_eq!(plain.probs(), softmax(&[1.0, 2.0, 3.0]).as_slice());
        let two = apply_temperature(&[libm::log(4.0), 0.0], 1.0).unwrap();
        assert!(close(two.probs(), &[0.8, 0.2], 1e-15));
        for t in [0.01, 0.3, 1.0, 7.0] {
            assert_eq!(apply_temperature(&[0.1, -2.0, 0.4, 0.3], t).unwrap().argmax(), 2);
        }
        assert!(matches!(apply_temperature(&[1.0], 0.0), Err(Error::InvalidTemperature(_))));
        assert!(matches!(apply_temperature(&[1.0], -1.0), Err(Error::InvalidTemperature(_))));
    }

    #[test]
    fn top_k_examples() {
        let base = d(&[0.5, 0.3, 0.2]);
        assert!(close(top_k(&base, 2).probs(), &[0.625, 0.375, 0.0], 1e-15));
        assert_eq!(top_k(&base, 3), base);
        assert_eq!(top_k(&base, 10), base);
        assert_eq!(top_k(&base, 1).probs(), &[1.0, 0.0, 0.0]);
        // ties go to the lower index
        assert_eq!(top_k(&d(&[0.25, 0.25, 0.25, 0.25]), 1).probs(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn top_p_examples() {
        let base = d(&[0.5, 0.3, 0.2]);
        assert!(close(top_p(&base, 0.85).probs(), base.probs(), 1e-15));
        assert!(close(top_p(&base, 0.75).probs(), &[0.625, 0.375, 0.0], 1e-15));
        assert!(close(top_p(&base, 1.0).probs(), base.probs(), 1e-12));
        assert_eq!(top_p(&base, 0.1).probs(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn min_p_examples() {
        let base = d(&[0.5, 0.3, 0.2]);
        assert!(close(min_p(&base, 0.5).probs(), &[0.625, 0.375, 0.0], 1e-15));
        assert!(close(min_p(&base, 0.0).probs(), base.probs(), 1e-12));
        let one_hot = d(&[0.0, 1.0, 0.0]);
        for p in [0.0, 0.3, 0.99] {
            assert_eq!(min_p(&one_hot, p), one_hot);
        }
        // absolute mode: 0.25 drops only the 0.2 entry
        assert!(close(min_p_absolute(&base, 0.25).probs(), &[0.625, 0.375, 0.0], 1e-15));
        assert_eq!(min_p_absolute(&base, 0.9).probs(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn config_validation() {
        assert!(DecodeConfig::new(0.7, Strategy::TopK { k: 0 }).is_err());
        assert!(DecodeConfig::new(0.7, Strategy::TopP { p: 0.0 }).is_err());
        assert!(DecodeConfig::new(0.7, Strategy::TopP { p: 1.0 }).is_ok());
        assert!(DecodeConfig::new(0.7, Strategy::MinP { p: 1.0, absolute: false }).is_err());
        assert!(DecodeConfig::new(0.7, Strategy::MinP { p: 0.0, absolute: false }).is_ok());
        assert!(DecodeConfig::new(0.0, Strategy::None).is_err());
        assert_eq!(DecodeConfig::optimal_grid().len(), 9);
        assert_eq!(DecodeConfig::sweep_grid().len(), 27);
    }

    #[test]
    fn labels() {
        assert_eq!(Strategy::TopK { k: 10 }.label(), "Top-10");
        assert_eq!(Strategy::MinP { p: 0.05, absolute: false }.label(), "Min-0.05");
        assert_eq!(Strategy::TopP { p: 0.85 }.label(), "Top-0.85");
    }

    #[test]
    fn sampling_skips_zero_mass() {
        let dist = d(&[0.0, 0.0, 1.0, 0.0]);
        let mut rng = crate::rng::from_seed(1);
        for _ in 0..100 {
            assert_eq!(dist.sample(&mut rng), 2);
        }
    }

    #[test]
    fn invalid_distributions_rejected() {
        assert!(Distribution::new(vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(vec![-0.1, 1.1]).is_err());
        assert!(Distribution::new(vec![]).is_err());
    }
}
