//! Trajectory-balance training.
//!
//! For a sampled trajectory `tau` ending in `x` the loss is
//!
//! ```text
//! (log Z + sum log P_F(tau) - log R(x) - sum log P_B(tau | x))^2
//! ```
//!
//! Rollouts are on-policy with epsilon-uniform exploration. Parameters and
//! `log Z` are updated by Adam with separate learning rates.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoding::{softmax, DecodeConfig, Strategy};
use crate::error::{Error, Result};
use crate::game::{apply, reward_with, Puzzle, Trajectory, REWARD_FAIL, REWARD_SUCCESS};
use crate::policy::{forward_logits, log_pf_with_grad, BackwardPolicy, Gradient, PolicyConfig, PolicyModel};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr_params: f64,
    pub lr_logz: f64,
    pub explore_eps: f64,
    pub reward_success: f64,
    pub reward_fail: f64,
    pub seed: u64,
    pub hidden: usize,
    /// Starting value of `log Z`. The default `ln(reward_success)` is close
    /// to `ln(sum R)` for any solvable puzzle.
    pub log_z_init: f64,
    /// Success-rate probe on the training puzzles every this many steps; 0 disables.
    pub probe_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 10_000,
            batch_size: 16,
            lr_params: 3e-3,
            lr_logz: 1e-2,
            explore_eps: 0.1,
            reward_success: REWARD_SUCCESS,
            reward_fail: REWARD_FAIL,
            seed: 0,
            hidden: 64,
            log_z_init: libm::log(REWARD_SUCCESS),
            probe_every: 1000,
        }
    }
}

impl TrainConfig {
    pub fn policy(&self) -> PolicyConfig {
        PolicyConfig { hidden: self.hidden }
    }

    /// The model training starts from; also the untrained baseline.
    pub fn initial_model(&self) -> PolicyModel {
        let mut model = PolicyModel::initial(self.policy(), self.seed);
        model.log_z = self.log_z_init;
        model
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.lr_params >= 0.0 && self.lr_logz >= 0.0) {
            return bad("learning rates must be non-negative");
        }
        if !(0.0..1.0).contains(&self.explore_eps) {
            return bad("explore_eps must lie in [0, 1)");
        }
        if !(self.reward_success > 0.0 && self.reward_fail > 0.0) {
            return bad("rewards must be positive");
        }
        if !self.log_z_init.is_finite() {
            return bad("log_z_init must be finite");
        }
        if self.batch_size == 0 || self.hidden == 0 {
            return bad("batch_size and hidden must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub loss: f64,
    pub mean_log_reward: f64,
    pub log_z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeLog {
    pub step: usize,
    pub success_rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub steps: Vec<StepLog>,
    pub probes: Vec<ProbeLog>,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("loss became non-finite at step {step}")]
    DivergenceDetected { step: usize, last_good: Box<PolicyModel> },
}

/// The signed trajectory-balance residual.
pub fn tb_residual(model: &PolicyModel, log_pf: f64, log_reward: f64, log_pb: f64) -> f64 {
    model.log_z + log_pf - log_reward - log_pb
}

/// Loss under the default two-level reward and the uniform backward policy.
pub fn tb_loss(model: &PolicyModel, trajectory: &Trajectory) -> Result<f64> {
    let log_pf = crate::policy::log_pf_trajectory(model, trajectory)?;
    let log_r = libm::log(reward_with(trajectory, REWARD_SUCCESS, REWARD_FAIL));
    let log_pb = crate::policy::log_pb_trajectory(trajectory);
    let r = tb_residual(model, log_pf, log_r, log_pb);
    Ok(r * r)
}

/// Loss plus its gradient, accumulated into `grad` with weight `weight`.
pub fn tb_loss_and_grad(
    model: &PolicyModel,
    trajectory: &Trajectory,
    log_reward: f64,
    log_pb: f64,
    weight: f64,
    grad: &mut Gradient,
) -> Result<f64> {
    let mut pf_grad = Gradient::zeros_like(model);
    let log_pf = log_pf_with_grad(model, trajectory, 1.0, &mut pf_grad)?;
    let r = tb_residual(model, log_pf, log_reward, log_pb);
    pf_grad.scale(2.0 * r * weight);
    pf_grad.log_z = 2.0 * r * weight;
    grad.add(&pf_grad);
    Ok(r * r)
}

/// One rollout from the puzzle. With probability `explore_eps` each step is
/// uniform over legal actions, otherwise drawn from `softmax(logits)`.
pub fn sample_trajectory<R: Rng + ?Sized>(
    model: &PolicyModel,
    puzzle: &Puzzle,
    rng: &mut R,
    explore_eps: f64,
) -> Result<Trajectory> {
    let mut state = puzzle.initial_state();
    let mut steps = Vec::with_capacity(crate::game::EPISODE_STEPS);
    while !state.is_terminal() {
        let scored = forward_logits(model, &state)?;
        let explore = rng.gen::<f64>() < explore_eps;
        let idx = if explore {
            rng.gen_range(0..scored.len())
        } else {
            let logits: Vec<f64> = scored.iter().map(|s| s.1).collect();
            let probs = crate::decoding::Distribution::new(softmax(&logits))?;
            probs.sample(rng)
        };
        let action = scored[idx].0;
        state = apply(&state, &action)?;
        steps.push(action);
    }
    Trajectory::from_steps(*puzzle, steps)
}

/// Adam with a separate learning rate for `log Z`.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    m_z: f64,
    v_z: f64,
    t: i32,
}

impl Adam {
    pub fn new(n_params: usize) -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: alloc::vec![0.0; n_params],
            v: alloc::vec![0.0; n_params],
            m_z: 0.0,
            v_z: 0.0,
            t: 0,
        }
    }

    pub fn step(&mut self, model: &mut PolicyModel, grad: &Gradient, lr_params: f64, lr_logz: f64) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(self.beta1, self.t as f64);
        let c2 = 1.0 - libm::pow(self.beta2, self.t as f64);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let update = |m: &mut f64, v: &mut f64, g: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            (*m / c1) / (libm::sqrt(*v / c2) + eps)
        };
        for (i, p) in model.params_mut().iter_mut().enumerate() {
            *p -= lr_params * update(&mut self.m[i], &mut self.v[i], grad.params[i]);
        }
        model.log_z -= lr_logz * update(&mut self.m_z, &mut self.v_z, grad.log_z);
    }
}

/// Trains from the seed's initial model. Each step draws `batch_size`
/// puzzles uniformly (with replacement), rolls one trajectory each and
/// applies one Adam step on the mean loss.
pub fn train(config: &TrainConfig, puzzles: &[Puzzle]) -> Result<(PolicyModel, TrainLog), TrainError> {
    config.validate()?;
    if puzzles.is_empty() {
        return Err(Error::InvalidConfig("training split is empty".into()).into());
    }
    let mut model = config.initial_model();
    let backward: Vec<BackwardPolicy> = puzzles.iter().map(BackwardPolicy::for_puzzle).collect();
    let mut adam = Adam::new(model.params().len());
    let mut rng = rng::from_seed(rng::derive(config.seed, rng::TRAIN));
    let mut log = TrainLog::default();
    let weight = 1.0 / config.batch_size as f64;
    let (log_success, log_fail) = (libm::log(config.reward_success), libm::log(config.reward_fail));

    for step in 0..config.steps {
        let mut grad = Gradient::zeros_like(&model);
        let mut loss = 0.0;
        let mut log_reward_sum = 0.0;
        for _ in 0..config.batch_size {
            let i = rng.gen_range(0..puzzles.len());
            let traj = sample_trajectory(&model, &puzzles[i], &mut rng, config.explore_eps)?;
            let log_r = if traj.is_success() { log_success } else { log_fail };
            let log_pb = backward[i].log_pb(&traj);
            loss += weight * tb_loss_and_grad(&model, &traj, log_r, log_pb, weight, &mut grad)?;
            log_reward_sum += log_r;
        }
        if !loss.is_finite() || !grad.log_z.is_finite() {
            return Err(TrainError::DivergenceDetected {
                step,
                last_good: Box::new(model),
            });
        }
        adam.step(&mut model, &grad, config.lr_params, config.lr_logz);
        log.steps.push(StepLog {
            step,
            loss,
            mean_log_reward: log_reward_sum * weight,
            log_z: model.log_z,
        });
        if config.probe_every > 0 && (step + 1) % config.probe_every == 0 {
            let probe_seed = rng::derive(rng::derive(config.seed, rng::PROBE), step as u64);
            let plain = DecodeConfig {
                temperature: 1.0,
                strategy: Strategy::None,
            };
            let mut solved = 0;
            for p in puzzles {
                solved += crate::eval::evaluate_puzzle(&model, p, &plain, probe_seed)?.sr as usize;
            }
            log.probes.push(ProbeLog {
                step,
                success_rate: solved as f64 / puzzles.len() as f64,
            });
        }
    }
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{ArithStep, Op};

    fn win() -> Trajectory {
        let puzzle = Puzzle::new([2, 4, 8, 10], 24).unwrap();
        let steps = [(8, Op::Div, 4), (10, Op::Add, 2), (2, Op::Mul, 12)]
            .iter()
            .map(|&(l, op, r)| ArithStep::ints(l, op, r).unwrap())
            .collect();
        Trajectory::from_steps(puzzle, steps).unwrap()
    }

    #[test]
    fn zero_residual_gives_zero_loss() {
        let t = win();
        let mut model = PolicyModel::initial(PolicyConfig { hidden: 8 }, 3);
        let log_pf = crate::policy::log_pf_trajectory(&model, &t).unwrap();
        let log_pb = crate::policy::log_pb_trajectory(&t);
        model.log_z = libm::log(100.0) + log_pb - log_pf;
        assert!(tb_loss(&model, &t).unwrap() < 1e-24);
    }

    #[test]
    fn unit_probability_chain_loss() {
        // log Z = 0, both policies contribute 0: the residual is -ln(100)
        let model = PolicyModel::zeros(PolicyConfig { hidden: 4 });
        let r = tb_residual(&model, 0.0, libm::log(100.0), 0.0);
        assert!((r * r - 21.207_592_441_913_597).abs() < 1e-9);
    }

    #[test]
    fn log_z_gradient_is_twice_residual() {
        let t = win();
        let model = PolicyModel::initial(PolicyConfig { hidden: 8 }, 4);
        let log_pb = crate::policy::log_pb_trajectory(&t);
        let log_pf = crate::policy::log_pf_trajectory(&model, &t).unwrap();
        let mut g = Gradient::zeros_like(&model);
        tb_loss_and_grad(&model, &t, libm::log(100.0), log_pb, 1.0, &mut g).unwrap();
        let r = tb_residual(&model, log_pf, libm::log(100.0), log_pb);
        assert!((g.log_z - 2.0 * r).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            explore_eps: 1.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            reward_fail: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn empty_split_rejected() {
        assert!(matches!(train(&TrainConfig::default(), &[]), Err(TrainError::Core(_))));
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let model = PolicyModel::initial(PolicyConfig { hidden: 8 }, 0);
        let puzzle = Puzzle::new([1, 5, 5, 5], 24).unwrap();
        let run = |seed| {
            let mut rng = rng::from_seed(seed);
            (0..20)
                .map(|_| sample_trajectory(&model, &puzzle, &mut rng, 0.05).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
    }
}
