//! Forward policy network, the fixed backward policy and their gradients.
//!
//! The forward policy scores each legal action of a state. A two-layer tanh
//! trunk embeds the state; an action head combines that embedding with the
//! action's features and emits one logit per action:
//!
//! ```text
//! h1    = tanh(W1 x + b1)
//! h2    = tanh(W2 h1 + b2)
//! u_a   = tanh(Wh h2 + Wa a + bu)
//! logit = v . u_a + c
//! ```
//!
//! All parameters live in one flat buffer so the optimizer and checkpoint
//! code can treat them uniformly; [`Layout`] names the slices.
//!
//! The backward policy is uniform over incoming edges of the puzzle's DAG.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{legal_actions, ArithStep, GameState, Trajectory, EPISODE_STEPS, NUM_OPERANDS};
use crate::oracle::PuzzleDag;
use crate::rational::Rational;

/// Scale for the absolute value and numerator channels.
pub const VALUE_SCALE: f64 = 50.0;
/// Scale for the target conditioning channel.
pub const TARGET_SCALE: f64 = 100.0;
/// Channels are clamped to `[-CLAMP, CLAMP]`.
pub const CLAMP: f64 = 4.0;

/// Channels describing one value: scaled value, scaled numerator,
/// reciprocal denominator, value relative to the target.
pub const VALUE_CHANNELS: usize = 4;
/// Presence flag followed by the value channels.
pub const SLOT_WIDTH: usize = 1 + VALUE_CHANNELS;
pub const STATE_DIM: usize = NUM_OPERANDS * SLOT_WIDTH + EPISODE_STEPS + 1;

pub const ACTION_OP: usize = 0;
pub const ACTION_LEFT: usize = 4;
pub const ACTION_RIGHT: usize = ACTION_LEFT + VALUE_CHANNELS;
pub const ACTION_RESULT: usize = ACTION_RIGHT + VALUE_CHANNELS;
/// 1 when the step's result equals the target.
pub const ACTION_HIT: usize = ACTION_RESULT + VALUE_CHANNELS;
pub const ACTION_DIM: usize = ACTION_HIT + 1;

fn clamp(x: f64) -> f64 {
    x.clamp(-CLAMP, CLAMP)
}

fn value_channels(v: Rational, target: i64, out: &mut [f64]) {
    out[0] = clamp(v.to_f64() / VALUE_SCALE);
    out[1] = clamp(v.numerator() as f64 / VALUE_SCALE);
    out[2] = 1.0 / v.denominator() as f64;
    out[3] = clamp(v.to_f64() / target as f64);
}

/// Fixed-width state features. Values are sorted before encoding so the
/// result does not depend on the order of the remaining values.
pub fn encode_state(state: &GameState) -> [f64; STATE_DIM] {
    let mut x = [0.0; STATE_DIM];
    for (slot, v) in state.key().into_iter().enumerate().take(NUM_OPERANDS) {
        let base = slot * SLOT_WIDTH;
        x[base] = 1.0;
        value_channels(v, state.target(), &mut x[base + 1..base + SLOT_WIDTH]);
    }
    let d = NUM_OPERANDS * SLOT_WIDTH;
    if state.depth() < EPISODE_STEPS {
        x[d + state.depth()] = 1.0;
    }
    x[d + EPISODE_STEPS] = state.target() as f64 / TARGET_SCALE;
    x
}

pub fn encode_action(action: &ArithStep, target: i64) -> [f64; ACTION_DIM] {
    let mut a = [0.0; ACTION_DIM];
    a[ACTION_OP + action.op.index()] = 1.0;
    value_channels(action.left, target, &mut a[ACTION_LEFT..ACTION_RIGHT]);
    value_channels(action.right, target, &mut a[ACTION_RIGHT..ACTION_RESULT]);
    value_channels(action.result, target, &mut a[ACTION_RESULT..ACTION_HIT]);
    if action.result == Rational::from_int(target) {
        a[ACTION_HIT] = 1.0;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub hidden: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig { hidden: 128 }
    }
}

/// Offsets of each named tensor inside the flat parameter buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    hidden: usize,
}

impl Layout {
    pub const NAMES: [&'static str; 9] = ["w1", "b1", "w2", "b2", "wh", "wa", "bu", "v", "c"];

    pub fn new(config: PolicyConfig) -> Self {
        Layout { hidden: config.hidden }
    }

    pub fn shape(&self, name: &str) -> Option<(usize, usize)> {
        let h = self.hidden;
        Some(match name {
            "w1" => (h, STATE_DIM),
            "b1" | "b2" | "bu" | "v" => (h, 1),
            "w2" | "wh" => (h, h),
            "wa" => (h, ACTION_DIM),
            "c" => (1, 1),
            _ => return None,
        })
    }

    /// Range of `name` in the flat buffer.
    pub fn range(&self, name: &str) -> Option<core::ops::Range<usize>> {
        let mut start = 0;
        for n in Self::NAMES {
            let (r, c) = self.shape(n)?;
            if n == name {
                return Some(start..start + r * c);
            }
            start += r * c;
        }
        None
    }

    /// Fan-in used for initialization.
    fn fan_in(&self, name: &str) -> usize {
        match name {
            "w1" | "b1" => STATE_DIM,
            "w2" | "b2" | "v" | "c" => self.hidden,
            "wh" | "wa" | "bu" => self.hidden + ACTION_DIM,
            _ => 1,
        }
    }

    pub fn len(&self) -> usize {
        Self::NAMES
            .iter()
            .map(|n| self.shape(n).map(|(r, c)| r * c).unwrap_or(0))
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyModel {
    config: PolicyConfig,
    params: Vec<f64>,
    pub log_z: f64,
}

impl PolicyModel {
    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` weights, `log_z = 0`.
    pub fn init<R: Rng + ?Sized>(config: PolicyConfig, rng: &mut R) -> Self {
        let layout = Layout::new(config);
        let mut params = vec![0.0; layout.len()];
        for name in Layout::NAMES {
            let bound = 1.0 / libm::sqrt(layout.fan_in(name) as f64);
            let range = layout.range(name).expect("known tensor");
            for p in &mut params[range] {
                *p = rng.gen_range(-bound..bound);
            }
        }
        PolicyModel {
            config,
            params,
            log_z: 0.0,
        }
    }

    /// The untrained model for a root seed; training starts from it too.
    pub fn initial(config: PolicyConfig, seed: u64) -> Self {
        let mut rng = crate::rng::from_seed(crate::rng::derive(seed, crate::rng::INIT));
        Self::init(config, &mut rng)
    }

    /// All parameters zero: every legal action gets logit 0.
    pub fn zeros(config: PolicyConfig) -> Self {
        PolicyModel {
            config,
            params: vec![0.0; Layout::new(config).len()],
            log_z: 0.0,
        }
    }

    pub fn from_parts(config: PolicyConfig, params: Vec<f64>, log_z: f64) -> Result<Self> {
        if params.len() != Layout::new(config).len() {
            return Err(Error::InvalidConfig(alloc::format!(
                "expected {} parameters for hidden width {}, got {}",
                Layout::new(config).len(),
                config.hidden,
                params.len()
            )));
        }
        Ok(PolicyModel { config, params, log_z })
    }

    pub fn config(&self) -> PolicyConfig {
        self.config
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.config)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        self.layout().range(name).map(|r| &self.params[r])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let r = self.layout().range(name)?;
        Some(&mut self.params[r])
    }

    pub fn is_finite(&self) -> bool {
        self.log_z.is_finite() && self.params.iter().all(|p| p.is_finite())
    }
}

/// Gradient buffer laid out like [`PolicyModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub params: Vec<f64>,
    pub log_z: f64,
}

impl Gradient {
    pub fn zeros_like(model: &PolicyModel) -> Self {
        Gradient {
            params: vec![0.0; model.params.len()],
            log_z: 0.0,
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.params.iter_mut().for_each(|g| *g *= s);
        self.log_z *= s;
    }

    pub fn add(&mut self, other: &Gradient) {
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            *a += b;
        }
        self.log_z += other.log_z;
    }
}

/// Activations of one state kept for the backward pass.
struct StateForward {
    x: [f64; STATE_DIM],
    h1: Vec<f64>,
    h2: Vec<f64>,
    actions: Vec<ArithStep>,
    feats: Vec<[f64; ACTION_DIM]>,
    /// `u` for every action, row-major `(n_actions, hidden)`.
    u: Vec<f64>,
    logits: Vec<f64>,
}

fn matvec(w: &[f64], x: &[f64], b: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &w[i * cols..(i + 1) * cols];
        *o = b[i] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

fn forward_state(model: &PolicyModel, state: &GameState) -> Result<StateForward> {
    let actions = legal_actions(state)?;
    let layout = model.layout();
    let h = model.config.hidden;
    let t = |n: &str| &model.params[layout.range(n).expect("known tensor")];

    let x = encode_state(state);
    let mut h1 = vec![0.0; h];
    matvec(t("w1"), &x, t("b1"), &mut h1);
    h1.iter_mut().for_each(|v| *v = libm::tanh(*v));
    let mut h2 = vec![0.0; h];
    matvec(t("w2"), &h1, t("b2"), &mut h2);
    h2.iter_mut().for_each(|v| *v = libm::tanh(*v));
    let mut g = vec![0.0; h];
    matvec(t("wh"), &h2, t("bu"), &mut g);

    let wa = t("wa");
    let v = t("v");
    let c = t("c")[0];
    let mut feats = Vec::with_capacity(actions.len());
    let mut u = vec![0.0; actions.len() * h];
    let mut logits = Vec::with_capacity(actions.len());
    for (k, action) in actions.iter().enumerate() {
        let a = encode_action(action, state.target());
        let row = &mut u[k * h..(k + 1) * h];
        matvec(wa, &a, &g, row);
        let mut logit = c;
        for (uj, vj) in row.iter_mut().zip(v) {
            *uj = libm::tanh(*uj);
            logit += vj * *uj;
        }
        feats.push(a);
        logits.push(logit);
    }
    Ok(StateForward {
        x,
        h1,
        h2,
        actions,
        feats,
        u,
        logits,
    })
}

/// Accumulates `sum_a dlogits[a] * d logit_a / d params` into `grad`.
fn backward_state(model: &PolicyModel, fwd: &StateForward, dlogits: &[f64], grad: &mut Gradient) {
    let layout = model.layout();
    let h = model.config.hidden;
    let r = |n: &str| layout.range(n).expect("known tensor");
    let (rv, rc, rwa, rbu, rwh, rw2, rb2, rw1, rb1) = (
        r("v"),
        r("c"),
        r("wa"),
        r("bu"),
        r("wh"),
        r("w2"),
        r("b2"),
        r("w1"),
        r("b1"),
    );
    let p = &model.params;
    let v = &p[rv.clone()];

    let mut dg = vec![0.0; h];
    for (k, &dl) in dlogits.iter().enumerate() {
        if dl == 0.0 {
            continue;
        }
        let u = &fwd.u[k * h..(k + 1) * h];
        let a = &fwd.feats[k];
        grad.params[rc.start] += dl;
        for j in 0..h {
            grad.params[rv.start + j] += dl * u[j];
            let dpre = dl * v[j] * (1.0 - u[j] * u[j]);
            dg[j] += dpre;
            let row = rwa.start + j * ACTION_DIM;
            for (i, &ai) in a.iter().enumerate() {
                grad.params[row + i] += dpre * ai;
            }
        }
    }

    // g = Wh h2 + bu
    let wh = &p[rwh.clone()];
    let mut dh2 = vec![0.0; h];
    for j in 0..h {
        grad.params[rbu.start + j] += dg[j];
        let row = j * h;
        for i in 0..h {
            grad.params[rwh.start + row + i] += dg[j] * fwd.h2[i];
            dh2[i] += wh[row + i] * dg[j];
        }
    }

    let w2 = &p[rw2.clone()];
    let mut dh1 = vec![0.0; h];
    for j in 0..h {
        let dpre = dh2[j] * (1.0 - fwd.h2[j] * fwd.h2[j]);
        grad.params[rb2.start + j] += dpre;
        let row = j * h;
        for i in 0..h {
            grad.params[rw2.start + row + i] += dpre * fwd.h1[i];
            dh1[i] += w2[row + i] * dpre;
        }
    }

    for j in 0..h {
        let dpre = dh1[j] * (1.0 - fwd.h1[j] * fwd.h1[j]);
        grad.params[rb1.start + j] += dpre;
        let row = rw1.start + j * STATE_DIM;
        for (i, &xi) in fwd.x.iter().enumerate() {
            grad.params[row + i] += dpre * xi;
        }
    }
}

/// One finite logit per legal action, in `legal_actions` order.
pub fn forward_logits(model: &PolicyModel, state: &GameState) -> Result<Vec<(ArithStep, f64)>> {
    let fwd = forward_state(model, state)?;
    Ok(fwd.actions.into_iter().zip(fwd.logits).collect())
}

fn log_softmax_at(logits: &[f64], idx: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + libm::log(logits.iter().map(|&l| libm::exp(l - max)).sum::<f64>());
    logits[idx] - lse
}

fn action_index(actions: &[ArithStep], step: &ArithStep) -> Result<usize> {
    actions
        .iter()
        .position(|a| a.same_action(step))
        .ok_or_else(|| Error::IllegalAction(alloc::format!("{step}")))
}

/// `sum_t log P_F(s_t | s_{t-1})` along the trajectory.
pub fn log_pf_trajectory(model: &PolicyModel, trajectory: &Trajectory) -> Result<f64> {
    let states = trajectory.states();
    let mut total = 0.0;
    for (state, step) in states.iter().zip(trajectory.steps()) {
        let fwd = forward_state(model, state)?;
        total += log_softmax_at(&fwd.logits, action_index(&fwd.actions, step)?);
    }
    Ok(total)
}

/// Like [`log_pf_trajectory`], additionally accumulating
/// `scale * d(log P_F)/d params` into `grad`.
pub fn log_pf_with_grad(
    model: &PolicyModel,
    trajectory: &Trajectory,
    scale: f64,
    grad: &mut Gradient,
) -> Result<f64> {
    let states = trajectory.states();
    let mut total = 0.0;
    for (state, step) in states.iter().zip(trajectory.steps()) {
        let fwd = forward_state(model, state)?;
        let idx = action_index(&fwd.actions, step)?;
        total += log_softmax_at(&fwd.logits, idx);
        let probs = crate::decoding::softmax(&fwd.logits);
        let dlogits: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(k, &p)| scale * (if k == idx { 1.0 } else { 0.0 } - p))
            .collect();
        backward_state(model, &fwd, &dlogits, grad);
    }
    Ok(total)
}

/// Uniform backward policy over the incoming edges of the puzzle's DAG.
#[derive(Debug, Clone)]
pub struct BackwardPolicy {
    dag: PuzzleDag,
}

impl BackwardPolicy {
    pub fn for_puzzle(puzzle: &crate::game::Puzzle) -> Self {
        BackwardPolicy {
            dag: PuzzleDag::build(puzzle),
        }
    }

    /// Number of parents (incoming edges) of a non-initial state.
    pub fn parent_count(&self, state: &GameState) -> u32 {
        self.dag.in_degree(state)
    }

    /// `sum_t log P_B(s_{t-1} | s_t)`; each term is `-ln(parent_count(s_t))`.
    pub fn log_pb(&self, trajectory: &Trajectory) -> f64 {
        trajectory.states()[1..]
            .iter()
            .map(|s| -libm::log(self.parent_count(s).max(1) as f64))
            .sum()
    }
}

pub fn log_pb_trajectory(trajectory: &Trajectory) -> f64 {
    BackwardPolicy::for_puzzle(trajectory.puzzle()).log_pb(trajectory)
}
