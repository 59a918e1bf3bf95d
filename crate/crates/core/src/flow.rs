//! Explicit flows on a single puzzle's DAG.
//!
//! Under trajectory balance the flows are not parameterized directly; they
//! follow from the forward policy and `Z`. This module enumerates every
//! trajectory, sets `F(tau) = Z * P_F(tau)` and sums to obtain state flows,
//! edge flows and the sampler's exact terminal distribution. Intended for
//! small puzzles and tests.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::decoding::softmax;
use crate::error::Result;
use crate::game::{apply, GameState, Puzzle};
use crate::policy::{forward_logits, PolicyModel};
use crate::rational::Rational;

/// DAG vertex: depth plus sorted remaining values.
pub type Vertex = (usize, Vec<Rational>);

#[derive(Debug, Clone, Default)]
pub struct FlowTable {
    pub z: f64,
    pub state_flow: BTreeMap<Vertex, f64>,
    pub edge_flow: BTreeMap<(Vertex, Vertex), f64>,
    /// `P_F(s'|s)` summed over actions leading from `s` to `s'`.
    pub forward: BTreeMap<(Vertex, Vertex), f64>,
}

impl FlowTable {
    /// Terminal flow divided by `Z`: the sampler's distribution over final values.
    pub fn terminal_distribution(&self) -> BTreeMap<Rational, f64> {
        let mut out = BTreeMap::new();
        for ((depth, key), f) in &self.state_flow {
            if *depth == crate::game::EPISODE_STEPS {
                *out.entry(key[0]).or_insert(0.0) += f / self.z;
            }
        }
        out
    }
}

fn vertex(s: &GameState) -> Vertex {
    (s.depth(), s.key())
}

pub fn explicit_flows(model: &PolicyModel, puzzle: &Puzzle) -> Result<FlowTable> {
    fn go(model: &PolicyModel, state: &GameState, prob: f64, table: &mut FlowTable) -> Result<()> {
        let here = vertex(state);
        *table.state_flow.entry(here.clone()).or_insert(0.0) += table.z * prob;
        if state.is_terminal() {
            return Ok(());
        }
        let scored = forward_logits(model, state)?;
        let probs = softmax(&scored.iter().map(|s| s.1).collect::<Vec<_>>());
        for ((action, _), p) in scored.iter().zip(probs) {
            let child = apply(state, action)?;
            let edge = (here.clone(), vertex(&child));
            *table.edge_flow.entry(edge.clone()).or_insert(0.0) += table.z * prob * p;
            go(model, &child, prob * p, table)?;
        }
        Ok(())
    }
    let mut table = FlowTable {
        z: libm::exp(model.log_z),
        ..FlowTable::default()
    };
    go(model, &puzzle.initial_state(), 1.0, &mut table)?;
    let edges: Vec<_> = table.edge_flow.iter().map(|(k, v)| (k.clone(), *v)).collect();
    for ((from, to), f) in edges {
        let pf = f / table.state_flow[&from];
        table.forward.insert((from, to), pf);
    }
    Ok(table)
}

/// Exact probability of each final value under the forward policy.
pub fn terminal_distribution(model: &PolicyModel, puzzle: &Puzzle) -> Result<BTreeMap<Rational, f64>> {
    Ok(explicit_flows(model, puzzle)?.terminal_distribution())
}
