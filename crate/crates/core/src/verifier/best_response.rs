//! Optimal deviation for one agent against an obedient opponent.
//!
//! The deviating agent's information at each stage is the state and its own
//! recommendation. Its belief about the opponent's recommendation is the
//! joint distribution conditioned on its own; the noise is independent of
//! messages and enters through the kernel rows. Backward induction over these
//! information nodes yields the best achievable reward-to-go, which is then
//! compared with the obedient reward-to-go.

use serde::{Deserialize, Serialize};

use crate::game::{Agent, GameSpec};
use crate::strategy::{JointDist, Strategy, SUPPORT_THRESHOLD};

/// Belief of `agent` about the opponent's recommendation after being told
/// `recommended`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalBelief {
    pub agent: Agent,
    pub recommended: usize,
    /// Marginal probability of `recommended`.
    pub weight: f64,
    /// Distribution over the opponent's recommendation.
    pub opponent: Vec<f64>,
}

/// Conditions `dist` on `agent` receiving `recommended`. `None` when the
/// recommendation has no mass above [`SUPPORT_THRESHOLD`].
pub fn conditional_belief(dist: &JointDist, agent: Agent, recommended: usize) -> Option<ConditionalBelief> {
    let counts = dist.counts;
    let joint: Vec<f64> = (0..counts.of(agent.other()))
        .map(|mj| dist.probs[counts.joint_for(agent, recommended, mj)])
        .collect();
    let weight: f64 = joint.iter().sum();
    (weight > SUPPORT_THRESHOLD).then(|| ConditionalBelief {
        agent,
        recommended,
        weight,
        opponent: joint.into_iter().map(|p| p / weight).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    pub agent: Agent,
    /// `policy[stage][x][m]`: best action after recommendation `m`, `None`
    /// where no information node exists (zero-probability recommendation or
    /// unsolved state). Ties go to the smallest action.
    pub policy: Vec<Vec<Vec<Option<usize>>>>,
    /// Best deviation reward-to-go, `horizon + 1` layers.
    pub values: Vec<Vec<f64>>,
    /// Obedient reward-to-go recomputed through the beliefs.
    pub obedient: Vec<Vec<f64>>,
    /// Largest `values - obedient` over all states.
    pub max_gain: f64,
    /// Largest one-step deviation gain at any information node, scaled by
    /// the recommendation's probability (same units as the linear obedience
    /// inequalities).
    pub max_node_gap: f64,
}

impl BestResponse {
    /// Obedience is sequentially rational for this agent within `tol`.
    pub fn passes(&self, tol: f64) -> bool {
        self.max_gain <= tol
    }
}

/// Expected continuation for `agent` playing `own` against belief `opponent`.
fn belief_value(
    spec: &GameSpec,
    stage: usize,
    x: usize,
    agent: Agent,
    own: usize,
    opponent: &[f64],
    next: &[f64],
) -> f64 {
    let counts = spec.actions(stage, x);
    opponent
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(mj, &p)| {
            let k = counts.joint_for(agent, own, mj);
            p * (spec.rewards.agent(agent, stage, x, k) + spec.kernel.expect(stage, x, k, next))
        })
        .sum()
}

fn argmax(values: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

pub fn best_response(spec: &GameSpec, strategy: &Strategy, agent: Agent) -> BestResponse {
    let horizon = spec.horizon;
    let terminal = vec![0.0; spec.num_states(horizon)];
    let mut values = vec![Vec::new(); horizon + 1];
    let mut obedient = vec![Vec::new(); horizon + 1];
    values[horizon] = terminal.clone();
    obedient[horizon] = terminal;
    let mut policy = vec![Vec::new(); horizon];
    let mut max_gain = 0.0f64;
    let mut max_node_gap = 0.0f64;

    for stage in (0..horizon).rev() {
        let n = spec.num_states(stage);
        let (mut br, mut ob) = (vec![f64::NAN; n], vec![f64::NAN; n]);
        let mut layer_policy = vec![Vec::new(); n];
        for x in 0..n {
            let Some(g) = strategy.get(stage, x) else { continue };
            let counts = g.counts;
            let own = counts.of(agent);
            let mut choices = vec![None; own];
            let (mut dev_total, mut obey_total) = (0.0, 0.0);
            for m in 0..own {
                match conditional_belief(g, agent, m) {
                    Some(belief) => {
                        let w = belief.weight;
                        let (u, best) = argmax(
                            (0..own)
                                .map(|u| belief_value(spec, stage, x, agent, u, &belief.opponent, &values[stage + 1])),
                        );
                        choices[m] = Some(u);
                        dev_total += w * best;
                        obey_total +=
                            w * belief_value(spec, stage, x, agent, m, &belief.opponent, &obedient[stage + 1]);

                        let one_step = (0..own)
                            .map(|u| belief_value(spec, stage, x, agent, u, &belief.opponent, &obedient[stage + 1]))
                            .fold(f64::NEG_INFINITY, f64::max);
                        let stay = belief_value(spec, stage, x, agent, m, &belief.opponent, &obedient[stage + 1]);
                        max_node_gap = max_node_gap.max(w * (one_step - stay));
                    }
                    None => {
                        // Negligible mass: no information node; play as told.
                        for mj in 0..counts.of(agent.other()) {
                            let k = counts.joint_for(agent, m, mj);
                            let p = g.probs[k];
                            if p > 0.0 {
                                let r = spec.rewards.agent(agent, stage, x, k);
                                dev_total += p * (r + spec.kernel.expect(stage, x, k, &values[stage + 1]));
                                obey_total += p * (r + spec.kernel.expect(stage, x, k, &obedient[stage + 1]));
                            }
                        }
                    }
                }
            }
            br[x] = dev_total;
            ob[x] = obey_total;
            max_gain = max_gain.max(dev_total - obey_total);
            layer_policy[x] = choices;
        }
        values[stage] = br;
        obedient[stage] = ob;
        policy[stage] = layer_policy;
    }
    BestResponse {
        agent,
        policy,
        values,
        obedient,
        max_gain,
        max_node_gap,
    }
}
