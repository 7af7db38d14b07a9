use serde::{Deserialize, Serialize};

use crate::game::{Agent, GameSpec};
use crate::strategy::{Strategy, StrategyError, ValueTables};

use super::VerifyError;

/// Exact expected totals under obedient play.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `J^0`.
    pub designer: f64,
    /// `J^1`.
    pub agent1: f64,
    /// `J^2`.
    pub agent2: f64,
    /// State distribution at every stage, `horizon + 1` layers.
    pub state_trace: Vec<Vec<f64>>,
}

impl EvalReport {
    pub fn agent(&self, agent: Agent) -> f64 {
        match agent {
            Agent::One => self.agent1,
            Agent::Two => self.agent2,
        }
    }
}

/// Pushes the initial distribution forward through the kernel, with joint
/// actions equal to the joint recommendations, accumulating expected rewards.
pub fn evaluate(spec: &GameSpec, strategy: &Strategy) -> Result<EvalReport, VerifyError> {
    let mut dist = spec.initial.clone();
    let mut trace = Vec::with_capacity(spec.horizon + 1);
    let mut totals = [0.0f64; 3];
    for stage in 0..spec.horizon {
        let mut next = vec![0.0; spec.num_states(stage + 1)];
        for (x, &mass) in dist.iter().enumerate() {
            if mass <= 0.0 {
                continue;
            }
            let g = strategy
                .get(stage, x)
                .ok_or(StrategyError::Missing { t: stage + 1, x })?;
            for (k, &p) in g.probs.iter().enumerate() {
                if p <= 0.0 {
                    continue;
                }
                let w = mass * p;
                totals[0] += w * spec.rewards.designer(stage, x, k);
                totals[1] += w * spec.rewards.agent(Agent::One, stage, x, k);
                totals[2] += w * spec.rewards.agent(Agent::Two, stage, x, k);
                for &(y, q) in spec.kernel.row(stage, x, k) {
                    next[y] += w * q;
                }
            }
        }
        trace.push(dist);
        dist = next;
    }
    trace.push(dist);
    Ok(EvalReport {
        designer: totals[0],
        agent1: totals[1],
        agent2: totals[2],
        state_trace: trace,
    })
}

/// Backward recursion `V_t(x) = sum_k g(k|x) [r(x,k) + E V_{t+1}]` for the
/// reward picked by `reward`. States without a distribution get `NaN`.
fn value_recursion(spec: &GameSpec, strategy: &Strategy, reward: impl Fn(usize, usize, usize) -> f64) -> Vec<Vec<f64>> {
    let horizon = spec.horizon;
    let mut layers = vec![Vec::new(); horizon + 1];
    layers[horizon] = vec![0.0; spec.num_states(horizon)];
    for stage in (0..horizon).rev() {
        let layer: Vec<f64> = (0..spec.num_states(stage))
            .map(|x| match strategy.get(stage, x) {
                None => f64::NAN,
                Some(g) => g
                    .probs
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(k, &p)| p * (reward(stage, x, k) + spec.kernel.expect(stage, x, k, &layers[stage + 1])))
                    .sum(),
            })
            .collect();
        layers[stage] = layer;
    }
    layers
}

/// Agent reward-to-go tables `W^1`, `W^2` under obedience.
pub fn agent_values(spec: &GameSpec, strategy: &Strategy) -> [Vec<Vec<f64>>; 2] {
    Agent::BOTH.map(|a| value_recursion(spec, strategy, |s, x, k| spec.rewards.agent(a, s, x, k)))
}

/// Designer reward-to-go table `V`.
pub fn designer_values(spec: &GameSpec, strategy: &Strategy) -> Vec<Vec<f64>> {
    value_recursion(spec, strategy, |s, x, k| spec.rewards.designer(s, x, k))
}

pub fn strategy_values(spec: &GameSpec, strategy: &Strategy) -> ValueTables {
    let [agent1, agent2] = agent_values(spec, strategy);
    ValueTables {
        designer: designer_values(spec, strategy),
        agent1,
        agent2,
    }
}
