//! History-dependent designer optimum on tiny instances.
//!
//! Treats the full history (past states, actions and messages) together with
//! the current state as the state of the problem, and solves one stage
//! program per (history, state) node by backward induction. Continuation
//! values after a deviation are those of the history that records the
//! deviation, so messages may depend on everything observed. The recursion
//! walks the history tree without sharing nodes, so each distinct history
//! gets its own program. The tree grows exponentially, hence the size guard.

use serde::{Deserialize, Serialize};

use crate::game::{Agent, GameSpec};
use crate::lp::{solve_lp, LinearProgram, LpStatus};

use super::VerifyError;

/// Maximum number of (history, state) nodes the oracle will expand.
pub const EXPANDED_NODE_LIMIT: u128 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpandedOptimum {
    /// Optimal `E[V_1]` over history-dependent strategies.
    pub value: f64,
    /// Stage programs solved.
    pub programs: usize,
}

/// Upper bound on (history, state) nodes:
/// `sum_s |X_s| * prod_{r<s} |X_r| * J_r^2`, where `J_r` is the largest joint
/// action count at stage `r` (one factor for messages, one for actions).
pub fn expanded_node_count(spec: &GameSpec) -> u128 {
    let mut histories: u128 = 1;
    let mut total: u128 = 0;
    for stage in 0..=spec.horizon {
        let states = spec.num_states(stage) as u128;
        total = total.saturating_add(histories.saturating_mul(states));
        if stage < spec.horizon {
            let joint = spec.actions[stage].iter().map(|c| c.joint_count()).max().unwrap_or(0) as u128;
            histories = histories.saturating_mul(states).saturating_mul(joint * joint);
        }
    }
    total
}

struct Expander<'a> {
    spec: &'a GameSpec,
    programs: usize,
}

impl Expander<'_> {
    /// Returns `[V, W^1, W^2]` at `(history, x)`.
    fn node(&mut self, stage: usize, x: usize) -> Result<[f64; 3], VerifyError> {
        let spec = self.spec;
        if stage == spec.horizon {
            return Ok([0.0; 3]);
        }
        let counts = spec.actions(stage, x);
        let n = counts.joint_count();
        // cont[km][ka] = rewards plus next-node values after messages km and
        // actions ka; only obedient and unilateral-deviation actions appear.
        let mut cont: Vec<Vec<Option<[f64; 3]>>> = vec![vec![None; n]; n];
        for km in 0..n {
            let (m1, m2) = counts.joint_pair(km);
            let mut actions = vec![km];
            actions.extend(
                (0..counts.agent1)
                    .filter(|&u| u != m1)
                    .map(|u| counts.joint_index(u, m2)),
            );
            actions.extend(
                (0..counts.agent2)
                    .filter(|&u| u != m2)
                    .map(|u| counts.joint_index(m1, u)),
            );
            for ka in actions {
                let r = &spec.rewards;
                let mut v = [
                    r.designer(stage, x, ka),
                    r.agent(Agent::One, stage, x, ka),
                    r.agent(Agent::Two, stage, x, ka),
                ];
                for &(y, p) in spec.kernel.row(stage, x, ka) {
                    if p <= 0.0 {
                        continue;
                    }
                    let child = self.node(stage + 1, y)?;
                    for (acc, c) in v.iter_mut().zip(child) {
                        *acc += p * c;
                    }
                }
                cont[km][ka] = Some(v);
            }
        }
        let val = |km: usize, ka: usize, i: usize| cont[km][ka].expect("continuation computed")[i];

        let mut lp = LinearProgram::new((0..n).map(|k| val(k, k, 0)).collect())?;
        lp.add_eq(vec![1.0; n], 1.0)?;
        for (i, agent) in [(1, Agent::One), (2, Agent::Two)] {
            for m in 0..counts.of(agent) {
                for u in (0..counts.of(agent)).filter(|&u| u != m) {
                    let mut row = vec![0.0; n];
                    for mj in 0..counts.of(agent.other()) {
                        let km = counts.joint_for(agent, m, mj);
                        let ka = counts.joint_for(agent, u, mj);
                        row[km] = val(km, ka, i) - val(km, km, i);
                    }
                    lp.add_le(row, 0.0)?;
                }
            }
        }
        let sol = solve_lp(&lp)?;
        self.programs += 1;
        if sol.status != LpStatus::Optimal {
            return Err(VerifyError::StageFailed {
                t: stage + 1,
                x,
                status: sol.status,
            });
        }
        let mut out = [0.0; 3];
        for (k, &g) in sol.x.iter().enumerate() {
            for (i, o) in out.iter_mut().enumerate() {
                *o += g * val(k, k, i);
            }
        }
        Ok(out)
    }
}

/// Optimal designer value over history-dependent messaging strategies.
/// Refuses instances whose expanded tree exceeds [`EXPANDED_NODE_LIMIT`].
pub fn history_expanded_optimum(spec: &GameSpec) -> Result<ExpandedOptimum, VerifyError> {
    let nodes = expanded_node_count(spec);
    if nodes > EXPANDED_NODE_LIMIT {
        return Err(VerifyError::TooLarge {
            nodes,
            limit: EXPANDED_NODE_LIMIT,
        });
    }
    let mut expander = Expander { spec, programs: 0 };
    let mut value = 0.0;
    for (x, &p) in spec.initial.iter().enumerate() {
        if p > 0.0 {
            value += p * expander.node(0, x)?[0];
        }
    }
    Ok(ExpandedOptimum {
        value,
        programs: expander.programs,
    })
}
