use serde::{Deserialize, Serialize};

use crate::game::{Agent, GameSpec};
use crate::strategy::{Strategy, SUPPORT_THRESHOLD};

use super::evaluate::agent_values;

/// Default slack allowed before a deviation counts as profitable.
pub const DEFAULT_SR_TOL: f64 = 1e-6;

/// A profitable one-step deviation. `gap` is the deviation payoff minus the
/// obedient payoff, both weighted by the joint recommendation probabilities
/// (not conditioned on the recommendation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub agent: usize,
    /// One-based decision epoch.
    pub t: usize,
    pub x: usize,
    pub recommended: usize,
    pub deviation: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrReport {
    pub tolerance: f64,
    pub violations: Vec<Violation>,
    /// Largest gap over all checked inequalities, floored at zero.
    pub max_gap: f64,
    pub checked: usize,
    pub passed: bool,
}

impl SrReport {
    /// Violations sorted by decreasing gap.
    pub fn worst(&self, n: usize) -> Vec<&Violation> {
        let mut v: Vec<&Violation> = self.violations.iter().collect();
        v.sort_by(|a, b| b.gap.total_cmp(&a.gap));
        v.truncate(n);
        v
    }
}

/// Evaluates every obedience inequality whose recommendation has positive
/// probability, with continuation values computed from `strategy` itself.
/// States without a stored distribution are skipped.
pub fn check_obedience(spec: &GameSpec, strategy: &Strategy, tol: f64) -> SrReport {
    let w = agent_values(spec, strategy);
    let mut violations = Vec::new();
    let mut max_gap = 0.0f64;
    let mut checked = 0;
    for stage in 0..spec.horizon {
        for x in 0..spec.num_states(stage) {
            let Some(g) = strategy.get(stage, x) else { continue };
            let counts = g.counts;
            for (ai, agent) in Agent::BOTH.into_iter().enumerate() {
                let next = &w[ai][stage + 1];
                let q = |k: usize| spec.rewards.agent(agent, stage, x, k) + spec.kernel.expect(stage, x, k, next);
                let marginal = g.marginal(agent);
                for (m, &pm) in marginal.iter().enumerate() {
                    if pm <= SUPPORT_THRESHOLD {
                        continue;
                    }
                    let obey: f64 = (0..counts.of(agent.other()))
                        .map(|mj| {
                            let k = counts.joint_for(agent, m, mj);
                            g.probs[k] * q(k)
                        })
                        .sum();
                    for u in (0..counts.of(agent)).filter(|&u| u != m) {
                        let deviate: f64 = (0..counts.of(agent.other()))
                            .map(|mj| g.probs[counts.joint_for(agent, m, mj)] * q(counts.joint_for(agent, u, mj)))
                            .sum();
                        let gap = deviate - obey;
                        checked += 1;
                        max_gap = max_gap.max(gap);
                        if gap > tol {
                            violations.push(Violation {
                                agent: agent.number(),
                                t: stage + 1,
                                x,
                                recommended: m,
                                deviation: u,
                                gap,
                            });
                        }
                    }
                }
            }
        }
    }
    SrReport {
        tolerance: tol,
        passed: violations.is_empty(),
        violations,
        max_gap,
        checked,
    }
}
