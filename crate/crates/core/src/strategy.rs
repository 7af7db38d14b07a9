//! Per-state joint distributions: the designer's messaging strategy and the
//! baselines' action strategies share one representation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{ActionCounts, Agent, GameSpec};

/// Probability mass below this is treated as zero when deciding support.
pub const SUPPORT_THRESHOLD: f64 = 1e-9;
/// Tolerance for a stored distribution summing to one.
pub const DIST_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum StrategyError {
    #[error("no distribution stored at t={t}, x={x}")]
    Missing { t: usize, x: usize },
    #[error("stage index t={t} outside horizon {horizon}")]
    Stage { t: usize, horizon: usize },
    #[error("state {x} outside stage t={t} ({num_states} states)")]
    State { t: usize, x: usize, num_states: usize },
    #[error("t={t}, x={x}: {message}")]
    Malformed { t: usize, x: usize, message: String },
}

/// Distribution over the joint action set `U^1 x U^2` of one state,
/// flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDist {
    pub counts: ActionCounts,
    pub probs: Vec<f64>,
}

impl JointDist {
    pub fn new(counts: ActionCounts, probs: Vec<f64>) -> Self {
        assert_eq!(probs.len(), counts.joint_count(), "distribution length mismatch");
        Self { counts, probs }
    }

    pub fn point(counts: ActionCounts, u1: usize, u2: usize) -> Self {
        let mut probs = vec![0.0; counts.joint_count()];
        probs[counts.joint_index(u1, u2)] = 1.0;
        Self { counts, probs }
    }

    pub fn uniform(counts: ActionCounts) -> Self {
        let n = counts.joint_count();
        Self {
            counts,
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn prob(&self, u1: usize, u2: usize) -> f64 {
        self.probs[self.counts.joint_index(u1, u2)]
    }

    /// Distribution of `agent`'s component.
    pub fn marginal(&self, agent: Agent) -> Vec<f64> {
        let mut out = vec![0.0; self.counts.of(agent)];
        for (k, &p) in self.probs.iter().enumerate() {
            let (u1, u2) = self.counts.joint_pair(k);
            out[match agent {
                Agent::One => u1,
                Agent::Two => u2,
            }] += p;
        }
        out
    }

    /// Pairs with mass above [`SUPPORT_THRESHOLD`].
    pub fn support(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > SUPPORT_THRESHOLD)
            .map(|(k, &p)| (self.counts.joint_pair(k), p))
    }

    /// Zeroes entries below `threshold` and renormalizes.
    pub fn truncated(mut self, threshold: f64) -> Self {
        for p in &mut self.probs {
            if *p < threshold {
                *p = 0.0;
            }
        }
        let total: f64 = self.probs.iter().sum();
        if total > 0.0 {
            for p in &mut self.probs {
                *p /= total;
            }
        }
        self
    }

    pub fn check(&self) -> Result<(), String> {
        if self.probs.len() != self.counts.joint_count() {
            return Err(format!(
                "{} probabilities for {} joint actions",
                self.probs.len(),
                self.counts.joint_count()
            ));
        }
        if let Some(p) = self.probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(format!("invalid probability {p}"));
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > DIST_SUM_TOL {
            return Err(format!("probabilities sum to {total}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    /// Recommendation strategy whose messages agents are expected to obey.
    Messaging,
    /// Unconstrained designer: directly chosen actions.
    Ud,
    /// Constrained MDP designer: directly chosen actions.
    Cmdp,
}

/// Markov strategy: one optional joint distribution per (stage, state).
/// States the producer did not solve are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    pub kind: StrategyKind,
    pub stages: Vec<Vec<Option<JointDist>>>,
}

/// The designer's recommendation strategy.
pub type MessagingStrategy = Strategy;
/// A baseline's direct action strategy.
pub type ActionStrategy = Strategy;

impl Strategy {
    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    pub fn get(&self, stage: usize, x: usize) -> Option<&JointDist> {
        self.stages.get(stage)?.get(x)?.as_ref()
    }

    pub fn dist(&self, stage: usize, x: usize) -> Result<&JointDist, StrategyError> {
        self.get(stage, x).ok_or(StrategyError::Missing { t: stage + 1, x })
    }

    /// Same distributions under a different kind tag.
    pub fn relabeled(mut self, kind: StrategyKind) -> Self {
        self.kind = kind;
        self
    }

    /// Checks the strategy's shape against `spec` and every stored
    /// distribution's normalization.
    pub fn check_against(&self, spec: &GameSpec) -> Result<(), StrategyError> {
        if self.stages.len() != spec.horizon {
            return Err(StrategyError::Stage {
                t: self.stages.len(),
                horizon: spec.horizon,
            });
        }
        for (stage, layer) in self.stages.iter().enumerate() {
            if layer.len() != spec.num_states(stage) {
                return Err(StrategyError::State {
                    t: stage + 1,
                    x: layer.len(),
                    num_states: spec.num_states(stage),
                });
            }
            for (x, d) in layer.iter().enumerate() {
                if let Some(d) = d {
                    if d.counts != spec.actions(stage, x) {
                        return Err(StrategyError::Malformed {
                            t: stage + 1,
                            x,
                            message: format!(
                                "action sets {:?} differ from spec {:?}",
                                d.counts,
                                spec.actions(stage, x)
                            ),
                        });
                    }
                    d.check().map_err(|message| StrategyError::Malformed {
                        t: stage + 1,
                        x,
                        message,
                    })?;
                }
            }
        }
        Ok(())
    }
}

/// Marginal recommendation distribution of `agent` at `(stage, x)`.
pub fn strategy_marginal(strategy: &Strategy, stage: usize, x: usize, agent: Agent) -> Result<Vec<f64>, StrategyError> {
    if stage >= strategy.horizon() {
        return Err(StrategyError::Stage {
            t: stage + 1,
            horizon: strategy.horizon(),
        });
    }
    let layer = &strategy.stages[stage];
    if x >= layer.len() {
        return Err(StrategyError::State {
            t: stage + 1,
            x,
            num_states: layer.len(),
        });
    }
    Ok(strategy.dist(stage, x)?.marginal(agent))
}

/// Designer and agent reward-to-go tables, `horizon + 1` layers each with a
/// zero terminal layer. Unsolved states hold `NaN`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTables {
    pub designer: Vec<Vec<f64>>,
    pub agent1: Vec<Vec<f64>>,
    pub agent2: Vec<Vec<f64>>,
}

impl ValueTables {
    pub fn agent(&self, agent: Agent) -> &Vec<Vec<f64>> {
        match agent {
            Agent::One => &self.agent1,
            Agent::Two => &self.agent2,
        }
    }

    /// `sum_x P_{X_1}(x) * V_1(x)` for the designer (`None`) or an agent.
    pub fn expected_initial(&self, spec: &GameSpec, agent: Option<Agent>) -> f64 {
        let layer = match agent {
            None => &self.designer[0],
            Some(a) => &self.agent(a)[0],
        };
        spec.initial
            .iter()
            .zip(layer)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, v)| p * v)
            .sum()
    }
}
