//! Comparison designers that dictate joint actions directly: the
//! unconstrained designer (a plain MDP) and the constrained designer that
//! must guarantee each agent an expected total reward.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Agent, GameSpec};
use crate::lp::{solve_lp, LinearProgram, LpError, LpStatus};
use crate::strategy::{ActionStrategy, JointDist, Strategy, StrategyKind};

/// Occupation mass below this leaves a state's policy row uniform.
pub const OCCUPATION_FLOOR: f64 = 1e-12;
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("agent reward thresholds ({eps1}, {eps2}) are not attainable")]
    Infeasible { eps1: f64, eps2: f64 },
    #[error("occupation-measure program is unbounded")]
    Unbounded,
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone)]
pub struct UdSolution {
    pub strategy: ActionStrategy,
    /// Optimal designer reward-to-go, `horizon + 1` layers.
    pub values: Vec<Vec<f64>>,
    /// `E[V_1(X_1)]`.
    pub designer_value: f64,
}

/// Backward induction for the designer's own reward with no incentive
/// constraints. Ties go to the smallest joint index.
pub fn solve_unconstrained(spec: &GameSpec) -> UdSolution {
    let horizon = spec.horizon;
    let mut values = vec![Vec::new(); horizon + 1];
    values[horizon] = vec![0.0; spec.num_states(horizon)];
    let mut stages = vec![Vec::new(); horizon];
    for stage in (0..horizon).rev() {
        let mut layer = Vec::with_capacity(spec.num_states(stage));
        let mut dists = Vec::with_capacity(spec.num_states(stage));
        for x in 0..spec.num_states(stage) {
            let counts = spec.actions(stage, x);
            let q: Vec<f64> = (0..counts.joint_count())
                .map(|k| spec.rewards.designer(stage, x, k) + spec.kernel.expect(stage, x, k, &values[stage + 1]))
                .collect();
            let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let k = q
                .iter()
                .position(|&v| v >= best - TIE_TOL * (1.0 + best.abs()))
                .expect("non-empty action set");
            let (u1, u2) = counts.joint_pair(k);
            layer.push(q[k]);
            dists.push(Some(JointDist::point(counts, u1, u2)));
        }
        values[stage] = layer;
        stages[stage] = dists;
    }
    let designer_value = spec.initial.iter().zip(&values[0]).map(|(p, v)| p * v).sum();
    UdSolution {
        strategy: Strategy {
            kind: StrategyKind::Ud,
            stages,
        },
        values,
        designer_value,
    }
}

/// Per-stage joint distribution over (state, joint action).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationMeasure {
    /// `rho[stage][x][k]`.
    pub rho: Vec<Vec<Vec<f64>>>,
}

impl OccupationMeasure {
    pub fn stage_mass(&self, stage: usize) -> f64 {
        self.rho[stage].iter().flatten().sum()
    }

    pub fn state_mass(&self, stage: usize, x: usize) -> f64 {
        self.rho[stage][x].iter().sum()
    }

    /// Largest violation of the initial-marginal and flow-conservation
    /// equalities.
    pub fn flow_residual(&self, spec: &GameSpec) -> f64 {
        let mut worst = 0.0f64;
        for (x, &p) in spec.initial.iter().enumerate() {
            worst = worst.max((self.state_mass(0, x) - p).abs());
        }
        for stage in 0..spec.horizon.saturating_sub(1) {
            let mut inflow = vec![0.0; spec.num_states(stage + 1)];
            for (x, row) in self.rho[stage].iter().enumerate() {
                for (k, &r) in row.iter().enumerate() {
                    for &(y, p) in spec.kernel.row(stage, x, k) {
                        inflow[y] += r * p;
                    }
                }
            }
            for (y, f) in inflow.iter().enumerate() {
                worst = worst.max((self.state_mass(stage + 1, y) - f).abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub struct CmdpSolution {
    pub occupation: OccupationMeasure,
    pub strategy: ActionStrategy,
    /// `J^0` from the program's objective.
    pub designer: f64,
    pub agent1: f64,
    pub agent2: f64,
    pub pivots: usize,
}

impl CmdpSolution {
    pub fn agent(&self, agent: Agent) -> f64 {
        match agent {
            Agent::One => self.agent1,
            Agent::Two => self.agent2,
        }
    }
}

/// Maximizes the designer's expected total reward over Markov action
/// strategies subject to `J^1 >= eps1` and `J^2 >= eps2`, as one linear
/// program over occupation measures.
pub fn solve_cmdp(spec: &GameSpec, eps1: f64, eps2: f64) -> Result<CmdpSolution, BaselineError> {
    let horizon = spec.horizon;
    // Column offset of every (stage, x) block.
    let mut offsets = Vec::with_capacity(horizon);
    let mut n = 0;
    for stage in 0..horizon {
        let mut layer = Vec::with_capacity(spec.num_states(stage));
        for x in 0..spec.num_states(stage) {
            layer.push(n);
            n += spec.actions(stage, x).joint_count();
        }
        offsets.push(layer);
    }
    let columns = |stage: usize, x: usize| {
        let start = offsets[stage][x];
        start..start + spec.actions(stage, x).joint_count()
    };

    let mut objective = vec![0.0; n];
    let mut reward1 = vec![0.0; n];
    let mut reward2 = vec![0.0; n];
    for stage in 0..horizon {
        for x in 0..spec.num_states(stage) {
            for (k, col) in columns(stage, x).enumerate() {
                objective[col] = spec.rewards.designer(stage, x, k);
                reward1[col] = spec.rewards.agent(Agent::One, stage, x, k);
                reward2[col] = spec.rewards.agent(Agent::Two, stage, x, k);
            }
        }
    }
    let mut lp = LinearProgram::new(objective)?;
    for (x, &p) in spec.initial.iter().enumerate() {
        let mut row = vec![0.0; n];
        for col in columns(0, x) {
            row[col] = 1.0;
        }
        lp.add_eq(row, p)?;
    }
    for stage in 1..horizon {
        for y in 0..spec.num_states(stage) {
            let mut row = vec![0.0; n];
            for col in columns(stage, y) {
                row[col] = 1.0;
            }
            for x in 0..spec.num_states(stage - 1) {
                for (k, col) in columns(stage - 1, x).enumerate() {
                    for &(z, p) in spec.kernel.row(stage - 1, x, k) {
                        if z == y {
                            row[col] -= p;
                        }
                    }
                }
            }
            lp.add_eq(row, 0.0)?;
        }
    }
    lp.add_ge(reward1.clone(), eps1)?;
    lp.add_ge(reward2.clone(), eps2)?;

    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(BaselineError::Infeasible { eps1, eps2 }),
        LpStatus::Unbounded => return Err(BaselineError::Unbounded),
    }

    let mut rho = Vec::with_capacity(horizon);
    let mut stages = Vec::with_capacity(horizon);
    for stage in 0..horizon {
        let mut layer = Vec::with_capacity(spec.num_states(stage));
        let mut dists = Vec::with_capacity(spec.num_states(stage));
        for x in 0..spec.num_states(stage) {
            let counts = spec.actions(stage, x);
            let block: Vec<f64> = sol.x[columns(stage, x)].to_vec();
            let mass: f64 = block.iter().sum();
            let dist = if mass > OCCUPATION_FLOOR {
                JointDist::new(counts, block.iter().map(|r| r / mass).collect())
            } else {
                JointDist::uniform(counts)
            };
            layer.push(block);
            dists.push(Some(dist));
        }
        rho.push(layer);
        stages.push(dists);
    }
    let total = |weights: &[f64]| {
        rho.iter()
            .flatten()
            .flatten()
            .zip(weights)
            .map(|(r, w)| r * w)
            .sum::<f64>()
    };
    let (agent1, agent2) = (total(&reward1), total(&reward2));
    Ok(CmdpSolution {
        designer: sol.objective,
        agent1,
        agent2,
        pivots: sol.iterations,
        occupation: OccupationMeasure { rho },
        strategy: Strategy {
            kind: StrategyKind::Cmdp,
            stages,
        },
    })
}
