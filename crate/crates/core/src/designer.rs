//! Backward induction over per-state stage programs.
//!
//! At each stage and state the designer picks a distribution `g` over joint
//! recommendations. Its constraints require that, conditional on any
//! recommendation it receives, an agent cannot gain by playing a different
//! action this step and obeying afterwards (continuation values `W` of the
//! next stage). The objective is the designer's one-step reward plus its
//! next-stage value. Value functions are substituted out of the program, so
//! the only variables are the `g` entries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{reachable_mask, ActionCounts, Agent, GameSpec};
use crate::lp::{solve_lp, LinearProgram, LpError, LpStatus};
use crate::par::map_indexed;
use crate::strategy::{JointDist, MessagingStrategy, Strategy, StrategyKind, ValueTables, SUPPORT_THRESHOLD};

#[derive(Debug, Error)]
pub enum DesignerError {
    #[error("next-stage value missing for state {x} at t={t}")]
    MissingValue { t: usize, x: usize },
    #[error("stage program at t={t}, x={x} is {status:?}\n{dump}")]
    StageFailed {
        t: usize,
        x: usize,
        status: LpStatus,
        dump: String,
    },
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// One obedience inequality: `agent`, told `recommended`, must not prefer
/// `deviation`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObedienceRow {
    pub agent: Agent,
    pub recommended: usize,
    pub deviation: usize,
}

/// Column `k` of a stage program is the probability of joint recommendation
/// `counts.joint_pair(k)`; inequality rows follow `rows` in order.
#[derive(Debug, Clone, PartialEq)]
pub struct StageLpLayout {
    pub counts: ActionCounts,
    pub rows: Vec<ObedienceRow>,
}

impl StageLpLayout {
    pub fn column(&self, m1: usize, m2: usize) -> usize {
        self.counts.joint_index(m1, m2)
    }

    pub fn pair(&self, column: usize) -> (usize, usize) {
        self.counts.joint_pair(column)
    }
}

/// Next-stage value layers consumed by a stage program.
#[derive(Debug, Clone, Copy)]
pub struct NextValues<'a> {
    pub designer: &'a [f64],
    pub agent1: &'a [f64],
    pub agent2: &'a [f64],
}

impl<'a> NextValues<'a> {
    pub fn agent(&self, agent: Agent) -> &'a [f64] {
        match agent {
            Agent::One => self.agent1,
            Agent::Two => self.agent2,
        }
    }

    fn layer(values: &'a ValueTables, stage: usize) -> Self {
        Self {
            designer: &values.designer[stage],
            agent1: &values.agent1[stage],
            agent2: &values.agent2[stage],
        }
    }
}

/// Per-joint-action continuation values at one state:
/// `r(x, k) + sum_x' P(x' | x, k) * next(x')`.
struct Continuations {
    designer: Vec<f64>,
    agent1: Vec<f64>,
    agent2: Vec<f64>,
}

impl Continuations {
    fn agent(&self, agent: Agent) -> &[f64] {
        match agent {
            Agent::One => &self.agent1,
            Agent::Two => &self.agent2,
        }
    }
}

fn continuations(
    spec: &GameSpec,
    stage: usize,
    x: usize,
    next: &NextValues<'_>,
) -> Result<Continuations, DesignerError> {
    let counts = spec.actions(stage, x);
    let expected = spec.num_states(stage + 1);
    for layer in [next.designer, next.agent1, next.agent2] {
        if layer.len() != expected {
            return Err(DesignerError::MissingValue {
                t: stage + 2,
                x: layer.len().min(expected),
            });
        }
    }
    for row in &spec.kernel.rows[stage][x] {
        for &(y, p) in row {
            if p > 0.0
                && [next.designer[y], next.agent1[y], next.agent2[y]]
                    .iter()
                    .any(|v| !v.is_finite())
            {
                return Err(DesignerError::MissingValue { t: stage + 2, x: y });
            }
        }
    }
    let value = |reward: f64, k: usize, layer: &[f64]| reward + spec.kernel.expect(stage, x, k, layer);
    let n = counts.joint_count();
    let r = &spec.rewards;
    Ok(Continuations {
        designer: (0..n)
            .map(|k| value(r.designer(stage, x, k), k, next.designer))
            .collect(),
        agent1: (0..n)
            .map(|k| value(r.agent(Agent::One, stage, x, k), k, next.agent1))
            .collect(),
        agent2: (0..n)
            .map(|k| value(r.agent(Agent::Two, stage, x, k), k, next.agent2))
            .collect(),
    })
}

/// Builds the stage program for `(stage, x)` given next-stage values.
pub fn build_stage_lp(
    spec: &GameSpec,
    stage: usize,
    x: usize,
    next: &NextValues<'_>,
) -> Result<(LinearProgram, StageLpLayout), DesignerError> {
    let cont = continuations(spec, stage, x, next)?;
    Ok(assemble(spec.actions(stage, x), &cont)?)
}

fn assemble(counts: ActionCounts, cont: &Continuations) -> Result<(LinearProgram, StageLpLayout), LpError> {
    let n = counts.joint_count();
    let mut lp = LinearProgram::new(cont.designer.clone())?;
    lp.add_eq(vec![1.0; n], 1.0)?;
    let mut rows = Vec::new();
    for agent in Agent::BOTH {
        let q = cont.agent(agent);
        let own = counts.of(agent);
        let other = counts.of(agent.other());
        for recommended in 0..own {
            for deviation in (0..own).filter(|&u| u != recommended) {
                let mut coeffs = vec![0.0; n];
                for mj in 0..other {
                    let obey = counts.joint_for(agent, recommended, mj);
                    let dev = counts.joint_for(agent, deviation, mj);
                    coeffs[obey] = q[dev] - q[obey];
                }
                lp.add_le(coeffs, 0.0)?;
                rows.push(ObedienceRow {
                    agent,
                    recommended,
                    deviation,
                });
            }
        }
    }
    Ok((lp, StageLpLayout { counts, rows }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignerOptions {
    /// Solve the states of a stage concurrently (needs the `parallel` feature).
    pub parallel: bool,
    /// Only solve states reachable from the initial support.
    pub reachable_only: bool,
    /// Mass below this is dropped before a distribution is stored.
    pub support_threshold: f64,
}

impl Default for DesignerOptions {
    fn default() -> Self {
        Self {
            parallel: true,
            reachable_only: false,
            support_threshold: SUPPORT_THRESHOLD,
        }
    }
}

/// Bookkeeping for one solved stage program.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub lp_objective: f64,
    pub pivots: usize,
}

#[derive(Debug, Clone)]
pub struct DesignerSolution {
    pub strategy: MessagingStrategy,
    pub values: ValueTables,
    /// `stats[stage][x]`, `None` for skipped states.
    pub stats: Vec<Vec<Option<StageStats>>>,
}

impl DesignerSolution {
    /// Designer's optimal total expected reward `E[V_1(X_1)]`.
    pub fn expected_value(&self, spec: &GameSpec) -> f64 {
        self.values.expected_initial(spec, None)
    }

    pub fn total_pivots(&self) -> usize {
        self.stats.iter().flatten().flatten().map(|s| s.pivots).sum()
    }
}

struct SolvedState {
    dist: JointDist,
    designer: f64,
    agent1: f64,
    agent2: f64,
    stats: StageStats,
}

/// Optimal Markov messaging strategy by backward induction over the stage
/// programs, with value tables evaluated at the stored distributions.
pub fn solve_designer(spec: &GameSpec, options: &DesignerOptions) -> Result<DesignerSolution, DesignerError> {
    let horizon = spec.horizon;
    let mask = options.reachable_only.then(|| reachable_mask(spec));
    let mut values = ValueTables {
        designer: vec![Vec::new(); horizon + 1],
        agent1: vec![Vec::new(); horizon + 1],
        agent2: vec![Vec::new(); horizon + 1],
    };
    let terminal = vec![0.0; spec.num_states(horizon)];
    values.designer[horizon] = terminal.clone();
    values.agent1[horizon] = terminal.clone();
    values.agent2[horizon] = terminal;

    let mut stages = vec![Vec::new(); horizon];
    let mut stats = vec![Vec::new(); horizon];
    for stage in (0..horizon).rev() {
        let next = NextValues::layer(&values, stage + 1);
        let solved = map_indexed(spec.num_states(stage), options.parallel, |x| {
            if mask.as_ref().is_some_and(|m| !m[stage][x]) {
                return Ok(None);
            }
            solve_state(spec, stage, x, &next, options.support_threshold).map(Some)
        });
        let n = spec.num_states(stage);
        let (mut dv, mut w1, mut w2) = (vec![f64::NAN; n], vec![f64::NAN; n], vec![f64::NAN; n]);
        let mut dists = Vec::with_capacity(n);
        let mut layer_stats = Vec::with_capacity(n);
        for (x, s) in solved.into_iter().enumerate() {
            match s? {
                Some(s) => {
                    dv[x] = s.designer;
                    w1[x] = s.agent1;
                    w2[x] = s.agent2;
                    dists.push(Some(s.dist));
                    layer_stats.push(Some(s.stats));
                }
                None => {
                    dists.push(None);
                    layer_stats.push(None);
                }
            }
        }
        values.designer[stage] = dv;
        values.agent1[stage] = w1;
        values.agent2[stage] = w2;
        stages[stage] = dists;
        stats[stage] = layer_stats;
    }
    Ok(DesignerSolution {
        strategy: Strategy {
            kind: StrategyKind::Messaging,
            stages,
        },
        values,
        stats,
    })
}

fn solve_state(
    spec: &GameSpec,
    stage: usize,
    x: usize,
    next: &NextValues<'_>,
    threshold: f64,
) -> Result<SolvedState, DesignerError> {
    let cont = continuations(spec, stage, x, next)?;
    let counts = spec.actions(stage, x);
    let (lp, _) = assemble(counts, &cont)?;
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(DesignerError::StageFailed {
            t: stage + 1,
            x,
            status: sol.status,
            dump: lp.to_string(),
        });
    }
    let dist = JointDist::new(counts, sol.x).truncated(threshold);
    let dot = |v: &[f64]| dist.probs.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
    Ok(SolvedState {
        designer: dot(&cont.designer),
        agent1: dot(&cont.agent1),
        agent2: dot(&cont.agent2),
        stats: StageStats {
            lp_objective: sol.objective,
            pivots: sol.iterations,
        },
        dist,
    })
}
