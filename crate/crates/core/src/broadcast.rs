//! Two-transmitter multi-access broadcast channel.
//!
//! Each agent holds up to `buffer` packets and chooses how many to send. A
//! slot succeeds when the total sent fits the channel capacity; otherwise
//! nothing leaves either buffer. Arrivals are independent Bernoulli per agent.
//! The designer values utilization and Jain fairness; each agent values its
//! own delivered packets. Both pay for collisions and full buffers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{solve_cmdp, solve_unconstrained, BaselineError};
use crate::designer::{solve_designer, DesignerError, DesignerOptions, DesignerSolution};
use crate::game::{compile_kernel, ActionCounts, GameError, GameSpec, NoiseModel, RewardTables};
use crate::strategy::{Strategy, StrategyError};
use crate::verifier::{evaluate, VerifyError};

#[derive(Debug, Error)]
pub enum BroadcastError {
    #[error("invalid broadcast parameters: {0}")]
    Params(String),
    #[error("static case needs 0 <= b2 < b1 < buffer and b1 + b2 <= capacity, got ({b1}, {b2})")]
    StaticPrecondition { b1: usize, b2: usize },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Designer(#[from] DesignerError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    /// Uniform over all `(buffer + 1)^2` buffer pairs.
    Uniform,
    /// Both buffers known: `(b1, b2)`.
    Point(usize, usize),
    /// Explicit distribution indexed like the state space.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BroadcastParams {
    /// Buffer capacity per agent, in packets.
    pub buffer: usize,
    /// Channel capacity, in packets per slot.
    pub capacity: usize,
    /// Per-agent arrival probabilities.
    pub arrival: [f64; 2],
    /// Weight of the fairness term in the designer's reward.
    pub alpha: f64,
    /// Collision penalty.
    pub kappa: f64,
    /// Full-buffer penalties for the designer and the two agents.
    pub lambda: [f64; 3],
    pub horizon: usize,
    pub initial: InitialState,
}

impl BroadcastParams {
    /// The dynamic setting of the comparison table: ten slots, buffers of
    /// three, arrival probability 0.8, uniform initial buffers.
    pub fn dynamic(capacity: usize) -> Self {
        Self {
            buffer: 3,
            capacity,
            arrival: [0.8, 0.8],
            alpha: 4.0,
            kappa: 0.1,
            lambda: [0.1; 3],
            horizon: 10,
            initial: InitialState::Uniform,
        }
    }

    /// One-slot game starting from known buffers `(b1, b2)`.
    pub fn static_case(b1: usize, b2: usize, alpha: f64) -> Self {
        Self {
            horizon: 1,
            initial: InitialState::Point(b1, b2),
            alpha,
            ..Self::dynamic(3)
        }
    }

    pub fn num_levels(&self) -> usize {
        self.buffer + 1
    }

    pub fn state_index(&self, b1: usize, b2: usize) -> usize {
        b1 * self.num_levels() + b2
    }

    pub fn buffers(&self, x: usize) -> (usize, usize) {
        (x / self.num_levels(), x % self.num_levels())
    }

    pub fn validate(&self) -> Result<(), BroadcastError> {
        let fail = |m: String| Err(BroadcastError::Params(m));
        if self.buffer < 1 {
            return fail("buffer must be at least 1".into());
        }
        if self.capacity < 1 {
            return fail("capacity must be at least 1".into());
        }
        if self.horizon < 1 {
            return fail("horizon must be at least 1".into());
        }
        if self.arrival.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return fail(format!("arrival probabilities {:?} outside [0, 1]", self.arrival));
        }
        let weights = [self.alpha, self.kappa, self.lambda[0], self.lambda[1], self.lambda[2]];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return fail("alpha, kappa and lambda must be finite and non-negative".into());
        }
        match &self.initial {
            InitialState::Uniform => Ok(()),
            InitialState::Point(b1, b2) if *b1 <= self.buffer && *b2 <= self.buffer => Ok(()),
            InitialState::Point(b1, b2) => fail(format!("initial buffers ({b1}, {b2}) exceed {}", self.buffer)),
            InitialState::Custom(p) => {
                let n = self.num_levels() * self.num_levels();
                let total: f64 = p.iter().sum();
                if p.len() != n || p.iter().any(|v| !v.is_finite() || *v < 0.0) || (total - 1.0).abs() > 1e-12 {
                    fail(format!(
                        "custom initial distribution must be {n} non-negative entries summing to 1"
                    ))
                } else {
                    Ok(())
                }
            }
        }
    }

    fn initial_distribution(&self) -> Vec<f64> {
        let n = self.num_levels() * self.num_levels();
        match &self.initial {
            InitialState::Uniform => vec![1.0 / n as f64; n],
            InitialState::Point(b1, b2) => {
                let mut p = vec![0.0; n];
                p[self.state_index(*b1, *b2)] = 1.0;
                p
            }
            InitialState::Custom(p) => p.clone(),
        }
    }
}

/// Jain's fairness index of two transmissions; `(0, 0)` counts as fair.
pub fn jain_fairness(u1: usize, u2: usize) -> f64 {
    if u1 == 0 && u2 == 0 {
        return 1.0;
    }
    let (a, b) = (u1 as f64, u2 as f64);
    (a + b).powi(2) / (2.0 * (a * a + b * b))
}

/// One-slot rewards `[designer, agent 1, agent 2]` at buffers `(b1, b2)`
/// when the agents send `(u1, u2)`.
pub fn slot_rewards(params: &BroadcastParams, b1: usize, b2: usize, u1: usize, u2: usize) -> [f64; 3] {
    let success = u1 + u2 <= params.capacity;
    let collision = if success { 0.0 } else { params.kappa };
    let full = [b1 == params.buffer, b2 == params.buffer].map(f64::from);
    let designer = if success {
        (u1 + u2) as f64 / params.capacity as f64 + params.alpha * jain_fairness(u1, u2)
    } else {
        0.0
    } - collision
        - params.lambda[0] * (full[0] + full[1]);
    let delivered = |u: usize| if success { u as f64 } else { 0.0 };
    [
        designer,
        delivered(u1) - collision - params.lambda[1] * full[0],
        delivered(u2) - collision - params.lambda[2] * full[1],
    ]
}

/// Buffers after one slot given arrivals `(a1, a2)`.
pub fn next_buffers(
    params: &BroadcastParams,
    b: (usize, usize),
    u: (usize, usize),
    a: (usize, usize),
) -> (usize, usize) {
    let sent = if u.0 + u.1 <= params.capacity { u } else { (0, 0) };
    let step = |b: usize, s: usize, a: usize| (b.saturating_sub(s) + a).min(params.buffer);
    (step(b.0, sent.0, a.0), step(b.1, sent.1, a.1))
}

pub fn build_broadcast_game(params: &BroadcastParams) -> Result<GameSpec, BroadcastError> {
    params.validate()?;
    let levels = params.num_levels();
    let num_states = levels * levels;
    let horizon = params.horizon;
    let labels: Vec<String> = (0..num_states)
        .map(|x| {
            let (b1, b2) = params.buffers(x);
            format!("({b1},{b2})")
        })
        .collect();
    let layer: Vec<ActionCounts> = (0..num_states)
        .map(|x| {
            let (b1, b2) = params.buffers(x);
            ActionCounts::new(b1 + 1, b2 + 1)
        })
        .collect();
    let actions = vec![layer.clone(); horizon];

    // Noise atom n encodes arrivals (a1, a2) = (n / 2, n % 2).
    let [p1, p2] = params.arrival;
    let q = vec![(1.0 - p1) * (1.0 - p2), (1.0 - p1) * p2, p1 * (1.0 - p2), p1 * p2];
    let noise = NoiseModel {
        probabilities: vec![q; horizon],
        transition: |_stage: usize, x: usize, u1: usize, u2: usize, n: usize| {
            let (b1, b2) = next_buffers(params, params.buffers(x), (u1, u2), (n / 2, n % 2));
            params.state_index(b1, b2)
        },
    };
    let kernel = compile_kernel(&noise, &vec![num_states; horizon + 1], &actions)?;

    let mut tables: [Vec<Vec<f64>>; 3] = Default::default();
    for t in tables.iter_mut() {
        t.reserve(num_states);
    }
    for (x, counts) in layer.iter().enumerate() {
        let (b1, b2) = params.buffers(x);
        let mut rows: [Vec<f64>; 3] = Default::default();
        for k in 0..counts.joint_count() {
            let (u1, u2) = counts.joint_pair(k);
            for (row, r) in rows.iter_mut().zip(slot_rewards(params, b1, b2, u1, u2)) {
                row.push(r);
            }
        }
        for (t, row) in tables.iter_mut().zip(rows) {
            t.push(row);
        }
    }
    let [designer, agent1, agent2] = tables;
    Ok(GameSpec {
        horizon,
        states: vec![labels; horizon + 1],
        actions,
        kernel,
        rewards: RewardTables {
            designer: vec![designer; horizon],
            agent1: vec![agent1; horizon],
            agent2: vec![agent2; horizon],
        },
        initial: params.initial_distribution(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportEntry {
    pub u1: usize,
    pub u2: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticCaseReport {
    pub b1: usize,
    pub b2: usize,
    pub alpha: f64,
    /// Smallest fairness weight above which the two designers disagree.
    pub alpha_threshold: f64,
    pub condition_holds: bool,
    pub problem2_support: Vec<SupportEntry>,
    pub problem2_value: f64,
    pub ud_support: Vec<SupportEntry>,
    pub ud_value: f64,
    pub supports_differ: bool,
}

fn support_of(strategy: &Strategy, stage: usize, x: usize) -> Result<Vec<SupportEntry>, StrategyError> {
    Ok(strategy
        .dist(stage, x)?
        .support()
        .map(|((u1, u2), p)| SupportEntry { u1, u2, p })
        .collect())
}

/// One-slot comparison from known buffers `(b1, b2)` with `b2 < b1`.
/// Everything except the horizon and initial state comes from `base`.
pub fn run_static_case(
    base: &BroadcastParams,
    b1: usize,
    b2: usize,
    alpha: f64,
) -> Result<StaticCaseReport, BroadcastError> {
    if !(b2 < b1 && b1 < base.buffer && b1 + b2 <= base.capacity) {
        return Err(BroadcastError::StaticPrecondition { b1, b2 });
    }
    let params = BroadcastParams {
        horizon: 1,
        initial: InitialState::Point(b1, b2),
        alpha,
        ..base.clone()
    };
    let spec = build_broadcast_game(&params)?;
    let x = params.state_index(b1, b2);
    let designer = solve_designer(&spec, &DesignerOptions::default())?;
    let ud = solve_unconstrained(&spec);
    let threshold = (b1 - b2) as f64 / (params.capacity as f64 * (1.0 - jain_fairness(b1, b2)));
    let problem2_support = support_of(&designer.strategy, 0, x)?;
    let ud_support = support_of(&ud.strategy, 0, x)?;
    let pairs = |s: &[SupportEntry]| s.iter().map(|e| (e.u1, e.u2)).collect::<Vec<_>>();
    Ok(StaticCaseReport {
        b1,
        b2,
        alpha,
        alpha_threshold: threshold,
        condition_holds: alpha > threshold,
        supports_differ: pairs(&problem2_support) != pairs(&ud_support),
        problem2_value: designer.expected_value(&spec),
        problem2_support,
        ud_value: ud.designer_value,
        ud_support,
    })
}

/// Expected totals `[designer, agent 1, agent 2]` per designer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1 {
    pub ud: [f64; 3],
    pub cmdp: [f64; 3],
    pub problem2: [f64; 3],
}

impl Table1 {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("Metric,UD,CMDP,Problem 2\n");
        let names = [
            "Exp. Reward (Designer)",
            "Exp. Reward (Agent 1)",
            "Exp. Reward (Agent 2)",
        ];
        for (i, name) in names.iter().enumerate() {
            out.push_str(&format!(
                "{name},{:.4},{:.4},{:.4}\n",
                self.ud[i], self.cmdp[i], self.problem2[i]
            ));
        }
        out
    }
}

/// Everything computed for the comparison table, kept for probing.
#[derive(Debug, Clone)]
pub struct Table1Run {
    pub spec: GameSpec,
    pub table: Table1,
    pub designer: DesignerSolution,
    pub ud: Strategy,
    pub cmdp: Strategy,
}

/// Solves the incentive-constrained designer, feeds its agent values to the
/// constrained baseline as thresholds, and solves the unconstrained baseline.
pub fn reproduce_table1(params: &BroadcastParams, options: &DesignerOptions) -> Result<Table1Run, BroadcastError> {
    let spec = build_broadcast_game(params)?;
    let designer = solve_designer(&spec, options)?;
    let p2 = evaluate(&spec, &designer.strategy)?;
    let cmdp = solve_cmdp(&spec, p2.agent1, p2.agent2)?;
    let ud = solve_unconstrained(&spec);
    let ud_eval = evaluate(&spec, &ud.strategy)?;
    let table = Table1 {
        ud: [ud.designer_value, ud_eval.agent1, ud_eval.agent2],
        cmdp: [cmdp.designer, cmdp.agent1, cmdp.agent2],
        problem2: [p2.designer, p2.agent1, p2.agent2],
    };
    Ok(Table1Run {
        spec,
        table,
        designer,
        ud: ud.strategy,
        cmdp: cmdp.strategy,
    })
}

/// Mass classification of one stored distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    /// One-based decision epoch.
    pub t: usize,
    pub x: usize,
    pub support: Vec<SupportEntry>,
    /// Mass on equal transmissions.
    pub fair_mass: f64,
    /// Mass on unequal transmissions.
    pub asymmetric_mass: f64,
    /// Mass on pairs exceeding the channel capacity.
    pub over_capacity_mass: f64,
}

/// Classifies the support of the distribution at `(stage, x)`; action
/// indices are packet counts.
pub fn probe_strategy(strategy: &Strategy, stage: usize, x: usize, capacity: usize) -> Result<Probe, StrategyError> {
    let support = support_of(strategy, stage, x)?;
    let mass = |f: &dyn Fn(&SupportEntry) -> bool| support.iter().filter(|e| f(e)).map(|e| e.p).sum::<f64>();
    Ok(Probe {
        t: stage + 1,
        x,
        fair_mass: mass(&|e| e.u1 == e.u2),
        asymmetric_mass: mass(&|e| e.u1 != e.u2),
        over_capacity_mass: mass(&|e| e.u1 + e.u2 > capacity),
        support,
    })
}

/// [`probe_strategy`] at every stage for one state.
pub fn probe_trajectory(strategy: &Strategy, x: usize, capacity: usize) -> Result<Vec<Probe>, StrategyError> {
    (0..strategy.horizon())
        .map(|s| probe_strategy(strategy, s, x, capacity))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::validate_spec;
    use crate::strategy::{JointDist, StrategyKind};

    #[test]
    fn jain_index_values() {
        assert_eq!(jain_fairness(0, 0), 1.0);
        assert_eq!(jain_fairness(1, 1), 1.0);
        assert!((jain_fairness(2, 1) - 0.9).abs() < 1e-15);
        assert!((jain_fairness(3, 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn state_and_action_counts() {
        let params = BroadcastParams::dynamic(3);
        let spec = build_broadcast_game(&params).unwrap();
        assert_eq!(spec.num_states(0), 16);
        assert_eq!(spec.actions(0, params.state_index(2, 1)).joint_count(), 6);
        assert!(validate_spec(&spec).is_empty());
    }

    #[test]
    fn arrival_enumeration_from_empty_buffers() {
        let params = BroadcastParams::dynamic(3);
        let spec = build_broadcast_game(&params).unwrap();
        let row = spec.kernel.row(0, params.state_index(0, 0), 0);
        let expect = [((0, 0), 0.04), ((0, 1), 0.16), ((1, 0), 0.16), ((1, 1), 0.64)];
        assert_eq!(row.len(), 4);
        for ((b1, b2), p) in expect {
            let y = params.state_index(b1, b2);
            let got = row.iter().find(|(s, _)| *s == y).unwrap().1;
            assert!((got - p).abs() < 1e-12, "({b1},{b2}): {got}");
        }
    }

    #[test]
    fn designer_reward_at_fair_success() {
        let params = BroadcastParams::dynamic(3);
        let r = slot_rewards(&params, 2, 1, 2, 1);
        assert!((r[0] - 4.6).abs() < 1e-12);
        assert_eq!(r[1], 2.0);
        assert_eq!(r[2], 1.0);
    }

    #[test]
    fn collision_penalty_for_agents() {
        let params = BroadcastParams::dynamic(1);
        let r = slot_rewards(&params, 2, 2, 1, 1);
        assert!((r[1] + 0.1).abs() < 1e-15);
        assert!((r[2] + 0.1).abs() < 1e-15);
        let full = slot_rewards(&params, 3, 0, 1, 1);
        assert!((full[1] + 0.2).abs() < 1e-15);
        assert!((full[0] + 0.2).abs() < 1e-15);
    }

    #[test]
    fn collisions_freeze_buffers() {
        let params = BroadcastParams::dynamic(1);
        assert_eq!(next_buffers(&params, (2, 2), (1, 1), (0, 1)), (2, 3));
        assert_eq!(next_buffers(&params, (2, 2), (1, 0), (1, 1)), (2, 3));
        assert_eq!(next_buffers(&params, (3, 3), (0, 0), (1, 1)), (3, 3));
    }

    #[test]
    fn probe_classifies_mass() {
        let counts = ActionCounts::new(3, 3);
        let mut probs = vec![0.0; 9];
        probs[counts.joint_index(1, 1)] = 0.98;
        probs[counts.joint_index(1, 2)] = 0.01;
        probs[counts.joint_index(2, 1)] = 0.01;
        let mixed = Strategy {
            kind: StrategyKind::Messaging,
            stages: vec![vec![Some(JointDist::new(counts, probs))]],
        };
        let p = probe_strategy(&mixed, 0, 0, 3).unwrap();
        assert!((p.asymmetric_mass - 0.02).abs() < 1e-12);
        assert!((p.fair_mass - 0.98).abs() < 1e-12);

        let point = Strategy {
            kind: StrategyKind::Messaging,
            stages: vec![vec![Some(JointDist::point(counts, 1, 1))]],
        };
        let p3 = probe_strategy(&point, 0, 0, 3).unwrap();
        assert_eq!((p3.fair_mass, p3.over_capacity_mass), (1.0, 0.0));
        let p1 = probe_strategy(&point, 0, 0, 1).unwrap();
        assert_eq!(p1.over_capacity_mass, 1.0);
    }

    #[test]
    fn static_precondition_is_enforced() {
        let base = BroadcastParams::dynamic(3);
        assert!(matches!(
            run_static_case(&base, 1, 2, 4.0),
            Err(BroadcastError::StaticPrecondition { .. })
        ));
        assert!(matches!(
            run_static_case(&base, 3, 0, 4.0),
            Err(BroadcastError::StaticPrecondition { .. })
        ));
    }

    #[test]
    fn invalid_params_are_rejected() {
        let mut p = BroadcastParams::dynamic(3);
        p.arrival = [1.2, 0.5];
        assert!(matches!(build_broadcast_game(&p), Err(BroadcastError::Params(_))));
        let mut q = BroadcastParams::dynamic(0);
        q.capacity = 0;
        assert!(q.validate().is_err());
    }
}
