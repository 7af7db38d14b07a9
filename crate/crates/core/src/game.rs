//! Tabular two-agent finite-horizon Markov games.
//!
//! Time is a zero-based *stage* index internally: stage `s` is decision epoch
//! `t = s + 1`. State layers run over stages `0..=horizon`; the last layer only
//! exists as a target of the final transition. Joint actions at a state are
//! flattened row-major, `k = u1 * n2 + u2`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for probability vectors summing to one.
pub const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("transition at t={t}, x={x}, u=({u1},{u2}), noise atom {n} leads to state {target}, but stage {next} has {num_states} states", next = t + 1)]
    TransitionOutOfRange {
        t: usize,
        x: usize,
        u1: usize,
        u2: usize,
        n: usize,
        target: usize,
        num_states: usize,
    },
    #[error("noise model covers {got} stages, expected {expected}")]
    NoiseStages { expected: usize, got: usize },
    #[error("invalid game specification:\n{}", format_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

/// The two agents. The designer is not an `Agent`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Agent {
    One,
    Two,
}

impl Agent {
    pub const BOTH: [Agent; 2] = [Agent::One, Agent::Two];

    pub fn other(self) -> Agent {
        match self {
            Agent::One => Agent::Two,
            Agent::Two => Agent::One,
        }
    }

    /// 1 or 2.
    pub fn number(self) -> usize {
        match self {
            Agent::One => 1,
            Agent::Two => 2,
        }
    }
}

impl fmt::Display for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "agent {}", self.number())
    }
}

/// Sizes of the two action sets at one state. Actions are `0..agent1` and
/// `0..agent2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionCounts {
    pub agent1: usize,
    pub agent2: usize,
}

impl ActionCounts {
    pub fn new(agent1: usize, agent2: usize) -> Self {
        Self { agent1, agent2 }
    }

    pub fn of(self, agent: Agent) -> usize {
        match agent {
            Agent::One => self.agent1,
            Agent::Two => self.agent2,
        }
    }

    pub fn joint_count(self) -> usize {
        self.agent1 * self.agent2
    }

    pub fn joint_index(self, u1: usize, u2: usize) -> usize {
        debug_assert!(u1 < self.agent1 && u2 < self.agent2);
        u1 * self.agent2 + u2
    }

    pub fn joint_pair(self, k: usize) -> (usize, usize) {
        (k / self.agent2, k % self.agent2)
    }

    /// Joint index of the pair where `agent` plays `own` and the other agent
    /// plays `other`.
    pub fn joint_for(self, agent: Agent, own: usize, other: usize) -> usize {
        match agent {
            Agent::One => self.joint_index(own, other),
            Agent::Two => self.joint_index(other, own),
        }
    }
}

/// Sparse next-state distribution, sorted by state index.
pub type KernelRow = Vec<(usize, f64)>;

/// `rows[stage][x][k]` is the next-state distribution for joint action `k`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransitionKernel {
    pub rows: Vec<Vec<Vec<KernelRow>>>,
}

impl TransitionKernel {
    pub fn row(&self, stage: usize, x: usize, k: usize) -> &[(usize, f64)] {
        &self.rows[stage][x][k]
    }

    /// `sum_x' P(x' | x, k) * values[x']`.
    pub fn expect(&self, stage: usize, x: usize, k: usize, values: &[f64]) -> f64 {
        self.row(stage, x, k)
            .iter()
            .filter(|&&(_, p)| p != 0.0)
            .map(|&(y, p)| p * values[y])
            .sum()
    }
}

/// Functional dynamics `x' = f_t(x, u1, u2, n)` with finite noise support.
#[derive(Clone)]
pub struct NoiseModel<F> {
    /// Per-stage noise distribution `Q_t`.
    pub probabilities: Vec<Vec<f64>>,
    /// `(stage, x, u1, u2, n) -> x'`.
    pub transition: F,
}

impl<F> fmt::Debug for NoiseModel<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NoiseModel")
            .field("probabilities", &self.probabilities)
            .finish_non_exhaustive()
    }
}

/// Per-stage reward tables indexed `[stage][x][k]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RewardTables {
    pub designer: Vec<Vec<Vec<f64>>>,
    pub agent1: Vec<Vec<Vec<f64>>>,
    pub agent2: Vec<Vec<Vec<f64>>>,
}

impl RewardTables {
    pub fn designer(&self, stage: usize, x: usize, k: usize) -> f64 {
        self.designer[stage][x][k]
    }

    pub fn agent(&self, agent: Agent, stage: usize, x: usize, k: usize) -> f64 {
        self.agent_table(agent)[stage][x][k]
    }

    pub fn agent_table(&self, agent: Agent) -> &Vec<Vec<Vec<f64>>> {
        match agent {
            Agent::One => &self.agent1,
            Agent::Two => &self.agent2,
        }
    }

    pub fn tables(&self) -> [(&'static str, &Vec<Vec<Vec<f64>>>); 3] {
        [
            ("designer", &self.designer),
            ("agent1", &self.agent1),
            ("agent2", &self.agent2),
        ]
    }
}

/// Complete tabular description of a two-agent finite-horizon Markov game.
///
/// Fields are public so that malformed specs can be represented and
/// diagnosed; solvers assume a spec that passes [`validate_spec`].
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    pub horizon: usize,
    /// `horizon + 1` layers of state labels.
    pub states: Vec<Vec<String>>,
    /// `horizon` layers of per-state action counts.
    pub actions: Vec<Vec<ActionCounts>>,
    pub kernel: TransitionKernel,
    pub rewards: RewardTables,
    /// Distribution over stage-0 states.
    pub initial: Vec<f64>,
}

impl GameSpec {
    pub fn num_states(&self, stage: usize) -> usize {
        self.states[stage].len()
    }

    pub fn actions(&self, stage: usize, x: usize) -> ActionCounts {
        self.actions[stage][x]
    }

    pub fn state_label(&self, stage: usize, x: usize) -> &str {
        &self.states[stage][x]
    }

    /// Looks up a state index by label.
    pub fn state_index(&self, stage: usize, label: &str) -> Option<usize> {
        self.states[stage].iter().position(|l| l == label)
    }

    /// Returns the spec if it is well formed, otherwise every diagnostic.
    pub fn validated(self) -> Result<Self, GameError> {
        let diags = validate_spec(&self);
        if diags.is_empty() {
            Ok(self)
        } else {
            Err(GameError::Invalid(diags))
        }
    }

    /// Total number of (stage, state) pairs with decisions.
    pub fn decision_nodes(&self) -> usize {
        (0..self.horizon).map(|s| self.num_states(s)).sum()
    }
}

/// Location-tagged problem found by [`validate_spec`]. Times are reported
/// one-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub t: Option<usize>,
    pub x: Option<usize>,
    pub u: Option<(usize, usize)>,
    pub message: String,
}

impl Diagnostic {
    fn new(stage: Option<usize>, x: Option<usize>, u: Option<(usize, usize)>, message: String) -> Self {
        Self {
            t: stage.map(|s| s + 1),
            x,
            u,
            message,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(t) = self.t {
            parts.push(format!("t={t}"));
        }
        if let Some(x) = self.x {
            parts.push(format!("x={x}"));
        }
        if let Some((u1, u2)) = self.u {
            parts.push(format!("u=({u1},{u2})"));
        }
        if parts.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", parts.join(" "), self.message)
        }
    }
}

/// Compiles functional dynamics into a tabular kernel:
/// `P_t(x' | x, u) = sum over n with f_t(x, u, n) = x' of Q_t(n)`.
///
/// `state_counts` has `horizon + 1` entries; `actions` has `horizon` layers.
pub fn compile_kernel<F>(
    noise: &NoiseModel<F>,
    state_counts: &[usize],
    actions: &[Vec<ActionCounts>],
) -> Result<TransitionKernel, GameError>
where
    F: Fn(usize, usize, usize, usize, usize) -> usize,
{
    let horizon = actions.len();
    if noise.probabilities.len() != horizon {
        return Err(GameError::NoiseStages {
            expected: horizon,
            got: noise.probabilities.len(),
        });
    }
    let mut rows = Vec::with_capacity(horizon);
    for (stage, layer) in actions.iter().enumerate() {
        let q = &noise.probabilities[stage];
        let num_next = state_counts[stage + 1];
        let mut stage_rows = Vec::with_capacity(layer.len());
        for (x, &counts) in layer.iter().enumerate() {
            let mut per_state = Vec::with_capacity(counts.joint_count());
            for k in 0..counts.joint_count() {
                let (u1, u2) = counts.joint_pair(k);
                let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
                for (n, &p) in q.iter().enumerate() {
                    let target = (noise.transition)(stage, x, u1, u2, n);
                    if target >= num_next {
                        return Err(GameError::TransitionOutOfRange {
                            t: stage + 1,
                            x,
                            u1,
                            u2,
                            n,
                            target,
                            num_states: num_next,
                        });
                    }
                    if p > 0.0 {
                        *merged.entry(target).or_insert(0.0) += p;
                    }
                }
                per_state.push(merged.into_iter().collect());
            }
            stage_rows.push(per_state);
        }
        rows.push(stage_rows);
    }
    Ok(TransitionKernel { rows })
}

/// Checks every structural and probabilistic invariant of `spec`, returning
/// one diagnostic per violation (empty when the spec is well formed).
pub fn validate_spec(spec: &GameSpec) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |s: Option<usize>, x: Option<usize>, u: Option<(usize, usize)>, msg: String| {
        out.push(Diagnostic::new(s, x, u, msg));
    };
    let horizon = spec.horizon;
    if horizon == 0 {
        push(None, None, None, "horizon must be positive".into());
        return out;
    }
    if spec.states.len() != horizon + 1 {
        push(
            None,
            None,
            None,
            format!("expected {} state layers, found {}", horizon + 1, spec.states.len()),
        );
        return out;
    }
    if spec.actions.len() != horizon {
        push(
            None,
            None,
            None,
            format!("expected {horizon} action layers, found {}", spec.actions.len()),
        );
        return out;
    }
    for (stage, layer) in spec.states.iter().enumerate() {
        if layer.is_empty() {
            push(Some(stage), None, None, "state space is empty".into());
        }
        let unique: BTreeSet<&String> = layer.iter().collect();
        if unique.len() != layer.len() {
            push(Some(stage), None, None, "duplicate state labels".into());
        }
    }

    // Initial distribution.
    if spec.initial.len() != spec.states[0].len() {
        push(
            None,
            None,
            None,
            format!(
                "initial distribution has {} entries, expected {}",
                spec.initial.len(),
                spec.states[0].len()
            ),
        );
    } else {
        check_distribution(&spec.initial, |msg| {
            push(Some(0), None, None, format!("initial distribution {msg}"))
        });
    }

    let kernel_ok = spec.kernel.rows.len() == horizon;
    if !kernel_ok {
        push(
            None,
            None,
            None,
            format!("kernel has {} stages, expected {horizon}", spec.kernel.rows.len()),
        );
    }
    let mut reward_ok = [true; 3];
    for (i, (name, table)) in spec.rewards.tables().into_iter().enumerate() {
        if table.len() != horizon {
            push(
                None,
                None,
                None,
                format!("{name} rewards have {} stages, expected {horizon}", table.len()),
            );
            reward_ok[i] = false;
        }
    }

    for stage in 0..horizon {
        let layer = &spec.actions[stage];
        let n_states = spec.states[stage].len();
        let n_next = spec.states[stage + 1].len();
        if layer.len() != n_states {
            push(
                Some(stage),
                None,
                None,
                format!("action sets given for {} states, expected {n_states}", layer.len()),
            );
            continue;
        }
        for (x, counts) in layer.iter().enumerate() {
            if counts.agent1 == 0 || counts.agent2 == 0 {
                push(
                    Some(stage),
                    Some(x),
                    None,
                    format!(
                        "empty action set at state {:?} ({} x {})",
                        spec.states[stage][x], counts.agent1, counts.agent2
                    ),
                );
            }
        }
        if kernel_ok {
            let krows = &spec.kernel.rows[stage];
            if krows.len() != n_states {
                push(
                    Some(stage),
                    None,
                    None,
                    format!("kernel covers {} states, expected {n_states}", krows.len()),
                );
            } else {
                for (x, counts) in layer.iter().enumerate() {
                    if krows[x].len() != counts.joint_count() {
                        push(
                            Some(stage),
                            Some(x),
                            None,
                            format!(
                                "kernel has {} joint-action rows, expected {}",
                                krows[x].len(),
                                counts.joint_count()
                            ),
                        );
                        continue;
                    }
                    for (k, row) in krows[x].iter().enumerate() {
                        let u = Some(counts.joint_pair(k));
                        let mut total = 0.0;
                        let mut bad = false;
                        for &(y, p) in row {
                            if y >= n_next {
                                push(
                                    Some(stage),
                                    Some(x),
                                    u,
                                    format!("kernel row targets state {y}, stage has {n_next}"),
                                );
                                bad = true;
                            }
                            if !p.is_finite() || p < 0.0 {
                                push(
                                    Some(stage),
                                    Some(x),
                                    u,
                                    format!("kernel row has invalid probability {p}"),
                                );
                                bad = true;
                            }
                            total += p;
                        }
                        if !bad && (total - 1.0).abs() > PROB_SUM_TOL {
                            push(Some(stage), Some(x), u, format!("kernel row sums to {total}"));
                        }
                    }
                }
            }
        }
        for (i, (name, table)) in spec.rewards.tables().into_iter().enumerate() {
            if !reward_ok[i] {
                continue;
            }
            let rt = &table[stage];
            if rt.len() != n_states {
                push(
                    Some(stage),
                    None,
                    None,
                    format!("{name} rewards cover {} states, expected {n_states}", rt.len()),
                );
                continue;
            }
            for (x, counts) in layer.iter().enumerate() {
                if rt[x].len() != counts.joint_count() {
                    push(
                        Some(stage),
                        Some(x),
                        None,
                        format!(
                            "{name} rewards have {} entries, expected {}",
                            rt[x].len(),
                            counts.joint_count()
                        ),
                    );
                    continue;
                }
                for (k, r) in rt[x].iter().enumerate() {
                    if !r.is_finite() {
                        push(
                            Some(stage),
                            Some(x),
                            Some(counts.joint_pair(k)),
                            format!("{name} reward is {r}"),
                        );
                    }
                }
            }
        }
    }
    out
}

fn check_distribution(p: &[f64], mut report: impl FnMut(String)) {
    if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
        report(format!("has invalid entry {v}"));
        return;
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > PROB_SUM_TOL {
        report(format!("sums to {total}"));
    }
}

/// Forward closure of the initial support under every joint action.
/// Returns `horizon + 1` sorted layers.
pub fn reachable_states(spec: &GameSpec) -> Vec<Vec<usize>> {
    let mut layers = Vec::with_capacity(spec.horizon + 1);
    let mut current: BTreeSet<usize> = spec
        .initial
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(x, _)| x)
        .collect();
    for stage in 0..spec.horizon {
        let mut next = BTreeSet::new();
        for &x in &current {
            for row in &spec.kernel.rows[stage][x] {
                next.extend(row.iter().filter(|(_, p)| *p > 0.0).map(|(y, _)| *y));
            }
        }
        layers.push(current.into_iter().collect());
        current = next;
    }
    layers.push(current.into_iter().collect());
    layers
}

/// Boolean mask form of [`reachable_states`].
pub fn reachable_mask(spec: &GameSpec) -> Vec<Vec<bool>> {
    reachable_states(spec)
        .into_iter()
        .enumerate()
        .map(|(stage, layer)| {
            let mut mask = vec![false; spec.num_states(stage)];
            for x in layer {
                mask[x] = true;
            }
            mask
        })
        .collect()
}
