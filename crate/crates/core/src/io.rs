//! JSON file formats for game specs and strategies. Times in files are
//! one-based; see `docs/formats.md` for the field reference.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{validate_spec, ActionCounts, Diagnostic, GameSpec, KernelRow, RewardTables, TransitionKernel};
use crate::strategy::{JointDist, Strategy, StrategyKind, ValueTables};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid game specification:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
    #[error("strategy file: {0}")]
    Strategy(String),
}

pub fn read_file(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), FormatError> {
    fs::write(path, contents).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reward tables by stage layer, then state, then flattened joint action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardsFile {
    pub designer: Vec<Vec<Vec<f64>>>,
    pub agent1: Vec<Vec<Vec<f64>>>,
    pub agent2: Vec<Vec<Vec<f64>>>,
}

/// On-disk game specification. Every time-indexed section holds either a
/// single layer (time-invariant) or one layer per stage (`horizon + 1` for
/// `states`, `horizon` for the rest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpecFile {
    pub horizon: usize,
    pub states: Vec<Vec<String>>,
    /// `[n1, n2]` per state.
    pub actions: Vec<Vec<[usize; 2]>>,
    /// Per state, per joint action `k = u1 * n2 + u2`: `[[next, p], ...]`.
    pub kernel: Vec<Vec<Vec<KernelRow>>>,
    pub rewards: RewardsFile,
    pub initial: Vec<f64>,
}

fn expand<T: Clone>(layers: Vec<T>, wanted: usize) -> Vec<T> {
    if layers.len() == 1 && wanted > 1 {
        vec![layers[0].clone(); wanted]
    } else {
        layers
    }
}

fn compress<T: Clone + PartialEq>(layers: &[T]) -> Vec<T> {
    match layers.first() {
        Some(first) if layers.iter().all(|l| l == first) => vec![first.clone()],
        _ => layers.to_vec(),
    }
}

impl GameSpecFile {
    /// Expands shared layers without validating.
    pub fn into_spec(self) -> GameSpec {
        let h = self.horizon;
        GameSpec {
            horizon: h,
            states: expand(self.states, h + 1),
            actions: expand(self.actions, h)
                .into_iter()
                .map(|layer| layer.into_iter().map(|[a, b]| ActionCounts::new(a, b)).collect())
                .collect(),
            kernel: TransitionKernel {
                rows: expand(self.kernel, h),
            },
            rewards: RewardTables {
                designer: expand(self.rewards.designer, h),
                agent1: expand(self.rewards.agent1, h),
                agent2: expand(self.rewards.agent2, h),
            },
            initial: self.initial,
        }
    }

    pub fn from_spec(spec: &GameSpec) -> Self {
        let actions: Vec<Vec<[usize; 2]>> = spec
            .actions
            .iter()
            .map(|layer| layer.iter().map(|c| [c.agent1, c.agent2]).collect())
            .collect();
        Self {
            horizon: spec.horizon,
            states: compress(&spec.states),
            actions: compress(&actions),
            kernel: compress(&spec.kernel.rows),
            rewards: RewardsFile {
                designer: compress(&spec.rewards.designer),
                agent1: compress(&spec.rewards.agent1),
                agent2: compress(&spec.rewards.agent2),
            },
            initial: spec.initial.clone(),
        }
    }
}

/// Parses and validates a game specification.
pub fn parse_spec(text: &str) -> Result<GameSpec, FormatError> {
    let file: GameSpecFile = serde_json::from_str(text)?;
    let spec = file.into_spec();
    let diags = validate_spec(&spec);
    if diags.is_empty() {
        Ok(spec)
    } else {
        Err(FormatError::Invalid(diags))
    }
}

pub fn load_spec(path: &Path) -> Result<GameSpec, FormatError> {
    parse_spec(&read_file(path)?)
}

pub fn spec_to_json(spec: &GameSpec) -> String {
    serde_json::to_string_pretty(&GameSpecFile::from_spec(spec)).expect("spec serializes")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MessageProb {
    pub m1: usize,
    pub m2: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateEntry {
    pub x: usize,
    /// `[n1, n2]`.
    pub actions: [usize; 2],
    pub dist: Vec<MessageProb>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageEntry {
    pub t: usize,
    pub states: Vec<StateEntry>,
}

/// Value tables with unsolved states as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValuesFile {
    pub designer: Vec<Vec<Option<f64>>>,
    pub agent1: Vec<Vec<Option<f64>>>,
    pub agent2: Vec<Vec<Option<f64>>>,
}

impl ValuesFile {
    pub fn from_tables(values: &ValueTables) -> Self {
        let conv = |t: &Vec<Vec<f64>>| {
            t.iter()
                .map(|l| l.iter().map(|v| v.is_finite().then_some(*v)).collect())
                .collect()
        };
        Self {
            designer: conv(&values.designer),
            agent1: conv(&values.agent1),
            agent2: conv(&values.agent2),
        }
    }

    pub fn to_tables(&self) -> ValueTables {
        let conv = |t: &Vec<Vec<Option<f64>>>| {
            t.iter()
                .map(|l| l.iter().map(|v| v.unwrap_or(f64::NAN)).collect())
                .collect()
        };
        ValueTables {
            designer: conv(&self.designer),
            agent1: conv(&self.agent1),
            agent2: conv(&self.agent2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyFile {
    pub kind: StrategyKind,
    pub horizon: usize,
    pub stages: Vec<StageEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<ValuesFile>,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl StrategyFile {
    pub fn new(
        strategy: &Strategy,
        values: Option<&ValueTables>,
        metadata: BTreeMap<String, serde_json::Value>,
    ) -> Self {
        let stages = strategy
            .stages
            .iter()
            .enumerate()
            .map(|(stage, layer)| StageEntry {
                t: stage + 1,
                states: layer
                    .iter()
                    .enumerate()
                    .filter_map(|(x, d)| {
                        let d = d.as_ref()?;
                        Some(StateEntry {
                            x,
                            actions: [d.counts.agent1, d.counts.agent2],
                            dist: d
                                .probs
                                .iter()
                                .enumerate()
                                .filter(|(_, &p)| p > 0.0)
                                .map(|(k, &p)| {
                                    let (m1, m2) = d.counts.joint_pair(k);
                                    MessageProb { m1, m2, p }
                                })
                                .collect(),
                        })
                    })
                    .collect(),
            })
            .collect();
        Self {
            kind: strategy.kind,
            horizon: strategy.horizon(),
            stages,
            values: values.map(ValuesFile::from_tables),
            metadata,
        }
    }

    /// Rebuilds the strategy against `spec`'s state spaces. States absent
    /// from the file stay unset.
    pub fn to_strategy(&self, spec: &GameSpec) -> Result<Strategy, FormatError> {
        let fail = |m: String| Err(FormatError::Strategy(m));
        if self.horizon != spec.horizon || self.stages.len() != spec.horizon {
            return fail(format!(
                "horizon {} ({} stages) does not match spec horizon {}",
                self.horizon,
                self.stages.len(),
                spec.horizon
            ));
        }
        let mut stages: Vec<Vec<Option<JointDist>>> =
            (0..spec.horizon).map(|s| vec![None; spec.num_states(s)]).collect();
        for entry in &self.stages {
            if entry.t == 0 || entry.t > spec.horizon {
                return fail(format!("stage t={} outside 1..={}", entry.t, spec.horizon));
            }
            let stage = entry.t - 1;
            for st in &entry.states {
                if st.x >= spec.num_states(stage) {
                    return fail(format!("t={}: state {} out of range", entry.t, st.x));
                }
                let counts = ActionCounts::new(st.actions[0], st.actions[1]);
                if counts != spec.actions(stage, st.x) {
                    return fail(format!(
                        "t={}, x={}: action sets {:?} differ from spec {:?}",
                        entry.t,
                        st.x,
                        st.actions,
                        [spec.actions(stage, st.x).agent1, spec.actions(stage, st.x).agent2]
                    ));
                }
                let mut probs = vec![0.0; counts.joint_count()];
                for mp in &st.dist {
                    if mp.m1 >= counts.agent1 || mp.m2 >= counts.agent2 {
                        return fail(format!(
                            "t={}, x={}: message ({}, {}) is not a legal pair",
                            entry.t, st.x, mp.m1, mp.m2
                        ));
                    }
                    probs[counts.joint_index(mp.m1, mp.m2)] += mp.p;
                }
                let dist = JointDist::new(counts, probs);
                if let Err(m) = dist.check() {
                    return fail(format!("t={}, x={}: {m}", entry.t, st.x));
                }
                stages[stage][st.x] = Some(dist);
            }
        }
        Ok(Strategy {
            kind: self.kind,
            stages,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("strategy serializes")
    }
}

pub fn parse_strategy(text: &str, spec: &GameSpec) -> Result<(Strategy, StrategyFile), FormatError> {
    let file: StrategyFile = serde_json::from_str(text)?;
    let strategy = file.to_strategy(spec)?;
    Ok((strategy, file))
}
