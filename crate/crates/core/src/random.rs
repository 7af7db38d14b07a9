//! Seeded random games and strategies for property tests and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::game::{ActionCounts, GameSpec, RewardTables, TransitionKernel};
use crate::strategy::{JointDist, Strategy, StrategyKind};

/// Shape of a random game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameShape {
    pub horizon: usize,
    pub max_states: usize,
    pub max_actions: usize,
    /// Rewards are uniform on `[-reward_scale, reward_scale]`.
    pub reward_scale: f64,
}

fn random_simplex<R: Rng>(rng: &mut R, n: usize, keep: usize) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut p = vec![0.0; n];
    for &i in idx.iter().take(keep.clamp(1, n)) {
        p[i] = -rng.gen::<f64>().max(1e-12).ln();
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

/// Random game with a fixed state count, per-state random action counts
/// (independently `1..=max_actions` per agent), sparse random kernels and
/// uniform rewards.
pub fn random_game<R: Rng>(rng: &mut R, shape: GameShape) -> GameSpec {
    let num_states = rng.gen_range(1..=shape.max_states);
    let horizon = shape.horizon;
    let actions: Vec<Vec<ActionCounts>> = (0..horizon)
        .map(|_| {
            (0..num_states)
                .map(|_| {
                    ActionCounts::new(
                        rng.gen_range(1..=shape.max_actions),
                        rng.gen_range(1..=shape.max_actions),
                    )
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(horizon);
    let mut tables: [Vec<Vec<Vec<f64>>>; 3] = Default::default();
    for layer in &actions {
        let mut stage_rows = Vec::with_capacity(num_states);
        let mut stage_tables: [Vec<Vec<f64>>; 3] = Default::default();
        for counts in layer {
            let n = counts.joint_count();
            stage_rows.push(
                (0..n)
                    .map(|_| {
                        let keep = rng.gen_range(1..=num_states);
                        random_simplex(rng, num_states, keep)
                            .into_iter()
                            .enumerate()
                            .filter(|(_, p)| *p > 0.0)
                            .collect()
                    })
                    .collect(),
            );
            for t in stage_tables.iter_mut() {
                t.push(
                    (0..n)
                        .map(|_| rng.gen_range(-shape.reward_scale..=shape.reward_scale))
                        .collect(),
                );
            }
        }
        rows.push(stage_rows);
        for (acc, t) in tables.iter_mut().zip(stage_tables) {
            acc.push(t);
        }
    }
    let keep = rng.gen_range(1..=num_states);
    let initial = random_simplex(rng, num_states, keep);
    let [designer, agent1, agent2] = tables;
    GameSpec {
        horizon,
        states: vec![(0..num_states).map(|x| format!("s{x}")).collect(); horizon + 1],
        actions,
        kernel: TransitionKernel { rows },
        rewards: RewardTables {
            designer,
            agent1,
            agent2,
        },
        initial,
    }
}

/// One-state, one-stage game with the given action counts.
pub fn random_stage_game<R: Rng>(rng: &mut R, n1: usize, n2: usize, reward_scale: f64) -> GameSpec {
    let counts = ActionCounts::new(n1, n2);
    let n = counts.joint_count();
    let mut table = || {
        vec![vec![(0..n)
            .map(|_| rng.gen_range(-reward_scale..=reward_scale))
            .collect()]]
    };
    let (designer, agent1, agent2) = (table(), table(), table());
    GameSpec {
        horizon: 1,
        states: vec![vec!["s".into()]; 2],
        actions: vec![vec![counts]],
        kernel: TransitionKernel {
            rows: vec![vec![vec![vec![(0, 1.0)]; n]]],
        },
        rewards: RewardTables {
            designer,
            agent1,
            agent2,
        },
        initial: vec![1.0],
    }
}

/// Random Markov strategy; each distribution keeps a random number of
/// joint actions in its support, so point masses are common.
pub fn random_strategy<R: Rng>(rng: &mut R, spec: &GameSpec) -> Strategy {
    let stages = (0..spec.horizon)
        .map(|stage| {
            (0..spec.num_states(stage))
                .map(|x| {
                    let counts = spec.actions(stage, x);
                    let n = counts.joint_count();
                    let keep = rng.gen_range(1..=n);
                    Some(JointDist::new(counts, random_simplex(rng, n, keep)))
                })
                .collect()
        })
        .collect();
    Strategy {
        kind: StrategyKind::Messaging,
        stages,
    }
}
