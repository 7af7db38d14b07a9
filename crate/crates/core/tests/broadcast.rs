use obedience::broadcast::{build_broadcast_game, probe_trajectory, reproduce_table1, BroadcastParams, InitialState};
use obedience::designer::{solve_designer, DesignerOptions};
use obedience::game::{compile_kernel, validate_spec, ActionCounts, NoiseModel};
use proptest::prelude::*;

fn grid() -> Vec<BroadcastParams> {
    let mut out = Vec::new();
    for buffer in 1..=3 {
        for capacity in 1..=4 {
            for p in [0.0, 0.3, 1.0] {
                let mut params = BroadcastParams::dynamic(capacity);
                params.buffer = buffer;
                params.arrival = [p, 1.0 - p];
                params.horizon = 3;
                out.push(params);
            }
        }
    }
    out
}

#[test]
fn parameter_grid_is_valid_and_stays_in_range() {
    for params in grid() {
        let spec = build_broadcast_game(&params).unwrap();
        assert!(validate_spec(&spec).is_empty(), "{params:?}");
        let levels = params.buffer + 1;
        for stage_rows in &spec.kernel.rows {
            for rows in stage_rows {
                for row in rows {
                    assert!(row.iter().all(|&(next, _)| next < levels * levels));
                    assert!((row.iter().map(|r| r.1).sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
        // Each agent can send at most what is buffered.
        for x in 0..levels * levels {
            let (b1, b2) = params.buffers(x);
            assert_eq!(spec.actions(0, x), ActionCounts::new(b1 + 1, b2 + 1));
        }
    }
}

#[test]
fn harsh_collisions_vanish_with_ample_capacity() {
    for buffer in 1..=2 {
        let mut params = BroadcastParams::dynamic(2 * buffer);
        params.buffer = buffer;
        params.kappa = 1e3;
        params.horizon = 4;
        let spec = build_broadcast_game(&params).unwrap();
        let sol = solve_designer(&spec, &DesignerOptions::default()).unwrap();
        for d in sol.strategy.stages.iter().flatten().flatten() {
            for ((u1, u2), _) in d.support() {
                assert!(u1 + u2 <= params.capacity);
            }
        }
    }
}

#[test]
fn table1_csv_layout() {
    let run = reproduce_table1(&BroadcastParams::dynamic(3), &DesignerOptions::default()).unwrap();
    let csv = run.table.to_csv();
    assert_eq!(
        csv,
        "Metric,UD,CMDP,Problem 2\n\
         Exp. Reward (Designer),44.8288,43.5472,43.3264\n\
         Exp. Reward (Agent 1),8.0065,8.6653,8.6653\n\
         Exp. Reward (Agent 2),8.0082,8.6653,8.6653\n"
    );
}

#[test]
fn asymmetric_mass_trajectory_at_two_two() {
    let params = BroadcastParams::dynamic(3);
    let spec = build_broadcast_game(&params).unwrap();
    let sol = solve_designer(&spec, &DesignerOptions::default()).unwrap();
    let probes = probe_trajectory(&sol.strategy, params.state_index(2, 2), 3).unwrap();
    assert_eq!(probes.len(), 10);
    assert_eq!(probes[0].t, 1);
    for p in &probes {
        assert!((p.fair_mass + p.asymmetric_mass - 1.0).abs() < 1e-9);
    }
}

#[test]
fn custom_initial_distribution_must_be_normalized() {
    let mut params = BroadcastParams::dynamic(3);
    params.initial = InitialState::Custom(vec![0.5; 16]);
    assert!(build_broadcast_game(&params).is_err());
}

proptest! {
    #[test]
    fn compiled_kernel_rows_sum_to_one(
        weights in prop::collection::vec(0.01f64..1.0, 1..5),
        states in 1usize..5,
        n1 in 1usize..3,
        n2 in 1usize..3,
        salt in 0usize..100,
    ) {
        let total: f64 = weights.iter().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let noise = NoiseModel {
            probabilities: vec![probs.clone(); 2],
            transition: move |stage: usize, x: usize, u1: usize, u2: usize, n: usize| {
                (stage + x * 7 + u1 * 3 + u2 + n * salt) % states
            },
        };
        let actions = vec![vec![ActionCounts::new(n1, n2); states]; 2];
        let kernel = compile_kernel(&noise, &[states; 3], &actions).unwrap();
        for stage_rows in &kernel.rows {
            for rows in stage_rows {
                for row in rows {
                    prop_assert!((row.iter().map(|r| r.1).sum::<f64>() - 1.0).abs() < 1e-12);
                    prop_assert!(row.iter().all(|&(next, p)| next < states && p > 0.0));
                }
            }
        }
    }
}
