//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use obedience::baselines::{solve_cmdp, solve_unconstrained};
use obedience::broadcast::{build_broadcast_game, probe_strategy, reproduce_table1, run_static_case, BroadcastParams};
use obedience::designer::{solve_designer, DesignerOptions, DesignerSolution};
use obedience::game::{Agent, GameSpec};
use obedience::random::{random_game, random_stage_game, random_strategy, GameShape};
use obedience::verifier::{
    best_response, check_obedience, evaluate, history_expanded_optimum, strategy_values, DEFAULT_SR_TOL,
};
use obedience::Strategy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{ce_vertex_optimum, max_abs_diff};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn solve(spec: &GameSpec) -> Result<DesignerSolution, String> {
    solve_designer(spec, &DesignerOptions::default()).map_err(|e| e.to_string())
}

/// Stage programs that reached `Optimal`, counted over every solve the gate
/// performs.
static STAGE_LPS: std::sync::atomic::AtomicUsize = std::sync::atomic::AtomicUsize::new(0);

fn count_stages(sol: &DesignerSolution) -> Result<(), String> {
    let solved = sol.stats.iter().flatten().filter(|s| s.is_some()).count();
    let total: usize = sol.stats.iter().map(Vec::len).sum();
    ensure(solved == total, || {
        format!("{} of {total} stage programs missing", total - solved)
    })?;
    STAGE_LPS.fetch_add(solved, std::sync::atomic::Ordering::Relaxed);
    Ok(())
}

fn table1() -> Outcome {
    let start = Instant::now();
    let run = reproduce_table1(&BroadcastParams::dynamic(3), &DesignerOptions::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    count_stages(&run.designer)?;
    let t = &run.table;
    ensure((t.ud[0] - 44.8288).abs() <= 1e-3, || {
        format!("UD designer {:.6}", t.ud[0])
    })?;
    ensure((t.problem2[0] - 43.3264).abs() <= 1e-3, || {
        format!("Problem-2 designer {:.6}", t.problem2[0])
    })?;
    ensure((t.cmdp[0] - 43.5472).abs() <= 1e-2, || {
        format!("CMDP designer {:.6}", t.cmdp[0])
    })?;
    let agents_close = (t.problem2[1] - 8.6653).abs() <= 5e-2 && (t.problem2[2] - 8.6653).abs() <= 5e-2;
    let sr = check_obedience(&run.spec, &run.designer.strategy, DEFAULT_SR_TOL);
    ensure(sr.passed, || {
        format!("designer output fails SR, max gap {:e}", sr.max_gap)
    })?;
    ensure(t.ud[0] >= t.cmdp[0] - 1e-7 && t.cmdp[0] >= t.problem2[0] - 1e-7, || {
        format!("sandwich broken {t:?}")
    })?;
    ensure(agents_close, || {
        format!("agent values {:.6}, {:.6}", t.problem2[1], t.problem2[2])
    })?;
    ensure(elapsed < 10.0, || format!("took {elapsed:.2}s"))?;
    Ok(format!(
        "UD {:.4}  CMDP {:.4}  P2 {:.4}  agents ({:.4}, {:.4})  {elapsed:.2}s",
        t.ud[0], t.cmdp[0], t.problem2[0], t.problem2[1], t.problem2[2]
    ))
}

fn static_case() -> Outcome {
    let base = BroadcastParams::dynamic(3);
    let four = run_static_case(&base, 2, 1, 4.0).map_err(|e| e.to_string())?;
    let pairs = |s: &[obedience::broadcast::SupportEntry]| s.iter().map(|e| (e.u1, e.u2, e.p)).collect::<Vec<_>>();
    ensure(pairs(&four.problem2_support) == vec![(2, 1, 1.0)], || {
        format!("P2 support {:?}", four.problem2_support)
    })?;
    ensure(pairs(&four.ud_support) == vec![(1, 1, 1.0)], || {
        format!("UD support {:?}", four.ud_support)
    })?;
    ensure((four.problem2_value - 4.6).abs() <= 1e-9, || {
        format!("P2 value {}", four.problem2_value)
    })?;
    ensure((four.ud_value - (2.0 / 3.0 + 4.0)).abs() <= 1e-9, || {
        format!("UD value {}", four.ud_value)
    })?;
    ensure(four.condition_holds && four.supports_differ, || {
        "alpha=4 should separate the designers".into()
    })?;
    let three = run_static_case(&base, 2, 1, 3.0).map_err(|e| e.to_string())?;
    ensure(pairs(&three.problem2_support) == vec![(2, 1, 1.0)], || {
        format!("P2 support {:?}", three.problem2_support)
    })?;
    ensure(pairs(&three.ud_support) == vec![(2, 1, 1.0)], || {
        format!("UD support {:?}", three.ud_support)
    })?;
    ensure(!three.condition_holds && !three.supports_differ, || {
        "alpha=3 should not separate".into()
    })?;
    Ok(format!(
        "alpha=4: P2 (2,1) {:.4}, UD (1,1) {:.4}; alpha=3: both (2,1)",
        four.problem2_value, four.ud_value
    ))
}

fn qualitative() -> Outcome {
    let params = BroadcastParams::dynamic(3);
    let spec = build_broadcast_game(&params).map_err(|e| e.to_string())?;
    let x = params.state_index(2, 2);
    let ud = solve_unconstrained(&spec);
    for stage in 0..spec.horizon {
        let d = ud.strategy.get(stage, x).unwrap();
        ensure(d.prob(1, 1) == 1.0, || {
            format!("UD at t={} is {:?}", stage + 1, d.probs)
        })?;
    }
    let p2 = solve(&spec)?;
    count_stages(&p2)?;
    let first = probe_strategy(&p2.strategy, 0, x, 3).map_err(|e| e.to_string())?;
    let last = probe_strategy(&p2.strategy, 9, x, 3).map_err(|e| e.to_string())?;
    ensure((0.9..1.0).contains(&first.fair_mass), || {
        format!("t=1 fair mass {}", first.fair_mass)
    })?;
    ensure(first.asymmetric_mass > 0.0, || "t=1 has no asymmetric mass".into())?;
    ensure(last.asymmetric_mass > first.asymmetric_mass, || {
        format!(
            "asymmetric mass t=10 {} vs t=1 {}",
            last.asymmetric_mass, first.asymmetric_mass
        )
    })?;

    let params1 = BroadcastParams::dynamic(1);
    let spec1 = build_broadcast_game(&params1).map_err(|e| e.to_string())?;
    let p2c1 = solve(&spec1)?;
    count_stages(&p2c1)?;
    let probe = probe_strategy(&p2c1.strategy, 6, x, 1).map_err(|e| e.to_string())?;
    ensure(probe.over_capacity_mass >= 0.99, || {
        format!("c=1 over-capacity mass {}", probe.over_capacity_mass)
    })?;
    let ud1 = solve_unconstrained(&spec1);
    let d = ud1.strategy.get(6, x).unwrap();
    ensure(d.prob(0, 0) == 1.0, || format!("c=1 UD at t=7 is {:?}", d.probs))?;
    Ok(format!(
        "c=3 (2,2): fair {:.4} asym {:.4} at t=1, asym {:.4} at t=10; c=1 t=7 over-capacity {:.4}, UD (0,0)",
        first.fair_mass, first.asymmetric_mass, last.asymmetric_mass, probe.over_capacity_mass
    ))
}

fn sandwich() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5a4d);
    let mut worst = f64::INFINITY;
    for i in 0..50 {
        let shape = GameShape {
            horizon: rng.gen_range(1..=5),
            max_states: 4,
            max_actions: 3,
            reward_scale: 1.0,
        };
        let spec = random_game(&mut rng, shape);
        let p2 = solve(&spec)?;
        count_stages(&p2)?;
        let eval = evaluate(&spec, &p2.strategy).map_err(|e| e.to_string())?;
        let cmdp = solve_cmdp(&spec, eval.agent1, eval.agent2).map_err(|e| format!("instance {i}: {e}"))?;
        let ud = solve_unconstrained(&spec);
        let slack = (ud.designer_value - cmdp.designer).min(cmdp.designer - eval.designer);
        worst = worst.min(slack);
        ensure(slack >= -1e-7, || {
            format!(
                "instance {i}: UD {} CMDP {} P2 {}",
                ud.designer_value, cmdp.designer, eval.designer
            )
        })?;
    }
    Ok(format!("50 instances, smallest ordering slack {worst:.3e}"))
}

fn sr_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e5e);
    let mut corpus: Vec<(GameSpec, Strategy)> = Vec::new();
    while corpus.len() < 240 {
        let shape = GameShape {
            horizon: rng.gen_range(1..=3),
            max_states: 3,
            max_actions: 3,
            reward_scale: 1.0,
        };
        let spec = random_game(&mut rng, shape);
        let p2 = solve(&spec)?;
        count_stages(&p2)?;
        let ud = solve_unconstrained(&spec).strategy;
        let r1 = random_strategy(&mut rng, &spec);
        let r2 = random_strategy(&mut rng, &spec);
        for s in [p2.strategy, ud, r1, r2] {
            corpus.push((spec.clone(), s));
        }
    }
    let (mut passes, mut worst) = (0, 0.0f64);
    for (i, (spec, strategy)) in corpus.iter().enumerate() {
        let sr = check_obedience(spec, strategy, DEFAULT_SR_TOL);
        let brs = Agent::BOTH.map(|a| best_response(spec, strategy, a));
        let br_pass = brs.iter().all(|b| b.passes(DEFAULT_SR_TOL));
        let br_gap = brs.iter().map(|b| b.max_node_gap).fold(0.0, f64::max);
        ensure(sr.passed == br_pass, || {
            format!("case {i}: obedience {} vs best response {}", sr.passed, br_pass)
        })?;
        let diff = (sr.max_gap - br_gap).abs();
        worst = worst.max(diff);
        ensure(diff <= 1e-7, || format!("case {i}: gaps {} vs {}", sr.max_gap, br_gap))?;
        passes += usize::from(sr.passed);
    }
    Ok(format!(
        "{} strategies ({passes} obedient), max gap disagreement {worst:.2e}",
        corpus.len()
    ))
}

fn expanded_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7e03);
    let mut worst = 0.0f64;
    for i in 0..120 {
        let shape = GameShape {
            horizon: 2,
            max_states: 2,
            max_actions: 2,
            reward_scale: 1.0,
        };
        let spec = random_game(&mut rng, shape);
        let markov = solve(&spec)?;
        count_stages(&markov)?;
        let expanded = history_expanded_optimum(&spec).map_err(|e| format!("instance {i}: {e}"))?;
        let diff = (expanded.value - markov.expected_value(&spec)).abs();
        worst = worst.max(diff);
        ensure(diff <= 1e-8, || {
            format!(
                "instance {i}: expanded {} vs markov {}",
                expanded.value,
                markov.expected_value(&spec)
            )
        })?;
    }
    Ok(format!("120 instances, max difference {worst:.2e}"))
}

fn ce_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xce);
    let mut worst = 0.0f64;
    for i in 0..120 {
        let n = if i % 2 == 0 { 2 } else { 3 };
        let spec = random_stage_game(&mut rng, n, n, 5.0);
        let sol = solve(&spec)?;
        count_stages(&sol)?;
        let oracle = ce_vertex_optimum(&spec);
        let diff = (oracle - sol.expected_value(&spec)).abs();
        worst = worst.max(diff);
        ensure(diff <= 1e-9, || {
            format!(
                "game {i} ({n}x{n}): oracle {oracle} vs designer {}",
                sol.expected_value(&spec)
            )
        })?;
    }
    let pd = common::prisoners_dilemma();
    let sol = solve(&pd)?;
    count_stages(&sol)?;
    let d = sol.strategy.get(0, 0).unwrap();
    ensure(d.probs == vec![0.0, 0.0, 0.0, 1.0], || {
        format!("PD strategy {:?}", d.probs)
    })?;
    Ok(format!(
        "120 stage games (2x2, 3x3), max difference {worst:.2e}; PD -> mutual defection"
    ))
}

fn internal_consistency() -> Outcome {
    let mut specs = vec![
        build_broadcast_game(&BroadcastParams::dynamic(3)).unwrap(),
        build_broadcast_game(&BroadcastParams::dynamic(1)).unwrap(),
        build_broadcast_game(&BroadcastParams::static_case(2, 1, 4.0)).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0x1c);
    for _ in 0..40 {
        let shape = GameShape {
            horizon: rng.gen_range(1..=5),
            max_states: 4,
            max_actions: 3,
            reward_scale: 2.0,
        };
        specs.push(random_game(&mut rng, shape));
    }
    let (mut table_err, mut eval_err) = (0.0f64, 0.0f64);
    for (i, spec) in specs.iter().enumerate() {
        let sol = solve(spec)?;
        count_stages(&sol)?;
        let recomputed = strategy_values(spec, &sol.strategy);
        let d = max_abs_diff(&recomputed.designer, &sol.values.designer)
            .max(max_abs_diff(&recomputed.agent1, &sol.values.agent1))
            .max(max_abs_diff(&recomputed.agent2, &sol.values.agent2));
        table_err = table_err.max(d);
        ensure(d <= 1e-8, || format!("spec {i}: value tables differ by {d:e}"))?;
        let eval = evaluate(spec, &sol.strategy).map_err(|e| e.to_string())?;
        let e = (eval.designer - sol.values.expected_initial(spec, None))
            .abs()
            .max((eval.agent1 - sol.values.expected_initial(spec, Some(Agent::One))).abs())
            .max((eval.agent2 - sol.values.expected_initial(spec, Some(Agent::Two))).abs());
        eval_err = eval_err.max(e);
        ensure(e <= 1e-8, || format!("spec {i}: forward evaluation differs by {e:e}"))?;
    }
    Ok(format!(
        "{} specs; tables {table_err:.2e}, forward {eval_err:.2e}",
        specs.len()
    ))
}

fn stage_feasibility() -> Outcome {
    let mut specs = Vec::new();
    for capacity in 1..=4 {
        for alpha in [0.0, 1.0, 4.0, 10.0] {
            let mut p = BroadcastParams::dynamic(capacity);
            p.alpha = alpha;
            p.horizon = 6;
            specs.push(build_broadcast_game(&p).unwrap());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xfea5);
    for _ in 0..60 {
        let shape = GameShape {
            horizon: rng.gen_range(1..=5),
            max_states: 4,
            max_actions: 3,
            reward_scale: 3.0,
        };
        specs.push(random_game(&mut rng, shape));
    }
    for spec in &specs {
        count_stages(&solve(spec)?)?;
    }
    Ok(format!(
        "{} stage programs Optimal across the gate",
        STAGE_LPS.load(std::sync::atomic::Ordering::Relaxed)
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("table1-reproduction", table1),
        ("static-case", static_case),
        ("mixed-and-over-capacity", qualitative),
        ("sandwich-ordering", sandwich),
        ("sr-route-agreement", sr_soundness),
        ("history-expanded-oracle", expanded_oracle),
        ("one-step-ce-oracle", ce_oracle),
        ("internal-consistency", internal_consistency),
        // Last so the count covers every solve above.
        ("stage-lp-feasibility", stage_feasibility),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name:<26} {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name:<26} {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
