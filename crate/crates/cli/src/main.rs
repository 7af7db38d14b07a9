use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use obedience::baselines::{solve_cmdp, solve_unconstrained};
use obedience::broadcast::{
    build_broadcast_game, probe_trajectory, reproduce_table1, run_static_case, BroadcastParams, Probe,
};
use obedience::io::{load_spec, parse_strategy, read_file, write_file, StrategyFile};
use obedience::lp::{FEASIBILITY_TOL, OPTIMALITY_TOL, PIVOT_TOL};
use obedience::verifier::{
    best_response, check_obedience, evaluate, history_expanded_optimum, SrReport, DEFAULT_SR_TOL,
};
use obedience::{solve_designer, Agent, DesignerOptions, GameSpec, Strategy};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "obedience",
    version,
    about = "Obedient action recommendations for two-agent Markov games"
)]
struct Cli {
    /// Worker threads for per-state loops (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the optimal obedient recommendation strategy.
    Solve {
        #[command(flatten)]
        game: GameArgs,
        /// Strategy JSON to write.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Only solve states reachable from the initial distribution.
        #[arg(long)]
        reachable_only: bool,
    },
    /// Check that obedience is sequentially rational under a strategy.
    Verify {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long)]
        strategy: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SR_TOL)]
        tol: f64,
        /// Report JSON to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact expected totals of a strategy under obedient play.
    Eval {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long)]
        strategy: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Direct-control baselines.
    Baseline {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, value_enum)]
        kind: BaselineKind,
        /// Agent 1 threshold (cmdp). Defaults to the obedient designer's agent value.
        #[arg(long, allow_negative_numbers = true)]
        eps1: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        eps2: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Broadcast channel experiments.
    Bench {
        #[arg(long, value_enum)]
        preset: Preset,
        /// Fairness weight for the static preset.
        #[arg(long, default_value_t = 4.0)]
        alpha: f64,
        /// Output directory.
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
    },
    /// Compare against the expanded-history optimum on a tiny game.
    Oracle {
        #[command(flatten)]
        game: GameArgs,
    },
    /// Write a preset game as a spec file.
    Export {
        #[arg(long, value_enum)]
        preset: Preset,
        #[arg(long, default_value_t = 4.0)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct GameArgs {
    /// Game specification JSON.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    spec: Option<PathBuf>,
    /// Built-in broadcast game instead of a spec file.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long, default_value_t = 4.0)]
    alpha: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    #[value(name = "table1-c3")]
    Table1C3,
    #[value(name = "overcap-c1")]
    OvercapC1,
    Static,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineKind {
    Ud,
    Cmdp,
}

enum Failure {
    /// Verification ran and found a problem.
    Check(String),
    /// Bad input or a solver fault.
    Input(String),
}

type Outcome = Result<(), Failure>;

fn input<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Input(e.to_string())
}

fn preset_params(preset: Preset, alpha: f64) -> BroadcastParams {
    match preset {
        Preset::Table1C3 => BroadcastParams::dynamic(3),
        Preset::OvercapC1 => BroadcastParams::dynamic(1),
        Preset::Static => BroadcastParams::static_case(2, 1, alpha),
    }
}

fn load_game(args: &GameArgs) -> Result<GameSpec, Failure> {
    match (&args.spec, args.preset) {
        (Some(path), _) => load_spec(path).map_err(input),
        (None, Some(p)) => build_broadcast_game(&preset_params(p, args.alpha)).map_err(input),
        (None, None) => Err(Failure::Input("either --spec or --preset is required".into())),
    }
}

fn load_strategy(path: &Path, spec: &GameSpec) -> Result<(Strategy, StrategyFile), Failure> {
    let text = read_file(path).map_err(input)?;
    parse_strategy(&text, spec).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// Pretty JSON with object keys sorted.
fn to_json<T: Serialize>(value: &T) -> String {
    let v: Value = serde_json::to_value(value).expect("serializable");
    let mut s = serde_json::to_string_pretty(&v).expect("serializable");
    s.push('\n');
    s
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome {
    write_file(path, &to_json(value)).map_err(input)
}

fn designer_options(threads: Option<usize>, reachable_only: bool) -> DesignerOptions {
    DesignerOptions {
        parallel: threads != Some(1),
        reachable_only,
        ..DesignerOptions::default()
    }
}

fn solver_metadata(pivots: usize) -> BTreeMap<String, Value> {
    BTreeMap::from([
        ("feasibility_tol".to_string(), json!(FEASIBILITY_TOL)),
        ("optimality_tol".to_string(), json!(OPTIMALITY_TOL)),
        ("pivot_tol".to_string(), json!(PIVOT_TOL)),
        (
            "support_threshold".to_string(),
            json!(DesignerOptions::default().support_threshold),
        ),
        ("pivots".to_string(), json!(pivots)),
    ])
}

fn cmd_solve(game: &GameArgs, out: Option<&Path>, reachable_only: bool, threads: Option<usize>) -> Outcome {
    let spec = load_game(game)?;
    let sol = solve_designer(&spec, &designer_options(threads, reachable_only)).map_err(input)?;
    let value = sol.expected_value(&spec);
    println!("{value:.6}");
    if let Some(path) = out {
        let mut meta = solver_metadata(sol.total_pivots());
        meta.insert("expected_designer_value".into(), json!(value));
        write_json(path, &StrategyFile::new(&sol.strategy, Some(&sol.values), meta))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct BestResponseSummary {
    agent: usize,
    max_gain: f64,
    max_node_gap: f64,
    passed: bool,
}

#[derive(Serialize)]
struct VerifyReport {
    passed: bool,
    obedience: SrReport,
    best_response: Vec<BestResponseSummary>,
}

fn print_violations(report: &SrReport) {
    let worst = report.worst(10);
    if worst.is_empty() {
        return;
    }
    println!(
        "{:>5} {:>4} {:>6} {:>5} {:>5} {:>12}",
        "agent", "t", "x", "m", "u", "gap"
    );
    for v in worst {
        println!(
            "{:>5} {:>4} {:>6} {:>5} {:>5} {:>12.6e}",
            v.agent, v.t, v.x, v.recommended, v.deviation, v.gap
        );
    }
    if report.violations.len() > 10 {
        println!("... {} more", report.violations.len() - 10);
    }
}

fn cmd_verify(game: &GameArgs, strategy: &Path, tol: f64, out: Option<&Path>) -> Outcome {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Failure::Input(format!("tolerance must be positive, got {tol}")));
    }
    let spec = load_game(game)?;
    let (strategy, _) = load_strategy(strategy, &spec)?;
    let sr = check_obedience(&spec, &strategy, tol);
    let brs: Vec<BestResponseSummary> = Agent::BOTH
        .iter()
        .map(|&a| {
            let br = best_response(&spec, &strategy, a);
            BestResponseSummary {
                agent: a.number(),
                max_gain: br.max_gain,
                max_node_gap: br.max_node_gap,
                passed: br.passes(tol),
            }
        })
        .collect();
    let passed = sr.passed && brs.iter().all(|b| b.passed);
    println!(
        "obedience: {} ({} checks, max gap {:.3e})",
        if sr.passed { "pass" } else { "FAIL" },
        sr.checked,
        sr.max_gap
    );
    for b in &brs {
        println!(
            "best response agent {}: {} (max gain {:.3e})",
            b.agent,
            if b.passed { "pass" } else { "FAIL" },
            b.max_gain
        );
    }
    print_violations(&sr);
    let report = VerifyReport {
        passed,
        obedience: sr,
        best_response: brs,
    };
    if let Some(path) = out {
        write_json(path, &report)?;
    }
    if passed {
        Ok(())
    } else {
        Err(Failure::Check("obedience is not sequentially rational".into()))
    }
}

fn cmd_eval(game: &GameArgs, strategy: &Path, out: Option<&Path>) -> Outcome {
    let spec = load_game(game)?;
    let (strategy, _) = load_strategy(strategy, &spec)?;
    let report = evaluate(&spec, &strategy).map_err(input)?;
    println!("designer {:.6}", report.designer);
    println!("agent1   {:.6}", report.agent1);
    println!("agent2   {:.6}", report.agent2);
    if let Some(path) = out {
        write_json(path, &report)?;
    }
    Ok(())
}

fn cmd_baseline(
    game: &GameArgs,
    kind: BaselineKind,
    eps: (Option<f64>, Option<f64>),
    out: Option<&Path>,
    threads: Option<usize>,
) -> Outcome {
    let spec = load_game(game)?;
    let (strategy, totals, meta) = match kind {
        BaselineKind::Ud => {
            let ud = solve_unconstrained(&spec);
            let eval = evaluate(&spec, &ud.strategy).map_err(input)?;
            (
                ud.strategy,
                [ud.designer_value, eval.agent1, eval.agent2],
                BTreeMap::new(),
            )
        }
        BaselineKind::Cmdp => {
            let (eps1, eps2) = match eps {
                (Some(a), Some(b)) => (a, b),
                (a, b) => {
                    let sol = solve_designer(&spec, &designer_options(threads, false)).map_err(input)?;
                    let eval = evaluate(&spec, &sol.strategy).map_err(input)?;
                    (a.unwrap_or(eval.agent1), b.unwrap_or(eval.agent2))
                }
            };
            let cmdp = solve_cmdp(&spec, eps1, eps2).map_err(input)?;
            let mut meta = solver_metadata(cmdp.pivots);
            meta.insert("eps1".into(), json!(eps1));
            meta.insert("eps2".into(), json!(eps2));
            (cmdp.strategy, [cmdp.designer, cmdp.agent1, cmdp.agent2], meta)
        }
    };
    println!("designer {:.6}", totals[0]);
    println!("agent1   {:.6}", totals[1]);
    println!("agent2   {:.6}", totals[2]);
    if let Some(path) = out {
        write_json(path, &StrategyFile::new(&strategy, None, meta))?;
    }
    Ok(())
}

fn write_probes(dir: &Path, name: &str, probes: &[(&str, Vec<Probe>)]) -> Outcome {
    let map: BTreeMap<&str, &Vec<Probe>> = probes.iter().map(|(k, v)| (*k, v)).collect();
    write_json(&dir.join(name), &map)
}

fn cmd_bench(preset: Preset, alpha: f64, dir: &Path, threads: Option<usize>) -> Outcome {
    fs::create_dir_all(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
    let opts = designer_options(threads, false);
    match preset {
        Preset::Static => {
            let report = run_static_case(&BroadcastParams::dynamic(3), 2, 1, alpha).map_err(input)?;
            let show = |s: &[obedience::broadcast::SupportEntry]| {
                s.iter()
                    .map(|e| format!("({},{}):{:.4}", e.u1, e.u2, e.p))
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            println!(
                "alpha {alpha}, threshold {:.4}, condition {}",
                report.alpha_threshold, report.condition_holds
            );
            println!("UD        {}  value {:.4}", show(&report.ud_support), report.ud_value);
            println!(
                "Problem 2 {}  value {:.4}",
                show(&report.problem2_support),
                report.problem2_value
            );
            write_json(&dir.join("static.json"), &report)?;
        }
        Preset::Table1C3 | Preset::OvercapC1 => {
            let params = preset_params(preset, alpha);
            let run = reproduce_table1(&params, &opts).map_err(input)?;
            let csv = run.table.to_csv();
            print!("{csv}");
            let csv_name = if preset == Preset::Table1C3 {
                "table1.csv"
            } else {
                "table_c1.csv"
            };
            write_file(&dir.join(csv_name), &csv).map_err(input)?;
            let x = params.state_index(2, 2);
            let p2 = probe_trajectory(&run.designer.strategy, x, params.capacity).map_err(input)?;
            let ud = probe_trajectory(&run.ud, x, params.capacity).map_err(input)?;
            if preset == Preset::OvercapC1 {
                let ud7 = ud[6]
                    .support
                    .iter()
                    .map(|e| format!("({},{})", e.u1, e.u2))
                    .collect::<Vec<_>>();
                println!(
                    "t=7 (2,2): Problem 2 over-capacity mass {:.4}; UD plays {}",
                    p2[6].over_capacity_mass,
                    ud7.join(" ")
                );
            }
            write_probes(dir, "probes_2-2.json", &[("problem2", p2), ("ud", ud)])?;
        }
    }
    Ok(())
}

fn cmd_oracle(game: &GameArgs, threads: Option<usize>) -> Outcome {
    let spec = load_game(game)?;
    // A refusal on size is an input problem, not a failed check.
    let expanded = history_expanded_optimum(&spec).map_err(input)?;
    let markov = solve_designer(&spec, &designer_options(threads, false)).map_err(input)?;
    let value = markov.expected_value(&spec);
    println!("expanded {:.9} ({} programs)", expanded.value, expanded.programs);
    println!("markov   {value:.9}");
    let diff = (expanded.value - value).abs();
    if diff <= 1e-8 {
        Ok(())
    } else {
        Err(Failure::Check(format!("values differ by {diff:.3e}")))
    }
}

fn run(cli: Cli) -> Outcome {
    let threads = cli.threads;
    match cli.command {
        Command::Solve {
            game,
            out,
            reachable_only,
        } => cmd_solve(&game, out.as_deref(), reachable_only, threads),
        Command::Verify {
            game,
            strategy,
            tol,
            out,
        } => cmd_verify(&game, &strategy, tol, out.as_deref()),
        Command::Eval { game, strategy, out } => cmd_eval(&game, &strategy, out.as_deref()),
        Command::Baseline {
            game,
            kind,
            eps1,
            eps2,
            out,
        } => cmd_baseline(&game, kind, (eps1, eps2), out.as_deref(), threads),
        Command::Bench { preset, alpha, out } => cmd_bench(preset, alpha, &out, threads),
        Command::Oracle { game } => cmd_oracle(&game, threads),
        Command::Export { preset, alpha, out } => {
            let spec = build_broadcast_game(&preset_params(preset, alpha)).map_err(input)?;
            write_file(&out, &obedience::io::spec_to_json(&spec)).map_err(input)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
