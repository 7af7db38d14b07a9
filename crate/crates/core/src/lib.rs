//! Optimal action-recommendation strategies for finite-horizon two-agent
//! Markov games.
//!
//! A designer observes the state and privately recommends an action to each
//! agent. It wants to maximize its own expected total reward while making
//! obedience a sequentially rational choice for both agents. The optimal
//! Markov recommendation strategy is found by backward induction over one
//! small linear program per stage and state ([`designer::solve_designer`]).
//!
//! The crate also provides:
//! * exact evaluation and three independent obedience checks ([`verifier`]);
//! * the unconstrained and constrained direct-control baselines ([`baselines`]);
//! * a two-transmitter broadcast channel model and its experiments
//!   ([`broadcast`]);
//! * a deterministic dense simplex solver ([`lp`]) used by all of the above.
//!
//! State loops within a stage run on rayon when the default `parallel`
//! feature is on; results are merged in state order either way.

pub mod baselines;
pub mod broadcast;
pub mod designer;
pub mod game;
pub mod io;
pub mod lp;
pub mod par;
pub mod random;
pub mod strategy;
pub mod verifier;

pub use baselines::{solve_cmdp, solve_unconstrained, CmdpSolution, OccupationMeasure, UdSolution};
pub use designer::{build_stage_lp, solve_designer, DesignerOptions, DesignerSolution};
pub use game::{compile_kernel, reachable_states, validate_spec, ActionCounts, Agent, GameSpec, NoiseModel};
pub use lp::{solve_lp, LinearProgram, LpSolution, LpStatus};
pub use strategy::{
    strategy_marginal, ActionStrategy, JointDist, MessagingStrategy, Strategy, StrategyKind, ValueTables,
};
