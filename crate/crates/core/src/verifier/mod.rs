//! Independent evaluation of strategies and three checks of whether
//! obedience is sequentially rational under them.

mod best_response;
mod evaluate;
mod expanded;
mod obedience;

use thiserror::Error;

use crate::lp::{LpError, LpStatus};
use crate::strategy::StrategyError;

pub use best_response::{best_response, conditional_belief, BestResponse, ConditionalBelief};
pub use evaluate::{agent_values, designer_values, evaluate, strategy_values, EvalReport};
pub use expanded::{expanded_node_count, history_expanded_optimum, ExpandedOptimum, EXPANDED_NODE_LIMIT};
pub use obedience::{check_obedience, SrReport, Violation, DEFAULT_SR_TOL};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("expanded-history oracle refused: {nodes} history nodes exceed the limit of {limit}")]
    TooLarge { nodes: u128, limit: u128 },
    #[error("expanded stage program at t={t}, x={x} is {status:?}")]
    StageFailed { t: usize, x: usize, status: LpStatus },
    #[error(transparent)]
    Lp(#[from] LpError),
}
