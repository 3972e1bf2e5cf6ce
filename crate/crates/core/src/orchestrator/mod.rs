//! Posterior orchestration: every agent previews the utterance, previews
//! are scored, the best are selected and put in dependency order, and only
//! then executed.

mod config;
mod registry;
mod three_s;
mod turn;

use thiserror::Error;

use crate::contract::ContractError;

pub use config::{OrchestratorConfig, ScorerKind};
pub use registry::AgentRegistry;
pub use three_s::{
    rank, score, scorer_for, select, sequence, IdentityScorer, MaxScorer, ScoredAgent, Scorer, Selector, TopKSelector,
};
pub use turn::{
    broadcast, run_turn, AgentResponse, AgentTiming, Orchestrator, TimedPreview, TraceResult, TracePreview, TurnResult,
    TurnTrace, SYSTEM_AGENT,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrchestratorError {
    #[error("invalid orchestrator config: {0}")]
    Config(String),
    #[error("registry: {0}")]
    Registry(String),
    #[error(transparent)]
    Contract(#[from] ContractError),
}
