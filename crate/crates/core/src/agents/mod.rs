//! The assistant's agents and the world state they read and change.

mod alerting;
pub mod alerts;
mod analytics;
mod bp_execute;
mod chit_chat;
mod content;
mod data_query;
mod rules;
mod suite;
mod travel;
mod world;

use thiserror::Error;

use crate::assets::AssetSource;
use crate::contract::{AgentDescriptor, Context, ResponsePayload};
use crate::nlu::{ModelDef, NluModel};

pub use alerting::AlertsAgent;
pub use alerts::{match_events, AlertRegistry, AlertRule, AlertSpec, Notification, NotificationHub};
pub use analytics::{histogram, DataExportAgent, VisualizationAgent};
pub use bp_execute::BpExecuteAgent;
pub use chit_chat::{ChitChatAgent, Roster};
pub use content::{parse_fields, ContentAnalyzerAgent};
pub use data_query::DataQueryAgent;
pub use rules::BusinessRulesAgent;
pub use suite::{build_agents, build_world, Assistant, Session, SuiteConfig, WorldConfig};
pub use travel::TravelQueryAgent;
pub use world::{DocLookup, DocumentStore, Profile, Profiles, World, WorldSnapshot};

/// Agent ids of the built-in suite.
pub mod ids {
    pub const CHIT_CHAT: &str = "chit-chat";
    pub const DATA_QUERY: &str = "data-query";
    pub const TRAVEL_QUERY: &str = "travel-query";
    pub const CONTENT_ANALYZER: &str = "content-analyzer";
    pub const VISUALIZATION: &str = "visualization";
    pub const DATA_EXPORT: &str = "data-export";
    pub const BUSINESS_RULES: &str = "business-rules";
    pub const BP_EXECUTE: &str = "bp-execute";
    pub const ALERTS: &str = "alerts";
}

/// Shared context keys.
pub const SESSION_ID: &str = "session.id";
pub const SESSION_USER: &str = "session.user";
pub const LAST_RESULT: &str = "last_result";
pub const LAST_QUERY: &str = "last_query";
pub const LOAN_PREFIX: &str = "loan.";
pub const LOAN_DECISION: &str = "loan.decision";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SuiteError {
    #[error("asset: {0}")]
    Asset(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

pub(crate) fn load_model(assets: &AssetSource, id: &str, people: &[String]) -> Result<NluModel, SuiteError> {
    let path = format!("models/{id}.toml");
    let text = assets.read(&path).map_err(|e| SuiteError::Asset(format!("{path}: {e}")))?;
    let def = ModelDef::from_toml(&text).map_err(|e| SuiteError::Asset(format!("{path}: {e}")))?;
    NluModel::compile(&def, people).map_err(|e| SuiteError::Asset(format!("{path}: {e}")))
}

/// True when this agent asked something last turn and left state behind
/// under `key`, so the new utterance is probably the answer.
pub(crate) fn continuing(ctx: &Context, agent: &AgentDescriptor, key: &str) -> bool {
    ctx.scoped(&agent.agent_id, key).is_some() && ctx.was_selected_last_turn(&agent.agent_id)
}

pub(crate) fn text(s: impl Into<String>) -> ResponsePayload {
    ResponsePayload::text(s)
}

pub(crate) fn plural(n: usize, one: &str, many: &str) -> String {
    if n == 1 {
        format!("{n} {one}")
    } else {
        format!("{n} {many}")
    }
}
