//! The agent contract: what every agent receives, what it must return, and
//! the context model that carries conversation state between turns.

mod context;
mod payload;
mod value;

use std::fmt;
use std::str::FromStr;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use context::{apply_context_updates, Context, ContextDelta, TurnLogEntry};
pub use payload::{ChartKind, ChartSpec, FileAttachment, Modality, ResponsePayload};
pub use value::{format_money, format_number, Cell, Column, ColumnType, TablePayload, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContractError {
    #[error("malformed context: {0}")]
    MalformedContext(String),
    #[error("agent `{agent_id}` tried to write namespace `{namespace}`")]
    NamespaceViolation { agent_id: String, namespace: String },
    #[error("confidence {0} outside [0, 1]")]
    ConfidenceOutOfRange(f64),
    #[error("stickiness {0} is not 0 or 1")]
    InvalidStickiness(u8),
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
    #[error("invalid utterance: {0}")]
    InvalidUtterance(String),
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error("{0}")]
    Failed(String),
    #[error("agent unavailable: {0}")]
    Unavailable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Role {
    Employee,
    Manager,
    Director,
    LoanOfficer,
    #[default]
    Unspecified,
}

impl Role {
    pub const ALL: [Role; 5] = [
        Role::Employee,
        Role::Manager,
        Role::Director,
        Role::LoanOfficer,
        Role::Unspecified,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Employee => "Employee",
            Role::Manager => "Manager",
            Role::Director => "Director",
            Role::LoanOfficer => "LoanOfficer",
            Role::Unspecified => "Unspecified",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = ContractError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let folded: String = s
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        match folded.as_str() {
            "employee" => Ok(Role::Employee),
            "manager" => Ok(Role::Manager),
            "director" => Ok(Role::Director),
            "loanofficer" => Ok(Role::LoanOfficer),
            "unspecified" => Ok(Role::Unspecified),
            _ => Err(ContractError::InvalidUtterance(format!("unknown role `{s}`"))),
        }
    }
}

/// A document handed over with an utterance. When `content` is absent the
/// name is resolved against the document store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRef {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content: Option<String>,
}

impl DocumentRef {
    pub fn named(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            content: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Utterance {
    pub text: String,
    #[serde(default)]
    pub speaker_role: Role,
    #[serde(default)]
    pub turn_index: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attachments: Vec<DocumentRef>,
}

impl Utterance {
    pub fn new(
        text: impl Into<String>,
        speaker_role: Role,
        turn_index: u64,
    ) -> Result<Self, ContractError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(ContractError::InvalidUtterance("empty text".into()));
        }
        Ok(Self {
            text,
            speaker_role,
            turn_index,
            attachments: Vec::new(),
        })
    }

    pub fn with_attachments(mut self, attachments: Vec<DocumentRef>) -> Self {
        self.attachments = attachments;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaxonomyClass {
    Dialog,
    InformationRetrieval,
    TaskExecution,
    DataAnalytics,
    Alerting,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AgentDescriptor {
    pub agent_id: String,
    pub display_name: String,
    pub taxonomy_class: TaxonomyClass,
    pub world_changing: bool,
    #[serde(default)]
    pub consumes_keys: Vec<String>,
    #[serde(default)]
    pub produces_keys: Vec<String>,
}

impl AgentDescriptor {
    pub fn new(
        agent_id: impl Into<String>,
        display_name: impl Into<String>,
        taxonomy_class: TaxonomyClass,
        world_changing: bool,
    ) -> Self {
        Self {
            agent_id: agent_id.into(),
            display_name: display_name.into(),
            taxonomy_class,
            world_changing,
            consumes_keys: Vec::new(),
            produces_keys: Vec::new(),
        }
    }

    pub fn consumes(mut self, pattern: &str) -> Self {
        self.consumes_keys.push(pattern.to_string());
        self
    }

    pub fn produces(mut self, pattern: &str) -> Self {
        self.produces_keys.push(pattern.to_string());
        self
    }
}

/// True when some key could match both patterns. A trailing `*` matches any
/// suffix; anything else is a literal key.
pub fn patterns_overlap(a: &str, b: &str) -> bool {
    match (a.strip_suffix('*'), b.strip_suffix('*')) {
        (Some(pa), Some(pb)) => pa.starts_with(pb) || pb.starts_with(pa),
        (Some(pa), None) => b.starts_with(pa),
        (None, Some(pb)) => a.starts_with(pb),
        (None, None) => a == b,
    }
}

/// One agent's answer to a turn: response, confidence, stickiness and the
/// context changes it wants applied if selected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AgentPreview {
    #[serde(default)]
    pub agent_id: String,
    pub response: ResponsePayload,
    pub confidence: f64,
    pub stickiness: u8,
    #[serde(default)]
    pub context_updates: ContextDelta,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub timed_out: bool,
}

/// Execute-phase output; same shape and constraints as a preview.
pub type AgentResult = AgentPreview;

impl AgentPreview {
    pub fn new(agent_id: &str, response: ResponsePayload, confidence: f64, sticky: bool) -> Self {
        Self {
            agent_id: agent_id.to_string(),
            response,
            confidence,
            stickiness: u8::from(sticky),
            context_updates: ContextDelta::default(),
            timed_out: false,
        }
    }

    pub fn with_updates(mut self, updates: ContextDelta) -> Self {
        self.context_updates = updates;
        self
    }

    /// Stand-in for an agent that failed or missed its deadline.
    pub fn silent(agent_id: &str, timed_out: bool) -> Self {
        Self {
            timed_out,
            ..Self::new(agent_id, ResponsePayload::blank(), 0.0, false)
        }
    }

    pub fn is_sticky(&self) -> bool {
        self.stickiness == 1
    }

    pub fn validate(&self) -> Result<(), ContractError> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(ContractError::ConfidenceOutOfRange(self.confidence));
        }
        if self.stickiness > 1 {
            return Err(ContractError::InvalidStickiness(self.stickiness));
        }
        self.response.validate()?;
        self.context_updates.check_namespace(&self.agent_id)
    }
}

/// The contract every agent implements.
///
/// `preview` must not change any observable world state. `execute` runs only
/// for selected agents and may have side effects when the descriptor says
/// the agent is world-changing.
#[async_trait]
pub trait Agent: Send + Sync {
    fn descriptor(&self) -> &AgentDescriptor;

    async fn preview(&self, utterance: &Utterance, ctx: &Context)
        -> Result<AgentPreview, AgentError>;

    async fn execute(&self, utterance: &Utterance, ctx: &Context)
        -> Result<AgentResult, AgentError>;

    fn id(&self) -> &str {
        &self.descriptor().agent_id
    }
}

/// Runs an agent's preview with contract checks on input and output.
pub async fn agent_preview(
    agent: &dyn Agent,
    utterance: &Utterance,
    ctx: &Context,
) -> Result<AgentPreview, AgentError> {
    ctx.validate()?;
    let mut preview = agent.preview(utterance, ctx).await?;
    preview.agent_id = agent.id().to_string();
    preview.validate()?;
    Ok(preview)
}

/// Runs an agent's execute phase with the same checks as [`agent_preview`].
pub async fn agent_execute(
    agent: &dyn Agent,
    utterance: &Utterance,
    ctx: &Context,
) -> Result<AgentResult, AgentError> {
    ctx.validate()?;
    let mut result = agent.execute(utterance, ctx).await?;
    result.agent_id = agent.id().to_string();
    result.validate()?;
    Ok(result)
}
