use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use bpassist_core::contract::{
    agent_execute, agent_preview, Agent, AgentDescriptor, AgentError, AgentPreview, AgentResult, ContractError,
    Context, Role, Utterance,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::wire::{Mode, WireRequest, WireResponse};

/// Utterance previewed during the registration handshake.
pub const PROBE_TEXT: &str = "ping";

const REQUEST_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Health {
    Up,
    Down,
}

#[derive(Debug, Error)]
pub enum RegistrationError {
    #[error("endpoint unreachable: {0}")]
    Unreachable(String),
    #[error("endpoint answered with a malformed response: {0}")]
    Malformed(String),
    #[error("endpoint broke the contract: {0}")]
    Contract(#[from] ContractError),
}

/// An agent behind an HTTP endpoint speaking the wire contract. Failed calls
/// mark it down; it keeps being broadcast to, and the orchestrator reads a
/// failure as a silent preview.
pub struct RemoteAgent {
    descriptor: AgentDescriptor,
    endpoint: String,
    client: reqwest::Client,
    up: AtomicBool,
}

impl RemoteAgent {
    /// Connects after a successful handshake: the endpoint must answer a
    /// preview of [`PROBE_TEXT`] with a contract-valid response.
    pub async fn connect(descriptor: AgentDescriptor, endpoint: &str) -> Result<Self, RegistrationError> {
        let client = reqwest::Client::builder()
            .timeout(REQUEST_TIMEOUT)
            .build()
            .map_err(|e| RegistrationError::Unreachable(e.to_string()))?;
        let agent = Self {
            descriptor,
            endpoint: endpoint.to_string(),
            client,
            up: AtomicBool::new(true),
        };
        let probe = Utterance::new(PROBE_TEXT, Role::Unspecified, 0)?;
        let preview = agent.call(Mode::Preview, &probe, &Context::new()).await.map_err(|e| match e {
            AgentError::Unavailable(m) => RegistrationError::Unreachable(m),
            other => RegistrationError::Malformed(other.to_string()),
        })?;
        preview.validate()?;
        Ok(agent)
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn health(&self) -> Health {
        if self.up.load(Ordering::Relaxed) {
            Health::Up
        } else {
            Health::Down
        }
    }

    async fn call(&self, mode: Mode, utterance: &Utterance, ctx: &Context) -> Result<AgentPreview, AgentError> {
        let body = WireRequest {
            mode,
            utterance: utterance.clone(),
            context: ctx.clone(),
        };
        let sent = self
            .client
            .post(&self.endpoint)
            .json(&body)
            .send()
            .await
            .and_then(reqwest::Response::error_for_status);
        let reply = match sent {
            Ok(r) => r,
            Err(e) => {
                if self.up.swap(false, Ordering::Relaxed) {
                    tracing::warn!(agent = %self.descriptor.agent_id, endpoint = %self.endpoint, error = %e, "remote agent is down");
                }
                return Err(AgentError::Unavailable(e.to_string()));
            }
        };
        self.up.store(true, Ordering::Relaxed);
        let wire: WireResponse = reply
            .json()
            .await
            .map_err(|e| AgentError::Failed(format!("bad wire response: {e}")))?;
        Ok(wire.into_preview(&self.descriptor.agent_id))
    }
}

#[async_trait]
impl Agent for RemoteAgent {
    fn descriptor(&self) -> &AgentDescriptor {
        &self.descriptor
    }

    async fn preview(&self, utterance: &Utterance, ctx: &Context) -> Result<AgentPreview, AgentError> {
        self.call(Mode::Preview, utterance, ctx).await
    }

    async fn execute(&self, utterance: &Utterance, ctx: &Context) -> Result<AgentResult, AgentError> {
        self.call(Mode::Execute, utterance, ctx).await
    }
}

/// Serves a local agent over the wire contract at `/`.
pub fn agent_router(agent: Arc<dyn Agent>) -> Router {
    Router::new().route("/", post(answer)).with_state(agent)
}

async fn answer(
    State(agent): State<Arc<dyn Agent>>,
    Json(req): Json<WireRequest>,
) -> Result<Json<WireResponse>, (StatusCode, String)> {
    let out = match req.mode {
        Mode::Preview => agent_preview(agent.as_ref(), &req.utterance, &req.context).await,
        Mode::Execute => agent_execute(agent.as_ref(), &req.utterance, &req.context).await,
    };
    out.map(|p| Json(WireResponse::from_preview(&p)))
        .map_err(|e| (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))
}
