use bpassist_core::contract::{AgentPreview, Context, ContextDelta, ResponsePayload, Utterance};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Preview,
    Execute,
}

/// Body posted to a remote agent's endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WireRequest {
    pub mode: Mode,
    pub utterance: Utterance,
    pub context: Context,
}

/// A remote agent's answer. The agent id is implied by the endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WireResponse {
    pub response: ResponsePayload,
    pub confidence: f64,
    pub stickiness: u8,
    #[serde(default)]
    pub context_updates: ContextDelta,
}

impl WireResponse {
    pub fn from_preview(p: &AgentPreview) -> Self {
        Self {
            response: p.response.clone(),
            confidence: p.confidence,
            stickiness: p.stickiness,
            context_updates: p.context_updates.clone(),
        }
    }

    pub fn into_preview(self, agent_id: &str) -> AgentPreview {
        AgentPreview {
            agent_id: agent_id.to_string(),
            response: self.response,
            confidence: self.confidence,
            stickiness: self.stickiness,
            context_updates: self.context_updates,
            timed_out: false,
        }
    }
}
