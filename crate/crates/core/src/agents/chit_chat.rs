use std::sync::{Arc, RwLock};

use async_trait::async_trait;

use super::{ids, text};
use crate::contract::{Agent, AgentDescriptor, AgentError, AgentPreview, AgentResult, Context, TaxonomyClass, Utterance};
use crate::nlu::NluModel;

/// Descriptors of the registered agents, kept current by the assistant so
/// help can list them.
pub type Roster = Arc<RwLock<Vec<AgentDescriptor>>>;

/// Greetings, thanks, goodbyes and help.
pub struct ChitChatAgent {
    descriptor: AgentDescriptor,
    model: NluModel,
    roster: Roster,
}

impl ChitChatAgent {
    pub fn new(model: NluModel, roster: Roster) -> Self {
        Self {
            descriptor: AgentDescriptor::new(ids::CHIT_CHAT, "Chit-Chat", TaxonomyClass::Dialog, false),
            model,
            roster,
        }
    }

    fn respond(&self, u: &Utterance) -> AgentPreview {
        let nlu = self.model.classify(&u.text);
        let reply = match nlu.intent_id.as_deref() {
            Some("greeting") => "Hi there".to_string(),
            Some("thanks") => "You're welcome.".to_string(),
            Some("goodbye") => "Goodbye!".to_string(),
            Some("help") => {
                let roster = self.roster.read().unwrap_or_else(|p| p.into_inner());
                let names: Vec<&str> = roster
                    .iter()
                    .filter(|d| d.agent_id != ids::CHIT_CHAT)
                    .map(|d| d.display_name.as_str())
                    .collect();
                format!("I can help through these assistants: {}.", names.join(", "))
            }
            _ => return AgentPreview::new(ids::CHIT_CHAT, text(""), 0.0, false),
        };
        AgentPreview::new(ids::CHIT_CHAT, text(reply), nlu.confidence, false)
    }
}

#[async_trait]
impl Agent for ChitChatAgent {
    fn descriptor(&self) -> &AgentDescriptor {
        &self.descriptor
    }

    async fn preview(&self, u: &Utterance, _: &Context) -> Result<AgentPreview, AgentError> {
        Ok(self.respond(u))
    }

    async fn execute(&self, u: &Utterance, _: &Context) -> Result<AgentResult, AgentError> {
        Ok(self.respond(u))
    }
}
