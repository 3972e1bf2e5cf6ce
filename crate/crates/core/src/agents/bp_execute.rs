use std::collections::BTreeMap;
use std::sync::Arc;

use async_trait::async_trait;

use super::{ids, text, World};
use crate::contract::{
    format_money, Agent, AgentDescriptor, AgentError, AgentPreview, AgentResult, Context, TaxonomyClass, Utterance,
    Value,
};
use crate::nlu::NluModel;
use crate::process::{InstanceFilter, ProcessInstance};

const TRAVEL: &str = "travel";
const DEFAULT_EVENT: &str = "Business trip";

/// Submits and moves process instances on the speaker's behalf. Preview
/// describes the step; only execute commits it.
pub struct BpExecuteAgent {
    descriptor: AgentDescriptor,
    model: NluModel,
    world: Arc<World>,
}

/// Destination and event of "... to the headquarters for the risk workshop".
fn trip_details(utterance: &str) -> (Option<String>, Option<String>) {
    let words: Vec<&str> = utterance
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .collect();
    let lower: Vec<String> = words.iter().map(|w| w.to_lowercase()).collect();
    let phrase = |from: usize, stop: &[&str]| -> Option<String> {
        let mut out: Vec<&str> = Vec::new();
        for (w, l) in words[from..].iter().zip(&lower[from..]) {
            if stop.contains(&l.as_str()) {
                break;
            }
            if out.is_empty() && (l == "the" || l == "a" || l == "an") {
                continue;
            }
            out.push(w);
        }
        (!out.is_empty()).then(|| out.iter().map(|w| title_case(w)).collect::<Vec<_>>().join(" "))
    };
    let dest = lower.iter().position(|w| w == "to").and_then(|i| phrase(i + 1, &["for", "on", "costing", "at"]));
    let event = lower.iter().position(|w| w == "for").and_then(|i| phrase(i + 1, &["to", "costing", "on"]));
    (dest, event)
}

fn title_case(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c.flat_map(char::to_lowercase)).collect(),
        None => String::new(),
    }
}

fn past(action: &str) -> &'static str {
    if action == "approve" {
        "approved"
    } else {
        "rejected"
    }
}

impl BpExecuteAgent {
    pub fn new(model: NluModel, world: Arc<World>) -> Self {
        Self {
            descriptor: AgentDescriptor::new(
                ids::BP_EXECUTE,
                "Business Process Task Execution",
                TaxonomyClass::TaskExecution,
                true,
            ),
            model,
            world,
        }
    }

    fn respond(&self, u: &Utterance, ctx: &Context, commit: bool) -> AgentPreview {
        let nlu = self.model.classify(&u.text);
        let (reply, confidence) = match nlu.intent_id.as_deref() {
            Some(action @ ("approve" | "reject")) => match nlu.entity_str("person") {
                Some(person) => (self.decide(person, action, u, commit), nlu.confidence),
                None => (format!("Whose request should I {action}?"), nlu.confidence.min(0.2)),
            },
            Some("submit_travel") => self.submit(u, ctx, commit, nlu.confidence, nlu.entity_f64("cost")),
            _ => return AgentPreview::new(ids::BP_EXECUTE, text(""), 0.0, false),
        };
        AgentPreview::new(ids::BP_EXECUTE, text(reply), confidence, false)
    }

    fn decide(&self, person: &str, action: &str, u: &Utterance, commit: bool) -> String {
        let store = &self.world.processes;
        let open: Vec<ProcessInstance> = store
            .query_instances(&InstanceFilter {
                subject: Some(person.to_string()),
                ..InstanceFilter::default()
            })
            .into_iter()
            .filter(|i| store.definition(&i.process_id).is_some_and(|d| !d.is_terminal(&i.state)))
            .collect();
        if open.is_empty() {
            return format!("I found no pending application for {person}.");
        }
        let allowed = open.iter().find(|i| {
            store
                .definition(&i.process_id)
                .is_some_and(|d| d.find_transition(&i.state, action, u.speaker_role).is_ok())
        });
        let Some(inst) = allowed else {
            let i = &open[0];
            return format!(
                "Sorry, as {} you cannot {action} {person}'s {} while it is {}.",
                article(u.speaker_role.as_str()),
                self.world.process_name(&i.process_id),
                i.state
            );
        };
        if !commit {
            return format!(
                "I will {action} {person}'s {} #{}.",
                self.world.process_name(&inst.process_id),
                inst.instance_id
            );
        }
        match store.transition(inst.instance_id, action, u.speaker_role) {
            Ok(_) => format!("{}'s application has been {}", inst.subject, past(action)),
            Err(e) => format!("Sorry, I could not {action} {person}'s application: {e}."),
        }
    }

    fn submit(&self, u: &Utterance, ctx: &Context, commit: bool, confidence: f64, cost: Option<f64>) -> (String, f64) {
        let user = self.world.current_user(ctx);
        let (dest, event) = trip_details(&u.text);
        let Some(dest) = dest else {
            return ("Where would you like to travel? Say, for example, \"submit a travel request to Boston\".".into(), 0.5 * confidence);
        };
        let profile = self.world.profiles.get(&user);
        let mut form = BTreeMap::new();
        form.insert("destination".to_string(), Value::from(dest.clone()));
        form.insert("event".to_string(), Value::from(event.unwrap_or_else(|| DEFAULT_EVENT.into())));
        form.insert(
            "department".to_string(),
            Value::from(profile.map_or("General", |p| p.department.as_str())),
        );
        let manager = profile.and_then(|p| p.manager.clone());
        if let Some(m) = &manager {
            form.insert("manager".to_string(), Value::from(m.as_str()));
        }
        if let Some(c) = cost {
            form.insert("estimated_cost".to_string(), Value::Number(c));
        }
        let to_whom = manager.map(|m| format!(" to {m}")).unwrap_or_default();
        if !commit {
            let next = self.world.processes.next_instance_id();
            let cost = cost.map(|c| format!(" costing {}", format_money(c))).unwrap_or_default();
            return (format!("I will submit travel request #{next} to {dest}{cost} for {user}{to_whom}."), confidence);
        }
        match self.world.processes.submit(TRAVEL, &user, form, u.speaker_role) {
            Ok(i) => (
                format!("Your travel request #{} to {dest} has been submitted{to_whom} for approval.", i.instance_id),
                confidence,
            ),
            Err(e) => (format!("Sorry, I could not submit the travel request: {e}."), confidence),
        }
    }
}

fn article(word: &str) -> String {
    let vowel = word.chars().next().is_some_and(|c| "AEIOUaeiou".contains(c));
    format!("{} {word}", if vowel { "an" } else { "a" })
}

#[async_trait]
impl Agent for BpExecuteAgent {
    fn descriptor(&self) -> &AgentDescriptor {
        &self.descriptor
    }

    async fn preview(&self, u: &Utterance, ctx: &Context) -> Result<AgentPreview, AgentError> {
        Ok(self.respond(u, ctx, false))
    }

    async fn execute(&self, u: &Utterance, ctx: &Context) -> Result<AgentResult, AgentError> {
        Ok(self.respond(u, ctx, true))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trip_details_cases() {
        assert_eq!(
            trip_details("submit a travel request to the headquarters"),
            (Some("Headquarters".into()), None)
        );
        assert_eq!(
            trip_details("Submit a travel request to New York for the risk workshop"),
            (Some("New York".into()), Some("Risk Workshop".into()))
        );
        assert_eq!(trip_details("submit a travel request"), (None, None));
    }
}
