use std::sync::Arc;

use async_trait::async_trait;

use super::{ids, text, AlertSpec, World};
use crate::contract::{Agent, AgentDescriptor, AgentError, AgentPreview, AgentResult, Context, TaxonomyClass, Utterance};
use crate::nlu::{tokenize, NluModel, NluResult};
use crate::process::EventKind;

/// Creates, lists and deletes process alerts for the current session.
/// Matching and delivery happen outside turns, in the world's matcher.
pub struct AlertsAgent {
    descriptor: AgentDescriptor,
    model: NluModel,
    world: Arc<World>,
}

impl AlertsAgent {
    pub fn new(model: NluModel, world: Arc<World>) -> Self {
        Self {
            descriptor: AgentDescriptor::new(ids::ALERTS, "Alerts", TaxonomyClass::Alerting, true),
            model,
            world,
        }
    }

    /// Reads the event kind, process and subject out of the condition.
    fn spec(&self, nlu: &NluResult, raw: &str) -> AlertSpec {
        let toks = tokenize(raw);
        let has = |words: &[&str]| toks.iter().any(|t| words.contains(&t.as_str()));
        let approve = has(&["approve", "approves", "approved", "approval"]);
        let reject = has(&["reject", "rejects", "rejected", "decline", "declines", "declined"]);
        let manager = has(&["manager"]);
        let director = has(&["director"]);
        let event_kind = if has(&["submit", "submits", "submitted", "files", "new"]) {
            Some(EventKind::Submitted)
        } else if approve && director {
            Some(EventKind::DirectorApproved)
        } else if reject && director {
            Some(EventKind::DirectorRejected)
        } else if approve && manager {
            Some(EventKind::ManagerApproved)
        } else if reject && manager {
            Some(EventKind::ManagerRejected)
        } else if approve {
            Some(EventKind::DirectorApproved)
        } else {
            None
        };
        let process_id = if has(&["travel", "trip", "trips"]) {
            Some("travel".to_string())
        } else if has(&["loan", "loans"]) {
            Some("loan".to_string())
        } else {
            None
        };
        let subject = nlu.entity_str("person").map(str::to_string);
        let noun = process_id.as_deref().map_or_else(|| "request".to_string(), |p| self.world.process_name(p));
        let who = subject.clone().unwrap_or_else(|| "anyone".into());
        let whose = subject.as_ref().map_or_else(|| "any".to_string(), |s| format!("{s}'s"));
        let (description, delivery_text) = match event_kind {
            Some(EventKind::Submitted) => (
                format!("{who} submits a {noun}"),
                "{subject} submitted a {process} (#{instance}).".to_string(),
            ),
            Some(k @ (EventKind::ManagerApproved | EventKind::DirectorApproved)) => (
                format!("a {} approves {whose} {noun}", role_word(k)),
                "{subject}'s {process} (#{instance}) was approved by a {role}; it is now {to}.".to_string(),
            ),
            Some(k @ (EventKind::ManagerRejected | EventKind::DirectorRejected)) => (
                format!("a {} rejects {whose} {noun}", role_word(k)),
                "{subject}'s {process} (#{instance}) was rejected by a {role}.".to_string(),
            ),
            _ => (
                format!("{whose} {noun} changes"),
                "{subject}'s {process} (#{instance}) changed: {kind}, now {to}.".to_string(),
            ),
        };
        AlertSpec {
            event_kind,
            process_id,
            subject,
            description,
            delivery_text,
        }
    }

    fn respond(&self, u: &Utterance, ctx: &Context, commit: bool) -> AgentPreview {
        let nlu = self.model.classify(&u.text);
        let session = World::session_id(ctx);
        let alerts = &self.world.alerts;
        let reply = match nlu.intent_id.as_deref() {
            Some("create") => {
                let spec = self.spec(&nlu, &u.text);
                if commit {
                    let description = spec.description.clone();
                    let rule = alerts.create(&session, spec, || self.world.processes.latest_event_id());
                    format!("Alert {} is set. I will notify you when {description}.", rule.alert_id)
                } else {
                    format!("I will set alert {} to notify you when {}.", alerts.next_id(&session), spec.description)
                }
            }
            Some("list") => {
                let active: Vec<String> = alerts
                    .for_session(&session)
                    .into_iter()
                    .filter(|r| r.active)
                    .map(|r| format!("{}. when {}", r.alert_id, r.spec.description))
                    .collect();
                if active.is_empty() {
                    "You have no active alerts.".to_string()
                } else {
                    format!("Your active alerts:\n{}", active.join("\n"))
                }
            }
            Some("delete") => match nlu.entity_f64("number").filter(|n| *n >= 1.0 && n.fract() == 0.0) {
                Some(n) => {
                    let alert_id = n as u64;
                    let exists = alerts.get(&session, alert_id).is_some_and(|r| r.active);
                    match (exists, commit) {
                        (false, _) => format!("You have no active alert {alert_id}."),
                        (true, false) => format!("I will delete alert {alert_id}."),
                        (true, true) => {
                            match alerts.deactivate(&session, alert_id, || self.world.processes.latest_event_id()) {
                                Some(_) => format!("Alert {alert_id} is deleted."),
                                None => format!("You have no active alert {alert_id}."),
                            }
                        }
                    }
                }
                None => "Which alert should I delete? Give its number.".to_string(),
            },
            _ => return AgentPreview::new(ids::ALERTS, text(""), 0.0, false),
        };
        AgentPreview::new(ids::ALERTS, text(reply), nlu.confidence, false)
    }
}

fn role_word(k: EventKind) -> &'static str {
    match k {
        EventKind::ManagerApproved | EventKind::ManagerRejected => "manager",
        _ => "director",
    }
}

#[async_trait]
impl Agent for AlertsAgent {
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
