use std::collections::BTreeMap;
use std::sync::Arc;

use async_trait::async_trait;

use super::{continuing, ids, text, World, LOAN_DECISION, LOAN_PREFIX};
use crate::contract::{
    Agent, AgentDescriptor, AgentError, AgentPreview, AgentResult, Context, ContextDelta, TaxonomyClass, Utterance,
    Value,
};
use crate::nlu::{slot_step, EntityKind, NluModel, SlotAction, SlotFrame, SlotSpec};
use crate::rules::{evaluate_rules, Evaluation, FactType};

const FRAME: &str = "frame";

/// Recommends a loan decision, asking for whatever facts the ruleset still
/// needs one at a time.
pub struct BusinessRulesAgent {
    descriptor: AgentDescriptor,
    model: NluModel,
    world: Arc<World>,
}

impl BusinessRulesAgent {
    pub fn new(model: NluModel, world: Arc<World>) -> Self {
        Self {
            descriptor: AgentDescriptor::new(ids::BUSINESS_RULES, "Business Rules", TaxonomyClass::DataAnalytics, false)
                .consumes("loan.*")
                .produces(LOAN_DECISION),
            model,
            world,
        }
    }

    /// A fresh frame over the ruleset's facts. Facts are not required at
    /// the frame level; the ruleset decides what is still missing.
    fn new_frame(&self) -> SlotFrame {
        let slots = self
            .world
            .ruleset
            .facts
            .iter()
            .map(|f| SlotSpec {
                slot_id: f.key.clone(),
                kind: match f.ty {
                    FactType::Number => EntityKind::Number,
                    FactType::Money => EntityKind::Money,
                    FactType::Text => EntityKind::Enum,
                },
                prompt: f.prompt.clone(),
                required: false,
                labels: f.labels.clone(),
            })
            .collect();
        SlotFrame::new("loan_decision", slots)
    }

    /// Facts already published by other agents under `loan.`.
    fn shared_facts(&self, ctx: &Context) -> BTreeMap<String, Value> {
        ctx.shared_with_prefix(LOAN_PREFIX)
            .filter_map(|(k, v)| {
                let key = &k[LOAN_PREFIX.len()..];
                let fact = self.world.ruleset.fact(key)?;
                let ok = match fact.ty {
                    FactType::Number | FactType::Money => v.as_f64().is_some(),
                    FactType::Text => v.as_str().is_some(),
                };
                ok.then(|| (key.to_string(), v.clone()))
            })
            .collect()
    }

    fn respond(&self, u: &Utterance, ctx: &Context) -> AgentPreview {
        let id = ids::BUSINESS_RULES;
        let nlu = self.model.classify(&u.text);
        let resumed = continuing(ctx, &self.descriptor, FRAME)
            .then(|| ctx.scoped(id, FRAME).and_then(|v| v.to_serde::<SlotFrame>().ok()))
            .flatten()
            .filter(|f| !f.cancelled);
        let sticky = resumed.is_some();
        let mut frame = match resumed {
            Some(f) => f,
            None if nlu.is("decide") => self.new_frame(),
            None => return AgentPreview::new(id, text(""), 0.0, false),
        };
        for (k, v) in self.shared_facts(ctx) {
            frame.filled.entry(k).or_insert(v);
        }
        let base = if sticky { 1.0 } else { nlu.confidence };

        let Ok((mut next, action)) = slot_step(&frame, &self.model, &nlu, &u.text) else {
            return AgentPreview::new(id, text(""), 0.0, false);
        };
        match action {
            SlotAction::Cancelled => {
                let updates = ContextDelta::new().remove_scoped(id, FRAME);
                AgentPreview::new(id, text("OK, I stopped the loan decision."), base, sticky).with_updates(updates)
            }
            SlotAction::Reask { text: reask, .. } => {
                AgentPreview::new(id, text(reask), 0.5, sticky)
            }
            SlotAction::Ask { .. } | SlotAction::Complete(_) => {
                match evaluate_rules(&self.world.ruleset, &next.filled) {
                    Ok(Evaluation::Decided(d)) => {
                        let mut decision = BTreeMap::new();
                        decision.insert("outcome".to_string(), Value::from(d.outcome.as_str()));
                        decision.insert("rationale".to_string(), Value::from(d.rationale.clone()));
                        if let Some(r) = &d.fired_rule {
                            decision.insert("rule".to_string(), Value::from(r.as_str()));
                        }
                        let updates = ContextDelta::new()
                            .remove_scoped(id, FRAME)
                            .set_shared(LOAN_DECISION, Value::Map(decision));
                        let reply = format!("The loan application should be {}: {}.", d.outcome.verb(), d.rationale);
                        AgentPreview::new(id, text(reply), base, sticky).with_updates(updates)
                    }
                    Ok(Evaluation::MissingFacts(missing)) => {
                        let Some(fact) = missing.first().and_then(|k| self.world.ruleset.fact(k)) else {
                            return AgentPreview::new(id, text(""), 0.0, false);
                        };
                        next.pending_slot = Some(fact.key.clone());
                        let Ok(saved) = Value::from_serde(&next) else {
                            return AgentPreview::new(id, text(""), 0.0, false);
                        };
                        let updates = ContextDelta::new().set_scoped(id, FRAME, saved);
                        AgentPreview::new(id, text(fact.prompt.clone()), base, sticky).with_updates(updates)
                    }
                    Err(e) => AgentPreview::new(id, text(format!("I could not check those facts: {e}.")), 0.5 * base, sticky),
                }
            }
        }
    }
}

#[async_trait]
impl Agent for BusinessRulesAgent {
    fn descriptor(&self) -> &AgentDescriptor {
        &self.descriptor
    }

    async fn preview(&self, u: &Utterance, ctx: &Context) -> Result<AgentPreview, AgentError> {
        Ok(self.respond(u, ctx))
    }

    async fn execute(&self, u: &Utterance, ctx: &Context) -> Result<AgentResult, AgentError> {
        Ok(self.respond(u, ctx))
    }
}
