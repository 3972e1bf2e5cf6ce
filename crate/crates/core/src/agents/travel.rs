use std::sync::Arc;

use async_trait::async_trait;

use super::{ids, plural, text, World, LAST_RESULT};
use crate::contract::{
    Agent, AgentDescriptor, AgentError, AgentPreview, AgentResult, Cell, Column, ColumnType, Context, ContextDelta,
    ResponsePayload, TablePayload, TaxonomyClass, Utterance, Value,
};
use crate::dataquery::DISPLAY_LIMIT;
use crate::nlu::{tokenize, NluModel};
use crate::process::{InstanceFilter, ProcessInstance};

const PROCESS: &str = "travel";

/// Counts and lists travel requests held by the process engine.
pub struct TravelQueryAgent {
    descriptor: AgentDescriptor,
    model: NluModel,
    world: Arc<World>,
}

impl TravelQueryAgent {
    pub fn new(model: NluModel, world: Arc<World>) -> Self {
        Self {
            descriptor: AgentDescriptor::new(
                ids::TRAVEL_QUERY,
                "Travel Query",
                TaxonomyClass::InformationRetrieval,
                false,
            )
            .produces(LAST_RESULT),
            model,
            world,
        }
    }

    fn in_state(&self, i: &ProcessInstance, state: Option<&str>) -> bool {
        let terminal = self
            .world
            .processes
            .definition(&i.process_id)
            .is_some_and(|d| d.is_terminal(&i.state));
        match state {
            None => true,
            Some("pending") => !terminal,
            Some(s) => i.state.eq_ignore_ascii_case(s),
        }
    }

    fn respond(&self, u: &Utterance, ctx: &Context) -> AgentPreview {
        let nlu = self.model.classify(&u.text);
        let intent = match nlu.intent_id.as_deref() {
            Some(i @ ("count" | "list")) => i,
            _ => return AgentPreview::new(ids::TRAVEL_QUERY, text(""), 0.0, false),
        };
        let tokens = tokenize(&u.text);
        let person = nlu.entity_str("person").map(str::to_string).or_else(|| {
            tokens
                .iter()
                .any(|t| t == "i" || t == "my")
                .then(|| self.world.current_user(ctx))
        });
        let state = nlu.entity_str("state");
        let found: Vec<ProcessInstance> = self
            .world
            .processes
            .query_instances(&InstanceFilter {
                process_id: Some(PROCESS.into()),
                subject: person.clone(),
                state: None,
            })
            .into_iter()
            .filter(|i| self.in_state(i, state))
            .collect();

        let qualifier = state.map(|s| format!("{s} ")).unwrap_or_default();
        let n = found.len();
        let summary = match &person {
            Some(p) => format!("{p} has {}", plural(n, &format!("{qualifier}application"), &format!("{qualifier}applications"))),
            None => format!(
                "There {} {}",
                if n == 1 { "is" } else { "are" },
                plural(n, &format!("{qualifier}travel request"), &format!("{qualifier}travel requests"))
            ),
        };
        let table = self.table(&found);
        let response = if intent == "count" {
            text(summary)
        } else {
            let shown = table.truncated_to(DISPLAY_LIMIT);
            ResponsePayload::composite(vec![text(format!("{summary}.")), ResponsePayload::table(shown)])
        };
        let updates = ContextDelta::new().set_shared(LAST_RESULT, Value::Table(table));
        AgentPreview::new(ids::TRAVEL_QUERY, response, nlu.confidence, false).with_updates(updates)
    }

    fn table(&self, found: &[ProcessInstance]) -> TablePayload {
        let field = |i: &ProcessInstance, k: &str| {
            Cell::Text(i.form.get(k).and_then(Value::as_str).unwrap_or_default().to_string())
        };
        TablePayload::new(
            vec![
                Column::new("instance_id", ColumnType::Number),
                Column::new("employee", ColumnType::String),
                Column::new("destination", ColumnType::String),
                Column::new("event", ColumnType::String),
                Column::new("state", ColumnType::String),
            ],
            found
                .iter()
                .map(|i| {
                    vec![
                        Cell::Number(i.instance_id as f64),
                        Cell::Text(i.subject.clone()),
                        field(i, "destination"),
                        field(i, "event"),
                        Cell::Text(i.state.clone()),
                    ]
                })
                .collect(),
        )
    }
}

#[async_trait]
impl Agent for TravelQueryAgent {
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
