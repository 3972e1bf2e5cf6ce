use std::sync::Arc;

use async_trait::async_trait;

use super::{continuing, ids, text, World, LAST_QUERY, LAST_RESULT};
use crate::contract::{
    format_money, format_number, Agent, AgentDescriptor, AgentError, AgentPreview, AgentResult, Cell, Context,
    ContextDelta, ResponsePayload, TaxonomyClass, Utterance, Value,
};
use crate::dataquery::{evaluate, parse_query, render, AggFn, QueryAst, QueryResult, DISPLAY_LIMIT};
use crate::nlu::NluModel;

const CLARIFY: &str = "clarify";

/// Answers questions over the loan table with the query grammar.
pub struct DataQueryAgent {
    descriptor: AgentDescriptor,
    model: NluModel,
    world: Arc<World>,
}

impl DataQueryAgent {
    pub fn new(model: NluModel, world: Arc<World>) -> Self {
        Self {
            descriptor: AgentDescriptor::new(ids::DATA_QUERY, "Data Query", TaxonomyClass::InformationRetrieval, false)
                .produces(LAST_RESULT)
                .produces(LAST_QUERY),
            model,
            world,
        }
    }

    fn respond(&self, u: &Utterance, ctx: &Context) -> AgentPreview {
        let nlu = self.model.classify(&u.text);
        let schema = &self.world.loan_schema;
        match parse_query(&u.text, schema) {
            Ok(ast) => {
                let sticky = continuing(ctx, &self.descriptor, CLARIFY);
                let confidence = nlu.confidence.max(0.8);
                match evaluate(&ast, &self.world.dataset.loans) {
                    Ok(result) => {
                        let query = render(&ast, schema).unwrap_or_else(|_| u.text.clone());
                        let updates = ContextDelta::new()
                            .set_shared(LAST_RESULT, Value::Table(result.to_payload()))
                            .set_shared(LAST_QUERY, query)
                            .remove_scoped(ids::DATA_QUERY, CLARIFY);
                        AgentPreview::new(ids::DATA_QUERY, self.answer(&ast, &result), confidence, sticky)
                            .with_updates(updates)
                    }
                    Err(e) => AgentPreview::new(
                        ids::DATA_QUERY,
                        text(format!("I could not run that query: {e}.")),
                        0.5 * confidence,
                        false,
                    ),
                }
            }
            Err(e) => {
                let frac = e.prefix_fraction();
                let confidence = if e.subject_found {
                    0.6 * (0.5 + 0.5 * frac)
                } else {
                    0.5 * nlu.confidence * frac
                };
                let mut msg = String::from("I did not understand that question");
                if !e.prefix.is_empty() {
                    msg.push_str(&format!(" after \"{}\"", e.prefix));
                }
                if let Some(o) = &e.offending {
                    msg.push_str(&format!(" at \"{o}\""));
                }
                msg.push_str(&format!(": {}. Try something like \"list borrowers with credit score less than 600\".", e.message));
                let updates = ContextDelta::new().set_scoped(ids::DATA_QUERY, CLARIFY, e.prefix.clone());
                AgentPreview::new(ids::DATA_QUERY, text(msg), confidence, false).with_updates(updates)
            }
        }
    }

    fn value(&self, column: Option<&str>, func: AggFn, v: f64) -> String {
        match column {
            Some(c) if func != AggFn::Count && self.world.loan_schema.is_money(c) => format_money(v),
            _ => format_number(v),
        }
    }

    fn answer(&self, ast: &QueryAst, result: &QueryResult) -> ResponsePayload {
        let schema = &self.world.loan_schema;
        match (&ast.group_by, &ast.aggregate) {
            (Some(_), Some(agg)) if ast.top_k.is_some() => {
                if result.rows.is_empty() {
                    return text("No records match that.");
                }
                let items: Vec<String> = result
                    .rows
                    .iter()
                    .enumerate()
                    .map(|(i, row)| {
                        let v = row.get(1).and_then(Cell::as_f64).unwrap_or(0.0);
                        let name = row.first().map(ToString::to_string).unwrap_or_default();
                        format!("{}). {} for {name}", i + 1, self.value(agg.column.as_deref(), agg.func, v))
                    })
                    .collect();
                text(format!("These are the {} value: {}", agg_word(agg.func), items.join(", ")))
            }
            (None, Some(agg)) => {
                let v = result.scalar().unwrap_or(0.0);
                match (&agg.column, agg.func) {
                    (Some(c), f) if f != AggFn::Count => text(format!(
                        "The {} {} is {}.",
                        agg_word(f),
                        schema.phrase(c),
                        self.value(Some(c), f, v)
                    )),
                    _ => text(format!("Total records found are {}.", format_number(v))),
                }
            }
            _ => {
                let shown = result.truncated_to(DISPLAY_LIMIT);
                let mut msg = format!("Total records found are {}.", result.total_count);
                if shown.truncated {
                    msg.push_str(&format!(" Showing the first {DISPLAY_LIMIT}."));
                }
                ResponsePayload::composite(vec![text(msg), ResponsePayload::table(shown.to_payload())])
            }
        }
    }
}

fn agg_word(f: AggFn) -> &'static str {
    match f {
        AggFn::Count => "count",
        AggFn::Sum => "total",
        AggFn::Avg => "average",
        AggFn::Min => "minimum",
        AggFn::Max => "maximum",
    }
}

#[async_trait]
impl Agent for DataQueryAgent {
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
