use std::collections::BTreeMap;
use std::sync::Arc;

use async_trait::async_trait;

use super::{ids, text, DocLookup, World, LOAN_PREFIX};
use crate::contract::{
    format_money, Agent, AgentDescriptor, AgentError, AgentPreview, AgentResult, Context, ContextDelta,
    TaxonomyClass, Utterance, Value,
};
use crate::dataquery::TableSchema;
use crate::nlu::{parse_money, parse_number, tokenize, NluModel};
use crate::rules::{FactType, RuleSet};

/// `key: value` lines of a document, keyed by schema column or ruleset fact
/// where a label matches, otherwise by the snake-cased label. Amounts with a
/// currency sign and bare numbers become numbers.
pub fn parse_fields(doc: &str, schema: &TableSchema, ruleset: &RuleSet) -> BTreeMap<String, Value> {
    let mut out = BTreeMap::new();
    for line in doc.lines() {
        let Some((label, raw)) = line.split_once(':') else {
            continue;
        };
        let label_toks = tokenize(label);
        let raw = raw.trim();
        if label_toks.is_empty() || raw.is_empty() {
            continue;
        }
        let key = canonical_key(&label_toks, schema, ruleset);
        let money_fact = ruleset.fact(&key).is_some_and(|f| f.ty == FactType::Money) || schema.is_money(&key);
        let toks = tokenize(raw);
        let number = match toks.as_slice() {
            [t] if raw.contains('$') || money_fact => parse_money(t).or_else(|| parse_number(t)),
            [t] => parse_number(t),
            _ => None,
        };
        out.insert(key, number.map_or_else(|| Value::String(raw.to_string()), Value::Number));
    }
    out
}

fn canonical_key(label: &[String], schema: &TableSchema, ruleset: &RuleSet) -> String {
    for c in &schema.columns {
        if tokenize(&c.name) == label || c.synonyms.iter().any(|s| tokenize(s) == label) {
            return c.name.clone();
        }
    }
    for f in &ruleset.facts {
        if tokenize(&f.key) == label || f.labels.iter().any(|s| tokenize(s) == label) {
            return f.key.clone();
        }
    }
    label.join("_")
}

/// Reads loan documents and publishes their fields as `loan.*` context.
pub struct ContentAnalyzerAgent {
    descriptor: AgentDescriptor,
    model: NluModel,
    world: Arc<World>,
}

impl ContentAnalyzerAgent {
    pub fn new(model: NluModel, world: Arc<World>) -> Self {
        Self {
            descriptor: AgentDescriptor::new(
                ids::CONTENT_ANALYZER,
                "Content Analyzer",
                TaxonomyClass::InformationRetrieval,
                false,
            )
            .produces("loan.*"),
            model,
            world,
        }
    }

    fn respond(&self, u: &Utterance) -> AgentPreview {
        let nlu = self.model.classify(&u.text);
        let (reply, confidence, updates) = match self.world.documents.resolve(u) {
            DocLookup::Found { name, text } => {
                let fields = parse_fields(&text, &self.world.loan_schema, &self.world.ruleset);
                if fields.is_empty() {
                    (format!("I could not find any fields in {name}."), 0.4, ContextDelta::new())
                } else {
                    let mut updates = ContextDelta::new().set_shared(format!("{LOAN_PREFIX}document"), name.clone());
                    let mut parts = Vec::new();
                    for (k, v) in &fields {
                        let shown = match v {
                            Value::Number(n) if self.is_money(k) => format_money(*n),
                            Value::Number(n) => crate::contract::format_number(*n),
                            other => other.as_str().unwrap_or_default().to_string(),
                        };
                        parts.push(format!("{} {shown}", k.replace('_', " ")));
                        updates = updates.set_shared(format!("{LOAN_PREFIX}{k}"), v.clone());
                    }
                    (format!("From {name} I read: {}.", parts.join(", ")), 0.5 + 0.5 * nlu.confidence, updates)
                }
            }
            DocLookup::Missing(name) => (
                format!("I could not find a document called {name}."),
                if nlu.confidence > 0.0 { 0.4 } else { 0.2 },
                ContextDelta::new(),
            ),
            DocLookup::NoReference => (
                "Which document should I read?".to_string(),
                0.2 * nlu.confidence,
                ContextDelta::new(),
            ),
        };
        AgentPreview::new(ids::CONTENT_ANALYZER, text(reply), confidence, false).with_updates(updates)
    }

    fn is_money(&self, key: &str) -> bool {
        self.world.loan_schema.is_money(key)
            || self.world.ruleset.fact(key).is_some_and(|f| f.ty == FactType::Money)
    }
}

#[async_trait]
impl Agent for ContentAnalyzerAgent {
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
