//! Ordered, first-match decision rules over a typed fact set.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contract::{format_money, format_number, Value};
use crate::dataquery::Comparator;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RulesError {
    #[error("ruleset: {0}")]
    Load(String),
    #[error("fact `{key}` should be {expected}")]
    FactType { key: String, expected: &'static str },
    #[error("unknown fact `{0}`")]
    UnknownFact(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FactType {
    Number,
    Money,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FactDef {
    pub key: String,
    #[serde(rename = "type")]
    pub ty: FactType,
    pub prompt: String,
    /// Phrases that introduce this fact in free text.
    #[serde(default)]
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Approve,
    Reject,
    Refer,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Approve => "Approve",
            Outcome::Reject => "Reject",
            Outcome::Refer => "Refer",
        }
    }

    pub fn verb(self) -> &'static str {
        match self {
            Outcome::Approve => "approved",
            Outcome::Reject => "rejected",
            Outcome::Refer => "referred",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `fact cmp value`, or `fact cmp value × times` when `times` names another
/// fact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub fact: String,
    pub cmp: Comparator,
    pub value: toml::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub id: String,
    pub conditions: Vec<Condition>,
    pub decision: Outcome,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RuleSet {
    pub id: String,
    pub facts: Vec<FactDef>,
    pub rules: Vec<Rule>,
    pub default_decision: Outcome,
    pub default_rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Decision {
    pub outcome: Outcome,
    pub rationale: String,
    pub fired_rule: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Evaluation {
    Decided(Decision),
    /// Facts the first undecided rule still needs, in schema order.
    MissingFacts(Vec<String>),
}

pub type FactSet = BTreeMap<String, Value>;

enum Truth {
    True,
    False,
    Unknown(BTreeSet<String>),
}

impl RuleSet {
    pub fn fact(&self, key: &str) -> Option<&FactDef> {
        self.facts.iter().find(|f| f.key == key)
    }

    fn schema_order(&self, keys: impl IntoIterator<Item = String>) -> Vec<String> {
        let keys: BTreeSet<String> = keys.into_iter().collect();
        self.facts
            .iter()
            .filter(|f| keys.contains(&f.key))
            .map(|f| f.key.clone())
            .collect()
    }

    fn validate(&self) -> Result<(), RulesError> {
        let load = |m: String| Err(RulesError::Load(m));
        if self.rules.is_empty() {
            return load(format!("`{}` has no rules", self.id));
        }
        let mut fact_keys = BTreeSet::new();
        for f in &self.facts {
            if !fact_keys.insert(f.key.as_str()) {
                return load(format!("fact `{}` declared twice", f.key));
            }
        }
        let mut ids = BTreeSet::new();
        for r in &self.rules {
            if !ids.insert(r.id.as_str()) {
                return load(format!("duplicate rule id `{}`", r.id));
            }
            if r.conditions.is_empty() {
                return load(format!("rule `{}` has no conditions", r.id));
            }
            for c in &r.conditions {
                let Some(def) = self.fact(&c.fact) else {
                    return load(format!("rule `{}` uses unknown fact `{}`", r.id, c.fact));
                };
                match def.ty {
                    FactType::Number | FactType::Money => {
                        if c.value.as_float().or(c.value.as_integer().map(|i| i as f64)).is_none() {
                            return load(format!("rule `{}`: `{}` needs a numeric literal", r.id, c.fact));
                        }
                        if let Some(t) = &c.times {
                            match self.fact(t).map(|d| d.ty) {
                                Some(FactType::Number | FactType::Money) => {}
                                Some(FactType::Text) => return load(format!("rule `{}`: `{t}` is not numeric", r.id)),
                                None => return load(format!("rule `{}` uses unknown fact `{t}`", r.id)),
                            }
                        }
                    }
                    FactType::Text => {
                        if c.value.as_str().is_none() || c.times.is_some() {
                            return load(format!("rule `{}`: `{}` needs a text literal", r.id, c.fact));
                        }
                        if !matches!(c.cmp, Comparator::Eq | Comparator::Ne) {
                            return load(format!("rule `{}`: text fact `{}` only supports = and !=", r.id, c.fact));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn check_facts(&self, facts: &FactSet) -> Result<(), RulesError> {
        for (k, v) in facts {
            let def = self.fact(k).ok_or_else(|| RulesError::UnknownFact(k.clone()))?;
            let ok = match def.ty {
                FactType::Number | FactType::Money => v.as_f64().is_some_and(f64::is_finite),
                FactType::Text => v.as_str().is_some(),
            };
            if !ok {
                return Err(RulesError::FactType {
                    key: k.clone(),
                    expected: if def.ty == FactType::Text { "text" } else { "a number" },
                });
            }
        }
        Ok(())
    }

    fn condition(&self, c: &Condition, facts: &FactSet) -> Truth {
        let mut missing = BTreeSet::new();
        for key in std::iter::once(&c.fact).chain(c.times.iter()) {
            if !facts.contains_key(key) {
                missing.insert(key.clone());
            }
        }
        if !missing.is_empty() {
            return Truth::Unknown(missing);
        }
        let holds = match (&facts[&c.fact], c.value.as_str()) {
            (Value::String(s), Some(lit)) => {
                c.cmp.holds(s.to_lowercase().cmp(&lit.to_lowercase()))
            }
            (v, _) => {
                let lhs = v.as_f64().unwrap_or(f64::NAN);
                let lit = c.value.as_float().or(c.value.as_integer().map(|i| i as f64)).unwrap_or(f64::NAN);
                let rhs = match &c.times {
                    Some(t) => lit * facts[t].as_f64().unwrap_or(f64::NAN),
                    None => lit,
                };
                lhs.partial_cmp(&rhs).is_some_and(|o| c.cmp.holds(o))
            }
        };
        if holds {
            Truth::True
        } else {
            Truth::False
        }
    }

    fn rule(&self, rule: &Rule, facts: &FactSet) -> Truth {
        let mut missing = BTreeSet::new();
        for c in &rule.conditions {
            match self.condition(c, facts) {
                Truth::False => return Truth::False,
                Truth::Unknown(m) => missing.extend(m),
                Truth::True => {}
            }
        }
        if missing.is_empty() {
            Truth::True
        } else {
            Truth::Unknown(missing)
        }
    }

    fn render(&self, template: &str, facts: &FactSet) -> String {
        let mut out = template.to_string();
        for def in &self.facts {
            if let Some(v) = facts.get(&def.key) {
                let text = match (def.ty, v.as_f64()) {
                    (FactType::Money, Some(n)) => format_money(n),
                    (FactType::Number, Some(n)) => format_number(n),
                    _ => v.to_string(),
                };
                out = out.replace(&format!("{{{}}}", def.key), &text);
            }
        }
        out
    }
}

/// Parses and validates a ruleset document; nothing is returned unless the
/// whole document is valid.
pub fn load_ruleset(document: &str) -> Result<RuleSet, RulesError> {
    let rs: RuleSet = toml::from_str(document).map_err(|e| RulesError::Load(e.to_string()))?;
    rs.validate()?;
    Ok(rs)
}

/// Every fact any rule reads, in the order the facts are declared.
pub fn required_facts(ruleset: &RuleSet) -> Vec<String> {
    ruleset.schema_order(
        ruleset
            .rules
            .iter()
            .flat_map(|r| r.conditions.iter())
            .flat_map(|c| std::iter::once(c.fact.clone()).chain(c.times.clone())),
    )
}

/// First-match evaluation. A rule with a known-false condition is skipped
/// even if other facts it reads are missing; the first rule that can be
/// neither confirmed nor ruled out reports the facts it lacks.
pub fn evaluate_rules(ruleset: &RuleSet, facts: &FactSet) -> Result<Evaluation, RulesError> {
    ruleset.check_facts(facts)?;
    for rule in &ruleset.rules {
        match ruleset.rule(rule, facts) {
            Truth::False => continue,
            Truth::True => {
                return Ok(Evaluation::Decided(Decision {
                    outcome: rule.decision,
                    rationale: ruleset.render(&rule.rationale, facts),
                    fired_rule: Some(rule.id.clone()),
                }))
            }
            Truth::Unknown(missing) => {
                return Ok(Evaluation::MissingFacts(ruleset.schema_order(missing)))
            }
        }
    }
    Ok(Evaluation::Decided(Decision {
        outcome: ruleset.default_decision,
        rationale: ruleset.render(&ruleset.default_rationale, facts),
        fired_rule: None,
    }))
}
