use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::normalize::{parse_date, parse_money, parse_number, tokenize};
use super::NluError;
use crate::contract::Value;

const MAX_PLACEHOLDER_SPAN: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntityKind {
    Number,
    Money,
    PersonName,
    ColumnName,
    Date,
    Enum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityDef {
    pub id: String,
    pub kind: EntityKind,
    /// Allowed values of an `Enum` entity.
    #[serde(default)]
    pub literals: Vec<String>,
    /// Surface form to canonical value. For `ColumnName` this is the column
    /// synonym table.
    #[serde(default)]
    pub synonyms: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentDef {
    pub id: String,
    #[serde(default)]
    pub patterns: Vec<String>,
    #[serde(default)]
    pub keywords: BTreeMap<String, f64>,
    #[serde(default)]
    pub examples: Vec<String>,
}

/// Declarative intent/entity model, one per agent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelDef {
    #[serde(default)]
    pub intents: Vec<IntentDef>,
    #[serde(default)]
    pub entities: Vec<EntityDef>,
    #[serde(default)]
    pub cancel_patterns: Vec<String>,
}

impl ModelDef {
    pub fn from_toml(text: &str) -> Result<Self, NluError> {
        toml::from_str(text).map_err(|e| NluError::Model(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NluResult {
    pub intent_id: Option<String>,
    pub confidence: f64,
    pub entities: BTreeMap<String, Value>,
    pub matched_span_fraction: f64,
}

impl NluResult {
    pub fn none() -> Self {
        Self {
            intent_id: None,
            confidence: 0.0,
            entities: BTreeMap::new(),
            matched_span_fraction: 0.0,
        }
    }

    pub fn is(&self, intent: &str) -> bool {
        self.intent_id.as_deref() == Some(intent)
    }

    pub fn entity_str(&self, id: &str) -> Option<&str> {
        self.entities.get(id).and_then(Value::as_str)
    }

    pub fn entity_f64(&self, id: &str) -> Option<f64> {
        self.entities.get(id).and_then(Value::as_f64)
    }
}

#[derive(Debug, Clone)]
enum PatternToken {
    Word(String),
    Slot(usize),
    Wildcard,
}

#[derive(Debug, Clone)]
struct CompiledEntity {
    def: EntityDef,
    /// Token phrases with their canonical value, longest first.
    phrases: Vec<(Vec<String>, String)>,
}

impl CompiledEntity {
    fn max_span(&self) -> usize {
        self.phrases.first().map_or(1, |(p, _)| p.len()).max(1)
    }

    fn accept(&self, span: &[String]) -> Option<Value> {
        match self.def.kind {
            EntityKind::Number => (span.len() == 1)
                .then(|| parse_number(&span[0]))
                .flatten()
                .map(Value::Number),
            EntityKind::Money => (span.len() == 1)
                .then(|| parse_money(&span[0]))
                .flatten()
                .map(Value::Number),
            EntityKind::Date => (span.len() == 1)
                .then(|| parse_date(&span[0]))
                .flatten()
                .map(Value::String),
            EntityKind::PersonName | EntityKind::ColumnName | EntityKind::Enum => self
                .phrases
                .iter()
                .find(|(p, _)| p.as_slice() == span)
                .map(|(_, canonical)| Value::String(canonical.clone())),
        }
    }
}

#[derive(Debug, Clone)]
struct CompiledIntent {
    id: String,
    patterns: Vec<Vec<PatternToken>>,
    keywords: Vec<(Vec<String>, f64)>,
    total_weight: f64,
    /// Entities that appear as placeholders in this intent's patterns.
    entity_ids: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mention {
    pub entity_id: String,
    pub start: usize,
    pub end: usize,
    pub value: Value,
}

/// An immutable, compiled NLU model.
#[derive(Debug, Clone)]
pub struct NluModel {
    intents: Vec<CompiledIntent>,
    entities: Vec<CompiledEntity>,
    cancel_patterns: Vec<Vec<String>>,
}

impl NluModel {
    /// Compiles a model. `people` is the person-name gazetteer used by
    /// `PersonName` entities.
    pub fn compile(def: &ModelDef, people: &[String]) -> Result<Self, NluError> {
        let mut entities = Vec::new();
        for e in &def.entities {
            if entities.iter().any(|c: &CompiledEntity| c.def.id == e.id) {
                return Err(NluError::Model(format!("duplicate entity `{}`", e.id)));
            }
            let mut phrases: Vec<(Vec<String>, String)> = Vec::new();
            match e.kind {
                EntityKind::Enum => {
                    if e.literals.is_empty() {
                        return Err(NluError::Model(format!(
                            "enum entity `{}` has no literals",
                            e.id
                        )));
                    }
                    for lit in &e.literals {
                        phrases.push((tokenize(lit), lit.clone()));
                    }
                    for (surface, canonical) in &e.synonyms {
                        if !e.literals.contains(canonical) {
                            return Err(NluError::Model(format!(
                                "synonym `{surface}` of `{}` maps to unknown literal `{canonical}`",
                                e.id
                            )));
                        }
                        phrases.push((tokenize(surface), canonical.clone()));
                    }
                }
                EntityKind::ColumnName => {
                    for (surface, canonical) in &e.synonyms {
                        phrases.push((tokenize(surface), canonical.clone()));
                    }
                }
                EntityKind::PersonName => {
                    for name in people {
                        phrases.push((tokenize(name), name.clone()));
                    }
                }
                _ => {}
            }
            phrases.retain(|(p, _)| !p.is_empty());
            phrases.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
            entities.push(CompiledEntity {
                def: e.clone(),
                phrases,
            });
        }

        let mut intents = Vec::new();
        for intent in &def.intents {
            if intent.patterns.is_empty() && intent.keywords.is_empty() {
                return Err(NluError::Model(format!(
                    "intent `{}` needs at least one pattern or keyword",
                    intent.id
                )));
            }
            let mut patterns = Vec::new();
            let mut entity_ids = BTreeSet::new();
            for p in &intent.patterns {
                let compiled = compile_pattern(p, &entities)?;
                for t in &compiled {
                    if let PatternToken::Slot(i) = t {
                        entity_ids.insert(*i);
                    }
                }
                patterns.push(compiled);
            }
            let mut keywords = Vec::new();
            for (k, w) in &intent.keywords {
                if !w.is_finite() || *w <= 0.0 {
                    return Err(NluError::Model(format!(
                        "keyword `{k}` of `{}` must have a positive weight",
                        intent.id
                    )));
                }
                let toks = tokenize(k);
                if !toks.is_empty() {
                    keywords.push((toks, *w));
                }
            }
            let total_weight = keywords.iter().map(|(_, w)| w).sum();
            intents.push(CompiledIntent {
                id: intent.id.clone(),
                patterns,
                keywords,
                total_weight,
                entity_ids,
            });
        }

        let cancel_patterns = def
            .cancel_patterns
            .iter()
            .map(|p| tokenize(p))
            .filter(|p| !p.is_empty())
            .collect();

        Ok(Self {
            intents,
            entities,
            cancel_patterns,
        })
    }

    pub fn intent_ids(&self) -> impl Iterator<Item = &str> {
        self.intents.iter().map(|i| i.id.as_str())
    }

    /// Classifies `text`. A full pattern match scores 1.0; otherwise the
    /// best intent by weighted keyword coverage times matched span fraction.
    pub fn classify(&self, text: &str) -> NluResult {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return NluResult::none();
        }
        let mentions = self.mentions(&tokens);
        let mut entities = group_mentions(&mentions);
        if let Some(conditions) = self.conditions(&mentions) {
            entities.insert("conditions".to_string(), conditions);
        }

        for intent in &self.intents {
            for pattern in &intent.patterns {
                let mut captures = Vec::new();
                if self.match_pattern(pattern, &tokens, &mut captures) {
                    for (entity, value) in captures {
                        entities.insert(self.entities[entity].def.id.clone(), value);
                    }
                    return NluResult {
                        intent_id: Some(intent.id.clone()),
                        confidence: 1.0,
                        entities,
                        matched_span_fraction: 1.0,
                    };
                }
            }
        }

        let best = self
            .keyword_scores_with(&tokens, &mentions)
            .into_iter()
            .fold(None::<(usize, f64, f64)>, |best, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        match best {
            Some((i, score, span)) if score > 0.0 => NluResult {
                intent_id: Some(self.intents[i].id.clone()),
                confidence: score,
                entities,
                matched_span_fraction: span,
            },
            _ => NluResult {
                entities,
                ..NluResult::none()
            },
        }
    }

    /// Keyword-path confidence for every intent, ignoring patterns.
    pub fn keyword_scores(&self, text: &str) -> Vec<(String, f64)> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return self.intents.iter().map(|i| (i.id.clone(), 0.0)).collect();
        }
        let mentions = self.mentions(&tokens);
        self.keyword_scores_with(&tokens, &mentions)
            .into_iter()
            .map(|(i, s, _)| (self.intents[i].id.clone(), s))
            .collect()
    }

    /// True when some pattern of some intent matches `text` in full.
    pub fn matches_pattern(&self, text: &str) -> bool {
        let tokens = tokenize(text);
        self.intents.iter().flat_map(|i| &i.patterns).any(|p| {
            let mut captures = Vec::new();
            self.match_pattern(p, &tokens, &mut captures)
        })
    }

    fn keyword_scores_with(&self, tokens: &[String], mentions: &[Mention]) -> Vec<(usize, f64, f64)> {
        self.intents
            .iter()
            .enumerate()
            .map(|(idx, intent)| {
                if intent.total_weight == 0.0 {
                    return (idx, 0.0, 0.0);
                }
                let mut covered = vec![false; tokens.len()];
                let mut matched_weight = 0.0;
                for (kw, w) in &intent.keywords {
                    let mut hit = false;
                    for start in find_all(tokens, kw) {
                        hit = true;
                        covered[start..start + kw.len()].iter_mut().for_each(|c| *c = true);
                    }
                    if hit {
                        matched_weight += w;
                    }
                }
                for m in mentions {
                    let entity_idx = self.entities.iter().position(|e| e.def.id == m.entity_id);
                    if entity_idx.is_some_and(|e| intent.entity_ids.contains(&e)) {
                        covered[m.start..m.end].iter_mut().for_each(|c| *c = true);
                    }
                }
                let span = covered.iter().filter(|c| **c).count() as f64 / tokens.len() as f64;
                let coverage = matched_weight / intent.total_weight;
                (idx, (coverage * span).clamp(0.0, 1.0), span)
            })
            .collect()
    }

    /// Entity mentions in `text`, keyed by entity id. Repeated mentions of
    /// one entity become a list.
    pub fn extract_entities(&self, text: &str) -> BTreeMap<String, Value> {
        let tokens = tokenize(text);
        let mentions = self.mentions(&tokens);
        let mut out = group_mentions(&mentions);
        if let Some(conditions) = self.conditions(&mentions) {
            out.insert("conditions".to_string(), conditions);
        }
        out
    }

    /// Greedy longest-match scan, run independently for each entity.
    pub fn mentions(&self, tokens: &[String]) -> Vec<Mention> {
        let mut out = Vec::new();
        for e in &self.entities {
            let max = e.max_span();
            let mut i = 0;
            while i < tokens.len() {
                let longest = (1..=max.min(tokens.len() - i))
                    .rev()
                    .find_map(|len| e.accept(&tokens[i..i + len]).map(|v| (len, v)));
                match longest {
                    Some((len, value)) => {
                        out.push(Mention {
                            entity_id: e.def.id.clone(),
                            start: i,
                            end: i + len,
                            value,
                        });
                        i += len;
                    }
                    None => i += 1,
                }
            }
        }
        out.sort_by_key(|m| (m.start, m.end));
        out
    }

    /// `(column, comparator, number)` triples read left to right. Requires
    /// the model to declare an entity with id `comparator`. The column is
    /// optional when the utterance leaves it implicit.
    fn conditions(&self, mentions: &[Mention]) -> Option<Value> {
        let cmp_entity = self.entities.iter().find(|e| e.def.id == "comparator")?;
        let kind_of = |id: &str| {
            self.entities
                .iter()
                .find(|e| e.def.id == id)
                .map(|e| e.def.kind)
        };
        let mut out = Vec::new();
        let mut last_column: Option<(&Mention, usize)> = None;
        for (idx, m) in mentions.iter().enumerate() {
            match kind_of(&m.entity_id) {
                Some(EntityKind::ColumnName) => last_column = Some((m, idx)),
                _ if m.entity_id == cmp_entity.def.id => {
                    let number = mentions[idx + 1..].iter().find(|n| {
                        n.start >= m.end
                            && matches!(kind_of(&n.entity_id), Some(EntityKind::Number | EntityKind::Money))
                    });
                    if let Some(number) = number {
                        let mut triple = BTreeMap::new();
                        if let Some((col, _)) = last_column.take() {
                            triple.insert("column".to_string(), col.value.clone());
                        }
                        triple.insert("comparator".to_string(), m.value.clone());
                        triple.insert("number".to_string(), number.value.clone());
                        out.push(Value::Map(triple));
                    }
                }
                _ => {}
            }
        }
        (!out.is_empty()).then_some(Value::List(out))
    }

    pub fn is_cancel(&self, text: &str) -> bool {
        let tokens = tokenize(text);
        self.cancel_patterns
            .iter()
            .any(|p| find_all(&tokens, p).next().is_some())
    }

    fn match_pattern(
        &self,
        pattern: &[PatternToken],
        tokens: &[String],
        captures: &mut Vec<(usize, Value)>,
    ) -> bool {
        let Some((head, rest)) = pattern.split_first() else {
            return tokens.is_empty();
        };
        match head {
            PatternToken::Word(w) => {
                tokens.first() == Some(w) && self.match_pattern(rest, &tokens[1..], captures)
            }
            PatternToken::Wildcard => (0..=tokens.len())
                .any(|skip| self.match_pattern(rest, &tokens[skip..], captures)),
            PatternToken::Slot(entity) => {
                let e = &self.entities[*entity];
                for len in (1..=MAX_PLACEHOLDER_SPAN.min(tokens.len())).rev() {
                    if let Some(v) = e.accept(&tokens[..len]) {
                        let mark = captures.len();
                        captures.push((*entity, v));
                        if self.match_pattern(rest, &tokens[len..], captures) {
                            return true;
                        }
                        captures.truncate(mark);
                    }
                }
                false
            }
        }
    }
}

fn compile_pattern(p: &str, entities: &[CompiledEntity]) -> Result<Vec<PatternToken>, NluError> {
    let mut out = Vec::new();
    for raw in p.split_whitespace() {
        if let Some(name) = raw.strip_prefix('{').and_then(|r| r.strip_suffix('}')) {
            let idx = entities
                .iter()
                .position(|e| e.def.id == name)
                .ok_or_else(|| NluError::Model(format!("pattern `{p}` uses unknown entity `{name}`")))?;
            out.push(PatternToken::Slot(idx));
        } else if raw == "*" {
            out.push(PatternToken::Wildcard);
        } else {
            out.extend(tokenize(raw).into_iter().map(PatternToken::Word));
        }
    }
    if out.is_empty() {
        return Err(NluError::Model(format!("empty pattern `{p}`")));
    }
    Ok(out)
}

fn find_all<'a>(tokens: &'a [String], needle: &'a [String]) -> impl Iterator<Item = usize> + 'a {
    let n = needle.len();
    (0..=tokens.len().saturating_sub(n))
        .filter(move |&i| n > 0 && tokens.len() >= n && tokens[i..i + n] == *needle)
}

fn group_mentions(mentions: &[Mention]) -> BTreeMap<String, Value> {
    let mut grouped: BTreeMap<String, Vec<Value>> = BTreeMap::new();
    for m in mentions {
        grouped.entry(m.entity_id.clone()).or_default().push(m.value.clone());
    }
    grouped
        .into_iter()
        .map(|(k, mut v)| {
            let value = if v.len() == 1 {
                v.remove(0)
            } else {
                Value::List(v)
            };
            (k, value)
        })
        .collect()
}
