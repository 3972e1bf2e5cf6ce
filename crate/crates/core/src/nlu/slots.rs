use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::model::{EntityKind, NluModel, NluResult};
use super::normalize::{parse_date, parse_money, parse_number, tokenize};
use super::NluError;
use crate::contract::Value;

/// How far after a slot label a value may appear ("credit score is 700").
const LABEL_WINDOW: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SlotSpec {
    pub slot_id: String,
    pub kind: EntityKind,
    pub prompt: String,
    pub required: bool,
    /// Phrases that name this slot in free text.
    #[serde(default)]
    pub labels: Vec<String>,
}

impl SlotSpec {
    fn parse_value(&self, token: &str) -> Option<Value> {
        match self.kind {
            EntityKind::Number => parse_number(token).map(Value::Number),
            EntityKind::Money => parse_money(token).map(Value::Number),
            EntityKind::Date => parse_date(token).map(Value::String),
            _ => None,
        }
    }

    fn accepts(&self, value: &Value) -> bool {
        match self.kind {
            EntityKind::Number | EntityKind::Money => value.as_f64().is_some(),
            EntityKind::Date => value.as_str().is_some_and(|s| parse_date(s).is_some()),
            _ => value.as_str().is_some(),
        }
    }
}

/// A multi-turn information-gathering frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SlotFrame {
    pub frame_id: String,
    pub slots: Vec<SlotSpec>,
    #[serde(default)]
    pub filled: BTreeMap<String, Value>,
    #[serde(default)]
    pub pending_slot: Option<String>,
    #[serde(default)]
    pub cancelled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SlotAction {
    Ask { slot_id: String, prompt: String },
    Reask { slot_id: String, text: String },
    Complete(BTreeMap<String, Value>),
    Cancelled,
}

impl SlotAction {
    /// Asking (or re-asking) means the agent expects the next utterance.
    pub fn expects_answer(&self) -> bool {
        matches!(self, SlotAction::Ask { .. } | SlotAction::Reask { .. })
    }
}

impl SlotFrame {
    pub fn new(frame_id: impl Into<String>, slots: Vec<SlotSpec>) -> Self {
        Self {
            frame_id: frame_id.into(),
            slots,
            filled: BTreeMap::new(),
            pending_slot: None,
            cancelled: false,
        }
    }

    pub fn slot(&self, id: &str) -> Option<&SlotSpec> {
        self.slots.iter().find(|s| s.slot_id == id)
    }

    pub fn first_missing(&self) -> Option<&SlotSpec> {
        self.slots
            .iter()
            .find(|s| s.required && !self.filled.contains_key(&s.slot_id))
    }

    pub fn is_complete(&self) -> bool {
        self.first_missing().is_none()
    }

    /// Values for any slots found in `raw_text`: entities keyed by slot id,
    /// then labelled values, then a bare value for the pending slot.
    fn extract(&self, nlu: &NluResult, raw_text: &str) -> BTreeMap<String, Value> {
        let mut found = BTreeMap::new();
        for slot in &self.slots {
            if let Some(v) = nlu.entities.get(&slot.slot_id) {
                if slot.accepts(v) {
                    found.insert(slot.slot_id.clone(), v.clone());
                }
            }
        }

        let tokens = tokenize(raw_text);
        let mut claimed = vec![false; tokens.len()];
        for slot in &self.slots {
            for label in &slot.labels {
                let label = tokenize(label);
                if label.is_empty() || label.len() > tokens.len() {
                    continue;
                }
                for start in 0..=tokens.len() - label.len() {
                    if tokens[start..start + label.len()] != label[..] {
                        continue;
                    }
                    let after = start + label.len();
                    let window = after..(after + LABEL_WINDOW).min(tokens.len());
                    for i in window {
                        if claimed[i] {
                            continue;
                        }
                        if let Some(v) = slot.parse_value(&tokens[i]) {
                            claimed[i] = true;
                            found.insert(slot.slot_id.clone(), v);
                            break;
                        }
                    }
                }
            }
        }

        if let Some(pending) = self.pending_slot.as_deref().and_then(|p| self.slot(p)) {
            if !found.contains_key(&pending.slot_id) {
                let bare = tokens
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !claimed[*i])
                    .find_map(|(_, t)| pending.parse_value(t));
                if let Some(v) = bare {
                    found.insert(pending.slot_id.clone(), v);
                }
            }
        }
        found
    }
}

/// Advances a slot frame by one user utterance.
pub fn slot_step(
    frame: &SlotFrame,
    model: &NluModel,
    nlu: &NluResult,
    raw_text: &str,
) -> Result<(SlotFrame, SlotAction), NluError> {
    if frame.cancelled {
        return Err(NluError::FrameCancelled(frame.frame_id.clone()));
    }
    if model.is_cancel(raw_text) {
        let mut next = frame.clone();
        next.cancelled = true;
        next.pending_slot = None;
        return Ok((next, SlotAction::Cancelled));
    }

    let found = frame.extract(nlu, raw_text);
    if found.is_empty() {
        if let Some(pending) = frame.pending_slot.as_deref().and_then(|p| frame.slot(p)) {
            let text = format!(
                "Sorry, I need a {} value. {}",
                kind_noun(pending.kind),
                pending.prompt
            );
            return Ok((
                frame.clone(),
                SlotAction::Reask {
                    slot_id: pending.slot_id.clone(),
                    text,
                },
            ));
        }
    }

    let mut next = frame.clone();
    next.filled.extend(found);
    match next.first_missing().cloned() {
        Some(slot) => {
            next.pending_slot = Some(slot.slot_id.clone());
            Ok((
                next,
                SlotAction::Ask {
                    slot_id: slot.slot_id,
                    prompt: slot.prompt,
                },
            ))
        }
        None => {
            next.pending_slot = None;
            let filled = next.filled.clone();
            Ok((next, SlotAction::Complete(filled)))
        }
    }
}

fn kind_noun(kind: EntityKind) -> &'static str {
    match kind {
        EntityKind::Number | EntityKind::Money => "numeric",
        EntityKind::Date => "date (YYYY-MM-DD)",
        _ => "text",
    }
}
