//! A small business-process engine: declarative state machines with
//! role-guarded transitions, an append-only event log and an optional
//! on-disk journal.

mod store;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contract::{Role, Value};

pub use store::{InstanceFilter, ProcessStore, StoreSnapshot, Subscription};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProcessError {
    #[error("invalid process definition: {0}")]
    Definition(String),
    #[error("missing required fields: {}", .0.join(", "))]
    Submission(Vec<String>),
    #[error("invalid form: {0}")]
    InvalidForm(String),
    #[error("a {role} cannot {action} a request in state {state}")]
    Authorization {
        state: String,
        action: String,
        role: Role,
    },
    #[error("cannot {action} a request in state {state}")]
    IllegalTransition { state: String, action: String },
    #[error("unknown process `{0}`")]
    UnknownProcess(String),
    #[error("unknown instance {0}")]
    UnknownInstance(u64),
    #[error("journal: {0}")]
    Journal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Submitted,
    ManagerApproved,
    ManagerRejected,
    DirectorApproved,
    DirectorRejected,
    StateChanged,
}

impl EventKind {
    pub const ALL: [EventKind; 6] = [
        EventKind::Submitted,
        EventKind::ManagerApproved,
        EventKind::ManagerRejected,
        EventKind::DirectorApproved,
        EventKind::DirectorRejected,
        EventKind::StateChanged,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Submitted => "Submitted",
            EventKind::ManagerApproved => "ManagerApproved",
            EventKind::ManagerRejected => "ManagerRejected",
            EventKind::DirectorApproved => "DirectorApproved",
            EventKind::DirectorRejected => "DirectorRejected",
            EventKind::StateChanged => "StateChanged",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldType {
    String,
    Number,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormField {
    pub id: String,
    #[serde(rename = "type")]
    pub ty: FieldType,
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: String,
    pub action: String,
    pub role: Role,
    pub to: String,
    pub event: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProcessDefinition {
    pub id: String,
    /// What one instance is called in conversation, e.g. "travel request".
    pub display_name: String,
    pub states: Vec<String>,
    pub initial: String,
    pub terminal: Vec<String>,
    pub transitions: Vec<Transition>,
    #[serde(default)]
    pub form_fields: Vec<FormField>,
}

impl ProcessDefinition {
    pub fn from_toml(text: &str) -> Result<Self, ProcessError> {
        let d: Self = toml::from_str(text).map_err(|e| ProcessError::Definition(e.to_string()))?;
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), ProcessError> {
        let bad = |m: String| Err(ProcessError::Definition(m));
        let states: BTreeSet<&str> = self.states.iter().map(String::as_str).collect();
        if states.len() != self.states.len() {
            return bad(format!("`{}` declares a state twice", self.id));
        }
        if !states.contains(self.initial.as_str()) {
            return bad(format!("initial state `{}` is not declared", self.initial));
        }
        if self.terminal.contains(&self.initial) {
            return bad("the initial state cannot be terminal".into());
        }
        for t in &self.terminal {
            if !states.contains(t.as_str()) {
                return bad(format!("terminal state `{t}` is not declared"));
            }
        }
        let mut seen = HashSet::new();
        for t in &self.transitions {
            for s in [&t.from, &t.to] {
                if !states.contains(s.as_str()) {
                    return bad(format!("transition uses undeclared state `{s}`"));
                }
            }
            if self.is_terminal(&t.from) {
                return bad(format!("terminal state `{}` has an outgoing transition", t.from));
            }
            if t.event == EventKind::Submitted {
                return bad("transitions cannot emit Submitted".into());
            }
            if !seen.insert((t.from.as_str(), t.action.as_str(), t.role)) {
                return bad(format!("duplicate transition {} --{}--> for {}", t.from, t.action, t.role));
            }
        }
        Ok(())
    }

    pub fn is_terminal(&self, state: &str) -> bool {
        self.terminal.iter().any(|t| t == state)
    }

    pub fn actions(&self) -> BTreeSet<&str> {
        self.transitions.iter().map(|t| t.action.as_str()).collect()
    }

    /// The transition a role may take, or why it may not.
    pub fn find_transition(&self, state: &str, action: &str, role: Role) -> Result<&Transition, ProcessError> {
        let illegal = || ProcessError::IllegalTransition {
            state: state.to_string(),
            action: action.to_string(),
        };
        if self.is_terminal(state) {
            return Err(illegal());
        }
        let mut candidates = self
            .transitions
            .iter()
            .filter(|t| t.from == state && t.action == action)
            .peekable();
        if candidates.peek().is_none() {
            return Err(illegal());
        }
        candidates.find(|t| t.role == role).ok_or(ProcessError::Authorization {
            state: state.to_string(),
            action: action.to_string(),
            role,
        })
    }

    /// Checks a submitted form: required fields present and non-blank,
    /// types match, no undeclared fields.
    pub fn check_form(&self, form: &BTreeMap<String, Value>) -> Result<(), ProcessError> {
        for (k, v) in form {
            let Some(field) = self.form_fields.iter().find(|f| &f.id == k) else {
                return Err(ProcessError::InvalidForm(format!("unknown field `{k}`")));
            };
            let ok = match field.ty {
                FieldType::String => v.as_str().is_some(),
                FieldType::Number => v.as_f64().is_some(),
            };
            if !ok {
                return Err(ProcessError::InvalidForm(format!("field `{k}` has the wrong type")));
            }
        }
        let missing: Vec<String> = self
            .form_fields
            .iter()
            .filter(|f| f.required)
            .filter(|f| match form.get(&f.id) {
                None => true,
                Some(v) => v.as_str().is_some_and(|s| s.trim().is_empty()),
            })
            .map(|f| f.id.clone())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(ProcessError::Submission(missing))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HistoryEntry {
    /// Id of the event the step emitted; doubles as a logical timestamp.
    pub timestamp: u64,
    pub actor_role: Role,
    pub action: String,
    pub from: Option<String>,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProcessInstance {
    pub instance_id: u64,
    pub process_id: String,
    pub subject: String,
    pub state: String,
    pub form: BTreeMap<String, Value>,
    pub history: Vec<HistoryEntry>,
}

impl ProcessInstance {
    /// Replays the history through the definition and returns the state it
    /// leads to, or the first illegal step.
    pub fn replay(&self, def: &ProcessDefinition) -> Result<String, ProcessError> {
        let mut state: Option<String> = None;
        for h in &self.history {
            match (&state, &h.from) {
                (None, None) if h.to == def.initial => state = Some(h.to.clone()),
                (Some(s), Some(from)) if s == from => {
                    let t = def.find_transition(s, &h.action, h.actor_role)?;
                    if t.to != h.to {
                        return Err(ProcessError::Journal(format!("history step to `{}` is not the defined target", h.to)));
                    }
                    state = Some(t.to.clone());
                }
                _ => return Err(ProcessError::Journal("history does not chain".into())),
            }
        }
        state.ok_or_else(|| ProcessError::Journal("empty history".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProcessEvent {
    pub event_id: u64,
    pub instance_id: u64,
    pub process_id: String,
    pub kind: EventKind,
    pub payload: BTreeMap<String, Value>,
}

impl ProcessEvent {
    pub fn subject(&self) -> Option<&str> {
        self.payload.get("subject").and_then(Value::as_str)
    }
}

#[cfg(test)]
mod tests;
