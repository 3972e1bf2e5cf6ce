use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ContractError, Value};

/// One entry of the append-only turn log: which agents were selected on a
/// given turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TurnLogEntry {
    pub turn_index: u64,
    pub selected: Vec<String>,
}

/// Conversation state passed to and returned from agents on every turn.
///
/// The orchestrator keeps no state of its own; everything an agent needs to
/// remember between turns lives either in `shared` or in its own namespace
/// under `agent_scoped`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Context {
    #[serde(rename = "sharedContext", default)]
    pub shared: BTreeMap<String, Value>,
    #[serde(rename = "agentContext", default)]
    pub agent_scoped: BTreeMap<String, BTreeMap<String, Value>>,
    #[serde(rename = "turnLog", default)]
    pub turn_log: Vec<TurnLogEntry>,
}

impl Context {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn shared(&self, key: &str) -> Option<&Value> {
        self.shared.get(key)
    }

    pub fn scoped(&self, agent_id: &str, key: &str) -> Option<&Value> {
        self.agent_scoped.get(agent_id).and_then(|m| m.get(key))
    }

    /// Shared entries whose key starts with `prefix`.
    pub fn shared_with_prefix<'a>(
        &'a self,
        prefix: &'a str,
    ) -> impl Iterator<Item = (&'a str, &'a Value)> + 'a {
        self.shared
            .range(prefix.to_string()..)
            .take_while(move |(k, _)| k.starts_with(prefix))
            .map(|(k, v)| (k.as_str(), v))
    }

    /// Agents selected on the most recent logged turn.
    pub fn last_selected(&self) -> &[String] {
        self.turn_log
            .last()
            .map(|e| e.selected.as_slice())
            .unwrap_or(&[])
    }

    pub fn was_selected_last_turn(&self, agent_id: &str) -> bool {
        self.last_selected().iter().any(|a| a == agent_id)
    }

    pub fn validate(&self) -> Result<(), ContractError> {
        for (k, v) in &self.shared {
            check_entry(k, v)?;
        }
        for (agent, scope) in &self.agent_scoped {
            if agent.is_empty() {
                return Err(ContractError::MalformedContext(
                    "empty agent namespace".into(),
                ));
            }
            for (k, v) in scope {
                check_entry(k, v)?;
            }
        }
        for pair in self.turn_log.windows(2) {
            if pair[1].turn_index <= pair[0].turn_index {
                return Err(ContractError::MalformedContext(format!(
                    "turn log not increasing at turn {}",
                    pair[1].turn_index
                )));
            }
        }
        Ok(())
    }

    pub fn with_turn_logged(mut self, turn_index: u64, selected: Vec<String>) -> Self {
        self.turn_log.push(TurnLogEntry {
            turn_index,
            selected,
        });
        self
    }
}

fn check_entry(key: &str, value: &Value) -> Result<(), ContractError> {
    if key.is_empty() {
        return Err(ContractError::MalformedContext("empty key".into()));
    }
    if !value.is_well_formed() {
        return Err(ContractError::MalformedContext(format!(
            "value under `{key}` is malformed"
        )));
    }
    Ok(())
}

/// Proposed changes to a context. `None` removes a key.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContextDelta {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub shared: BTreeMap<String, Option<Value>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub agent: BTreeMap<String, BTreeMap<String, Option<Value>>>,
}

impl ContextDelta {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.shared.is_empty() && self.agent.values().all(BTreeMap::is_empty)
    }

    pub fn set_shared(mut self, key: impl Into<String>, value: impl Into<Value>) -> Self {
        self.shared.insert(key.into(), Some(value.into()));
        self
    }

    pub fn remove_shared(mut self, key: impl Into<String>) -> Self {
        self.shared.insert(key.into(), None);
        self
    }

    pub fn set_scoped(
        mut self,
        agent_id: &str,
        key: impl Into<String>,
        value: impl Into<Value>,
    ) -> Self {
        self.agent
            .entry(agent_id.to_string())
            .or_default()
            .insert(key.into(), Some(value.into()));
        self
    }

    pub fn remove_scoped(mut self, agent_id: &str, key: impl Into<String>) -> Self {
        self.agent
            .entry(agent_id.to_string())
            .or_default()
            .insert(key.into(), None);
        self
    }

    /// Checks namespace rules for a delta proposed by `agent_id`.
    pub fn check_namespace(&self, agent_id: &str) -> Result<(), ContractError> {
        for (ns, entries) in &self.agent {
            if ns != agent_id && !entries.is_empty() {
                return Err(ContractError::NamespaceViolation {
                    agent_id: agent_id.to_string(),
                    namespace: ns.clone(),
                });
            }
        }
        let keys = self
            .shared
            .iter()
            .chain(self.agent.values().flat_map(|m| m.iter()));
        for (k, v) in keys {
            if k.is_empty() {
                return Err(ContractError::MalformedContext(format!(
                    "agent `{agent_id}` proposed an empty key"
                )));
            }
            if let Some(v) = v {
                check_entry(k, v)?;
            }
        }
        Ok(())
    }
}

/// Applies agents' deltas in the given order and returns the new context.
///
/// All deltas are validated before any is applied, so a namespace violation
/// leaves no partial write. Later writes to the same key win.
pub fn apply_context_updates(
    ctx: &Context,
    updates: &[(String, ContextDelta)],
) -> Result<Context, ContractError> {
    for (agent_id, delta) in updates {
        delta.check_namespace(agent_id)?;
    }
    let mut next = ctx.clone();
    for (_, delta) in updates {
        for (k, v) in &delta.shared {
            match v {
                Some(v) => {
                    next.shared.insert(k.clone(), v.clone());
                }
                None => {
                    next.shared.remove(k);
                }
            }
        }
        for (ns, entries) in &delta.agent {
            let scope = next.agent_scoped.entry(ns.clone()).or_default();
            for (k, v) in entries {
                match v {
                    Some(v) => {
                        scope.insert(k.clone(), v.clone());
                    }
                    None => {
                        scope.remove(k);
                    }
                }
            }
            if scope.is_empty() {
                next.agent_scoped.remove(ns);
            }
        }
    }
    Ok(next)
}
