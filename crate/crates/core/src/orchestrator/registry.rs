use std::sync::Arc;

use super::OrchestratorError;
use crate::contract::{Agent, AgentDescriptor};

/// Agents in registration order. Cloning is cheap; each turn works on its
/// own snapshot.
#[derive(Clone, Default)]
pub struct AgentRegistry {
    agents: Vec<Arc<dyn Agent>>,
}

impl std::fmt::Debug for AgentRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.agents.iter().map(|a| a.id())).finish()
    }
}

impl AgentRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, agent: Arc<dyn Agent>) -> Result<(), OrchestratorError> {
        if agent.id().is_empty() {
            return Err(OrchestratorError::Registry("empty agent id".into()));
        }
        if self.get(agent.id()).is_some() {
            return Err(OrchestratorError::Registry(format!(
                "agent `{}` is already registered",
                agent.id()
            )));
        }
        self.agents.push(agent);
        Ok(())
    }

    /// Removes an agent; returns whether it was present.
    pub fn remove(&mut self, agent_id: &str) -> bool {
        let before = self.agents.len();
        self.agents.retain(|a| a.id() != agent_id);
        self.agents.len() != before
    }

    /// Swaps in an agent with the same id at the same position and returns
    /// the one it replaced.
    pub fn replace(&mut self, agent: Arc<dyn Agent>) -> Result<Arc<dyn Agent>, OrchestratorError> {
        let i = self
            .position(agent.id())
            .ok_or_else(|| OrchestratorError::Registry(format!("agent `{}` is not registered", agent.id())))?;
        Ok(std::mem::replace(&mut self.agents[i], agent))
    }

    pub fn get(&self, agent_id: &str) -> Option<&Arc<dyn Agent>> {
        self.agents.iter().find(|a| a.id() == agent_id)
    }

    pub fn position(&self, agent_id: &str) -> Option<usize> {
        self.agents.iter().position(|a| a.id() == agent_id)
    }

    pub fn agents(&self) -> &[Arc<dyn Agent>] {
        &self.agents
    }

    pub fn descriptors(&self) -> Vec<AgentDescriptor> {
        self.agents.iter().map(|a| a.descriptor().clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }
}
