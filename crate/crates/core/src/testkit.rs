//! Scripted agents and reference implementations for tests of the
//! orchestrator and of anything built on it.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;

use crate::contract::{
    Agent, AgentDescriptor, AgentError, AgentPreview, AgentResult, Context, ContextDelta, ResponsePayload,
    TaxonomyClass, Utterance,
};
use crate::orchestrator::ScoredAgent;

/// Call counts shared between a [`ScriptedAgent`] and the test holding it.
#[derive(Debug, Default)]
pub struct Calls {
    pub previews: AtomicUsize,
    pub executes: AtomicUsize,
}

impl Calls {
    pub fn previews(&self) -> usize {
        self.previews.load(Ordering::SeqCst)
    }

    pub fn executes(&self) -> usize {
        self.executes.load(Ordering::SeqCst)
    }
}

/// An agent that answers with fixed numbers. It can be told to sleep, fail
/// or panic during preview, to write context on execute, and to echo a
/// shared key it reads.
#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    pub descriptor: AgentDescriptor,
    pub confidence: f64,
    pub sticky: bool,
    pub text: String,
    pub delay: Option<Duration>,
    pub fail: bool,
    pub panic: bool,
    pub fail_execute: bool,
    pub updates: ContextDelta,
    /// Shared key whose value is appended to the response text.
    pub echo_key: Option<String>,
    pub calls: Arc<Calls>,
}

impl ScriptedAgent {
    pub fn new(id: &str, confidence: f64) -> Self {
        Self {
            descriptor: AgentDescriptor::new(id, id, TaxonomyClass::Dialog, false),
            confidence,
            sticky: false,
            text: format!("{id} here"),
            delay: None,
            fail: false,
            panic: false,
            fail_execute: false,
            updates: ContextDelta::new(),
            echo_key: None,
            calls: Arc::new(Calls::default()),
        }
    }

    pub fn sticky(mut self, sticky: bool) -> Self {
        self.sticky = sticky;
        self
    }

    pub fn produces(mut self, pattern: &str) -> Self {
        self.descriptor = self.descriptor.produces(pattern);
        self
    }

    pub fn consumes(mut self, pattern: &str) -> Self {
        self.descriptor = self.descriptor.consumes(pattern);
        self
    }

    pub fn writes(mut self, updates: ContextDelta) -> Self {
        self.updates = updates;
        self
    }

    pub fn echoes(mut self, key: &str) -> Self {
        self.echo_key = Some(key.to_string());
        self
    }

    pub fn delayed(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }

    pub fn failing(mut self) -> Self {
        self.fail = true;
        self
    }

    pub fn panicking(mut self) -> Self {
        self.panic = true;
        self
    }

    pub fn failing_execute(mut self) -> Self {
        self.fail_execute = true;
        self
    }

    pub fn arc(self) -> Arc<dyn Agent> {
        Arc::new(self)
    }

    fn answer(&self, ctx: &Context) -> AgentPreview {
        let mut text = self.text.clone();
        if let Some(v) = self.echo_key.as_deref().and_then(|k| ctx.shared(k)) {
            text = format!("{text}: {v}");
        }
        AgentPreview::new(&self.descriptor.agent_id, ResponsePayload::text(text), self.confidence, self.sticky)
            .with_updates(self.updates.clone())
    }
}

#[async_trait]
impl Agent for ScriptedAgent {
    fn descriptor(&self) -> &AgentDescriptor {
        &self.descriptor
    }

    async fn preview(&self, _: &Utterance, ctx: &Context) -> Result<AgentPreview, AgentError> {
        self.calls.previews.fetch_add(1, Ordering::SeqCst);
        if let Some(d) = self.delay {
            tokio::time::sleep(d).await;
        }
        if self.panic {
            panic!("scripted panic");
        }
        if self.fail {
            return Err(AgentError::Failed("scripted failure".into()));
        }
        Ok(self.answer(ctx))
    }

    async fn execute(&self, _: &Utterance, ctx: &Context) -> Result<AgentResult, AgentError> {
        self.calls.executes.fetch_add(1, Ordering::SeqCst);
        if self.fail_execute {
            return Err(AgentError::Failed("scripted execute failure".into()));
        }
        Ok(self.answer(ctx))
    }
}

/// Reference selection: sort everything, then cut. Written independently
/// of the orchestrator's selector.
pub fn oracle_select(scored: &[ScoredAgent], k: usize, threshold: f64) -> Vec<String> {
    let mut all: Vec<&ScoredAgent> = scored.iter().collect();
    // insertion sort on (score desc, sticky first, position asc)
    for i in 1..all.len() {
        let mut j = i;
        while j > 0 {
            let (a, b) = (all[j - 1], all[j]);
            let b_first = b.score > a.score
                || (b.score == a.score && b.preview.stickiness > a.preview.stickiness)
                || (b.score == a.score && b.preview.stickiness == a.preview.stickiness && b.position < a.position);
            if !b_first {
                break;
            }
            all.swap(j - 1, j);
            j -= 1;
        }
    }
    all.into_iter()
        .filter(|s| s.score > threshold)
        .take(k)
        .map(|s| s.agent_id.clone())
        .collect()
}
