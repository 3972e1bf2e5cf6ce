use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::three_s::{score, scorer_for, sequence, ScoredAgent, Scorer, Selector, TopKSelector};
use super::{AgentRegistry, OrchestratorConfig, OrchestratorError};
use crate::contract::{
    agent_execute, agent_preview, apply_context_updates, AgentPreview, Context, ResponsePayload, Utterance,
};

/// Attribution used for the fallback response.
pub const SYSTEM_AGENT: &str = "system";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AgentResponse {
    pub agent_id: String,
    pub response: ResponsePayload,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AgentTiming {
    pub preview_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub execute_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TracePreview {
    pub agent_id: String,
    pub confidence: f64,
    pub stickiness: u8,
    pub score: f64,
    #[serde(default)]
    pub timed_out: bool,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceResult {
    pub agent_id: String,
    pub confidence: f64,
    pub stickiness: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Everything the orchestrator saw and decided on one turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TurnTrace {
    pub utterance: Utterance,
    pub previews: Vec<TracePreview>,
    /// Selection order, best first.
    pub selected: Vec<String>,
    /// Execution order.
    pub sequence: Vec<String>,
    pub results: Vec<TraceResult>,
    pub fallback_used: bool,
}

impl TurnTrace {
    pub fn preview(&self, agent_id: &str) -> Option<&TracePreview> {
        self.previews.iter().find(|p| p.agent_id == agent_id)
    }

    pub fn result(&self, agent_id: &str) -> Option<&TraceResult> {
        self.results.iter().find(|r| r.agent_id == agent_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TurnResult {
    pub responses: Vec<AgentResponse>,
    /// Executed agents, in execution order.
    pub selected: Vec<String>,
    pub context_after: Context,
    pub fallback_used: bool,
    pub timings: BTreeMap<String, AgentTiming>,
    pub trace: TurnTrace,
}

impl TurnResult {
    /// Copy with all durations zeroed, for comparing runs.
    pub fn without_timings(&self) -> Self {
        let mut out = self.clone();
        for t in out.timings.values_mut() {
            t.preview_ms = 0.0;
            t.execute_ms = t.execute_ms.map(|_| 0.0);
        }
        out
    }

    /// Response texts joined by newlines.
    pub fn text(&self) -> String {
        self.responses
            .iter()
            .map(|r| r.response.plain_text())
            .filter(|t| !t.is_empty())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone)]
pub struct TimedPreview {
    pub preview: AgentPreview,
    pub elapsed: Duration,
}

/// Asks every registered agent for a preview concurrently. Agents that
/// fail, panic or miss the deadline get a silent zero-confidence preview.
pub async fn broadcast(
    utterance: &Utterance,
    ctx: &Context,
    registry: &AgentRegistry,
    deadline: Duration,
) -> Vec<TimedPreview> {
    let utterance = Arc::new(utterance.clone());
    let ctx = Arc::new(ctx.clone());
    let handles: Vec<_> = registry
        .agents()
        .iter()
        .map(|agent| {
            let agent = Arc::clone(agent);
            let u = Arc::clone(&utterance);
            let c = Arc::clone(&ctx);
            tokio::spawn(async move {
                let start = Instant::now();
                let r = tokio::time::timeout(deadline, agent_preview(agent.as_ref(), &u, &c)).await;
                (r, start.elapsed())
            })
        })
        .collect();
    let joined = futures::future::join_all(handles).await;
    registry
        .agents()
        .iter()
        .zip(joined)
        .map(|(agent, outcome)| {
            let id = agent.id();
            let (preview, elapsed) = match outcome {
                Ok((Ok(Ok(p)), elapsed)) => (p, elapsed),
                Ok((Ok(Err(e)), elapsed)) => {
                    tracing::warn!(agent = id, error = %e, "preview failed");
                    (AgentPreview::silent(id, false), elapsed)
                }
                Ok((Err(_), elapsed)) => {
                    tracing::warn!(agent = id, "preview missed its deadline");
                    (AgentPreview::silent(id, true), elapsed)
                }
                Err(e) => {
                    tracing::warn!(agent = id, error = %e, "preview task aborted");
                    (AgentPreview::silent(id, false), Duration::ZERO)
                }
            };
            TimedPreview { preview, elapsed }
        })
        .collect()
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1_000.0
}

/// Broadcast, score, select, sequence and execute. Holds no state between
/// turns.
pub struct Orchestrator {
    config: OrchestratorConfig,
    scorer: Box<dyn Scorer>,
    selector: Box<dyn Selector>,
}

impl Orchestrator {
    pub fn new(config: OrchestratorConfig) -> Self {
        Self {
            scorer: scorer_for(config.scorer),
            selector: Box::new(TopKSelector),
            config,
        }
    }

    pub fn with_scorer(mut self, scorer: Box<dyn Scorer>) -> Self {
        self.scorer = scorer;
        self
    }

    pub fn with_selector(mut self, selector: Box<dyn Selector>) -> Self {
        self.selector = selector;
        self
    }

    pub fn config(&self) -> &OrchestratorConfig {
        &self.config
    }

    /// Broadcast and scoring only, with no execution.
    pub async fn preview_scores(&self, utterance: &Utterance, ctx: &Context, registry: &AgentRegistry) -> Vec<ScoredAgent> {
        let previews: Vec<AgentPreview> = broadcast(utterance, ctx, registry, self.config.deadline())
            .await
            .into_iter()
            .map(|t| t.preview)
            .collect();
        score(&previews, self.scorer.as_ref())
    }

    pub async fn run_turn(
        &self,
        utterance: &Utterance,
        ctx: &Context,
        registry: &AgentRegistry,
    ) -> Result<TurnResult, OrchestratorError> {
        ctx.validate()?;
        let deadline = self.config.deadline();
        let timed = broadcast(utterance, ctx, registry, deadline).await;
        let mut timings: BTreeMap<String, AgentTiming> = timed
            .iter()
            .map(|t| {
                (
                    t.preview.agent_id.clone(),
                    AgentTiming {
                        preview_ms: ms(t.elapsed),
                        execute_ms: None,
                    },
                )
            })
            .collect();
        let previews: Vec<AgentPreview> = timed.into_iter().map(|t| t.preview).collect();
        let scored = score(&previews, self.scorer.as_ref());
        let selected = self
            .selector
            .select(&scored, &ctx.turn_log, self.config.k, self.config.threshold);
        let ordered = sequence(&selected, |id| registry.get(id).map(|a| a.descriptor().clone()));

        let mut trace = TurnTrace {
            utterance: utterance.clone(),
            previews: scored
                .iter()
                .map(|s| TracePreview {
                    agent_id: s.agent_id.clone(),
                    confidence: s.preview.confidence,
                    stickiness: s.preview.stickiness,
                    score: s.score,
                    timed_out: s.preview.timed_out,
                    text: s.preview.response.plain_text(),
                })
                .collect(),
            selected: selected.iter().map(|s| s.agent_id.clone()).collect(),
            sequence: ordered.iter().map(|s| s.agent_id.clone()).collect(),
            results: Vec::new(),
            fallback_used: ordered.is_empty(),
        };

        if ordered.is_empty() {
            let result = TurnResult {
                responses: vec![AgentResponse {
                    agent_id: SYSTEM_AGENT.into(),
                    response: ResponsePayload::text(self.config.fallback_text.clone()),
                }],
                selected: Vec::new(),
                context_after: ctx.clone().with_turn_logged(utterance.turn_index, Vec::new()),
                fallback_used: true,
                timings,
                trace,
            };
            log_trace(&result.trace);
            return Ok(result);
        }

        let mut running = ctx.clone();
        let mut responses = Vec::with_capacity(ordered.len());
        for s in &ordered {
            let Some(agent) = registry.get(&s.agent_id) else {
                continue;
            };
            let start = Instant::now();
            let outcome = tokio::time::timeout(deadline, agent_execute(agent.as_ref(), utterance, &running)).await;
            if let Some(t) = timings.get_mut(&s.agent_id) {
                t.execute_ms = Some(ms(start.elapsed()));
            }
            let failure = match outcome {
                Ok(Ok(result)) => {
                    match apply_context_updates(&running, &[(s.agent_id.clone(), result.context_updates.clone())]) {
                        Ok(next) => {
                            running = next;
                            trace.results.push(TraceResult {
                                agent_id: s.agent_id.clone(),
                                confidence: result.confidence,
                                stickiness: result.stickiness,
                                error: None,
                            });
                            responses.push(AgentResponse {
                                agent_id: s.agent_id.clone(),
                                response: result.response,
                            });
                            None
                        }
                        Err(e) => Some(e.to_string()),
                    }
                }
                Ok(Err(e)) => Some(e.to_string()),
                Err(_) => Some("timed out".to_string()),
            };
            if let Some(error) = failure {
                tracing::warn!(agent = %s.agent_id, %error, "execute failed");
                let name = &agent.descriptor().display_name;
                responses.push(AgentResponse {
                    agent_id: s.agent_id.clone(),
                    response: ResponsePayload::text(format!("Sorry, {name} could not complete that: {error}")),
                });
                trace.results.push(TraceResult {
                    agent_id: s.agent_id.clone(),
                    confidence: s.preview.confidence,
                    stickiness: 0,
                    error: Some(error),
                });
            }
        }

        let executed: Vec<String> = ordered.iter().map(|s| s.agent_id.clone()).collect();
        let result = TurnResult {
            responses,
            selected: executed.clone(),
            context_after: running.with_turn_logged(utterance.turn_index, executed),
            fallback_used: false,
            timings,
            trace,
        };
        log_trace(&result.trace);
        Ok(result)
    }
}

fn log_trace(trace: &TurnTrace) {
    if tracing::enabled!(tracing::Level::DEBUG) {
        if let Ok(json) = serde_json::to_string(trace) {
            tracing::debug!(target: "bpassist::turn", trace = %json);
        }
    }
}

/// One turn with the default scorer and selector for `config`.
pub async fn run_turn(
    utterance: &Utterance,
    ctx: &Context,
    registry: &AgentRegistry,
    config: &OrchestratorConfig,
) -> Result<TurnResult, OrchestratorError> {
    Orchestrator::new(config.clone()).run_turn(utterance, ctx, registry).await
}
