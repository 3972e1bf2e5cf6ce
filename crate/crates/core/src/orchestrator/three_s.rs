//! The pure parts of a turn: scoring, selection and sequencing.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::ScorerKind;
use crate::contract::{patterns_overlap, AgentDescriptor, AgentPreview, TurnLogEntry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScoredAgent {
    pub agent_id: String,
    /// Registration index, the last tie-breaker.
    pub position: usize,
    pub preview: AgentPreview,
    pub score: f64,
}

impl ScoredAgent {
    pub fn is_sticky(&self) -> bool {
        self.preview.is_sticky()
    }
}

pub trait Scorer: Send + Sync {
    fn score(&self, preview: &AgentPreview) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MaxScorer;

impl Scorer for MaxScorer {
    fn score(&self, p: &AgentPreview) -> f64 {
        p.confidence.max(f64::from(p.stickiness))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityScorer;

impl Scorer for IdentityScorer {
    fn score(&self, p: &AgentPreview) -> f64 {
        p.confidence
    }
}

pub fn scorer_for(kind: ScorerKind) -> Box<dyn Scorer> {
    match kind {
        ScorerKind::Max => Box::new(MaxScorer),
        ScorerKind::Identity => Box::new(IdentityScorer),
    }
}

/// Scores previews given in registration order.
pub fn score(previews: &[AgentPreview], scorer: &dyn Scorer) -> Vec<ScoredAgent> {
    previews
        .iter()
        .enumerate()
        .map(|(position, p)| ScoredAgent {
            agent_id: p.agent_id.clone(),
            position,
            preview: p.clone(),
            score: scorer.score(p).clamp(0.0, 1.0),
        })
        .collect()
}

/// Picks the agents to execute. Receives the previous turns so learned
/// selectors can use conversation history.
pub trait Selector: Send + Sync {
    fn select(
        &self,
        scored: &[ScoredAgent],
        turn_log: &[TurnLogEntry],
        k: usize,
        threshold: f64,
    ) -> Vec<ScoredAgent>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TopKSelector;

impl Selector for TopKSelector {
    fn select(&self, scored: &[ScoredAgent], _: &[TurnLogEntry], k: usize, threshold: f64) -> Vec<ScoredAgent> {
        select(scored, k, threshold)
    }
}

/// Descending score, then sticky first, then registration order.
pub fn rank(a: &ScoredAgent, b: &ScoredAgent) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| b.is_sticky().cmp(&a.is_sticky()))
        .then_with(|| a.position.cmp(&b.position))
}

/// Up to `k` agents scoring strictly above `threshold`, best first.
pub fn select(scored: &[ScoredAgent], k: usize, threshold: f64) -> Vec<ScoredAgent> {
    let mut eligible: Vec<ScoredAgent> = scored.iter().filter(|s| s.score > threshold).cloned().collect();
    eligible.sort_by(rank);
    eligible.truncate(k);
    eligible
}

fn feeds(producer: &AgentDescriptor, consumer: &AgentDescriptor) -> bool {
    producer.agent_id != consumer.agent_id
        && producer
            .produces_keys
            .iter()
            .any(|p| consumer.consumes_keys.iter().any(|c| patterns_overlap(p, c)))
}

/// Execution order for selected agents (given best first). Producers run
/// before the consumers of their keys; otherwise the order is kept. When
/// every remaining agent waits on another, the best scored one goes next.
pub fn sequence(selected: &[ScoredAgent], descriptor: impl Fn(&str) -> Option<AgentDescriptor>) -> Vec<ScoredAgent> {
    let descriptors: Vec<Option<AgentDescriptor>> = selected.iter().map(|s| descriptor(&s.agent_id)).collect();
    let mut remaining: Vec<usize> = (0..selected.len()).collect();
    let mut out = Vec::with_capacity(selected.len());
    while !remaining.is_empty() {
        let blocked = |i: usize| {
            let Some(consumer) = &descriptors[i] else { return false };
            remaining
                .iter()
                .any(|&j| j != i && descriptors[j].as_ref().is_some_and(|p| feeds(p, consumer)))
        };
        let pick = remaining
            .iter()
            .position(|&i| !blocked(i))
            .unwrap_or_else(|| {
                let best = remaining
                    .iter()
                    .copied()
                    .min_by(|&a, &b| rank(&selected[a], &selected[b]))
                    .expect("non-empty");
                remaining.iter().position(|&i| i == best).expect("present")
            });
        out.push(selected[remaining.remove(pick)].clone());
    }
    out
}
