use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::OrchestratorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    /// `s = max(c, κ)`.
    #[default]
    Max,
    /// `s = c`.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct OrchestratorConfig {
    /// Most agents selected per turn.
    pub k: usize,
    /// Scores must be strictly above this to be selected.
    pub threshold: f64,
    pub per_agent_deadline_ms: u64,
    pub fallback_text: String,
    pub scorer: ScorerKind,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        Self {
            k: 1,
            threshold: 0.3,
            per_agent_deadline_ms: 2_000,
            fallback_text: "Sorry, I can't help with that.".into(),
            scorer: ScorerKind::Max,
        }
    }
}

impl OrchestratorConfig {
    pub fn from_toml(text: &str) -> Result<Self, OrchestratorError> {
        let c: Self = toml::from_str(text).map_err(|e| OrchestratorError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let bad = |m: &str| Err(OrchestratorError::Config(m.to_string()));
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad("threshold must be within [0, 1]");
        }
        if self.per_agent_deadline_ms == 0 {
            return bad("perAgentDeadlineMs must be positive");
        }
        Ok(())
    }

    pub fn deadline(&self) -> Duration {
        Duration::from_millis(self.per_agent_deadline_ms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_camel_case_keys() {
        let c = OrchestratorConfig::from_toml(
            "k = 2\nthreshold = 0.4\nperAgentDeadlineMs = 50\nfallbackText = \"nope\"\nscorer = \"identity\"\n",
        )
        .unwrap();
        assert_eq!(c.k, 2);
        assert_eq!(c.threshold, 0.4);
        assert_eq!(c.deadline(), Duration::from_millis(50));
        assert_eq!(c.fallback_text, "nope");
        assert_eq!(c.scorer, ScorerKind::Identity);
    }

    #[test]
    fn defaults_and_rejections() {
        let c = OrchestratorConfig::from_toml("").unwrap();
        assert_eq!((c.k, c.threshold, c.scorer), (1, 0.3, ScorerKind::Max));
        assert!(OrchestratorConfig::from_toml("k = 0").is_err());
        assert!(OrchestratorConfig::from_toml("threshold = 1.5").is_err());
        assert!(OrchestratorConfig::from_toml("perAgentDeadlineMs = 0").is_err());
        assert!(OrchestratorConfig::from_toml("scorer = \"bayes\"").is_err());
        assert!(OrchestratorConfig::from_toml("topK = 3").is_err());
    }
}
