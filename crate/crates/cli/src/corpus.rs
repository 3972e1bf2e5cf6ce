//! Runs a corpus directory: scenario files and pinned query files alike.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use bpassist_core::agents::{build_world, SuiteConfig, WorldConfig};

use crate::datagen::{answer, check_pin, QueryCorpus};
use crate::scenario::{discover, run_scenario, Scenario, ScenarioReport};

#[derive(Debug, Clone, PartialEq)]
pub struct QueryReport {
    pub file: PathBuf,
    pub checked: usize,
    pub failures: Vec<String>,
}

#[derive(Debug, Default)]
pub struct CorpusReport {
    pub scenarios: Vec<ScenarioReport>,
    pub queries: Vec<QueryReport>,
}

impl CorpusReport {
    pub fn passed(&self) -> bool {
        self.scenarios.iter().all(ScenarioReport::passed) && self.queries.iter().all(|q| q.failures.is_empty())
    }

    pub fn scenario(&self, name: &str) -> Option<&ScenarioReport> {
        self.scenarios.iter().find(|s| s.name == name)
    }

    /// The full report. Contains no timings, so reruns are byte-identical.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.scenarios {
            out.push_str(&s.to_string());
        }
        for q in &self.queries {
            let verdict = if q.failures.is_empty() { "PASS" } else { "FAIL" };
            let name = q.file.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{verdict} {name} ({}/{} pinned queries)",
                q.checked - q.failures.len().min(q.checked),
                q.checked
            );
            for f in &q.failures {
                let _ = writeln!(out, "      FAIL {f}");
            }
        }
        let passed = self.scenarios.iter().filter(|s| s.passed()).count();
        let _ = writeln!(
            out,
            "{passed}/{} scenarios passed; {}/{} query files passed",
            self.scenarios.len(),
            self.queries.iter().filter(|q| q.failures.is_empty()).count(),
            self.queries.len()
        );
        out
    }
}

fn is_query_file(text: &str) -> bool {
    text.parse::<toml::Table>().is_ok_and(|t| t.contains_key("query"))
}

/// Checks every pinned query against the engine on the file's own dataset.
pub fn check_queries(path: &Path) -> anyhow::Result<QueryReport> {
    let corpus = QueryCorpus::load(path)?;
    let world = build_world(&WorldConfig {
        seed: corpus.seed,
        size: corpus.size,
        ..WorldConfig::default()
    })?;
    let mut failures = Vec::new();
    for q in &corpus.queries {
        let a = answer(&q.text, &world.dataset, &world.loan_schema);
        for f in check_pin(q, &a) {
            failures.push(format!("{:?}: {f}", q.text));
        }
    }
    Ok(QueryReport {
        file: path.to_path_buf(),
        checked: corpus.queries.len(),
        failures,
    })
}

/// Loads everything first so a malformed file fails before anything runs.
pub async fn run_corpus(corpus: &Path, base: &SuiteConfig) -> anyhow::Result<CorpusReport> {
    let mut scenarios = Vec::new();
    let mut query_files = Vec::new();
    for path in discover(corpus)? {
        let text = std::fs::read_to_string(&path).with_context(|| path.display().to_string())?;
        if is_query_file(&text) {
            QueryCorpus::load(&path)?;
            query_files.push(path);
        } else {
            scenarios.push(Scenario::load(&path)?);
        }
    }
    let mut report = CorpusReport::default();
    for s in &scenarios {
        report.scenarios.push(run_scenario(s, base).await);
    }
    for q in &query_files {
        report.queries.push(check_queries(q)?);
    }
    Ok(report)
}
