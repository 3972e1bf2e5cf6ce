//! Seeded dataset files and the answers of the query corpus over them.

use std::fs;
use std::path::Path;

use anyhow::Context as _;
use bpassist_core::agents::{build_world, WorldConfig};
use bpassist_core::contract::Cell;
use bpassist_core::dataquery::{evaluate, parse_query, render, Dataset, QueryResult, TableSchema};
use serde::{Deserialize, Serialize};

/// A query with the answer it must produce for the file's seed and size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinnedQuery {
    pub text: String,
    /// Row count of the full result.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first: Option<Vec<Cell>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last: Option<Vec<Cell>>,
    /// The query must yield no answer.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryCorpus {
    pub seed: u64,
    pub size: usize,
    #[serde(rename = "query")]
    pub queries: Vec<PinnedQuery>,
}

impl QueryCorpus {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| path.display().to_string())?;
        toml::from_str(&text).with_context(|| path.display().to_string())
    }
}

/// One corpus query evaluated over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Answer {
    pub text: String,
    /// Canonical wording of the parsed query, or the parse error.
    pub parsed: Result<String, String>,
    pub result: Option<QueryResult>,
}

pub fn answer(text: &str, dataset: &Dataset, schema: &TableSchema) -> Answer {
    let parsed = parse_query(text, schema);
    let (parsed, result) = match parsed {
        Ok(ast) => {
            let shown = render(&ast, schema).unwrap_or_else(|_| text.to_string());
            match evaluate(&ast, &dataset.loans) {
                Ok(r) => (Ok(shown), Some(r)),
                Err(e) => (Err(e.to_string()), None),
            }
        }
        Err(e) => (Err(e.to_string()), None),
    };
    Answer {
        text: text.to_string(),
        parsed,
        result,
    }
}

/// Differences between an answer and its pin; empty when it holds.
pub fn check_pin(pin: &PinnedQuery, a: &Answer) -> Vec<String> {
    let mut out = Vec::new();
    match (&a.result, pin.rejected) {
        (None, true) => return out,
        (Some(_), true) => out.push("expected no answer".into()),
        (None, false) => out.push(format!("no answer: {}", a.parsed.clone().err().unwrap_or_default())),
        (Some(r), false) => {
            if let Some(t) = pin.total {
                if r.total_count != t {
                    out.push(format!("total: expected {t}, got {}", r.total_count));
                }
            }
            for (what, want, got) in [("first", &pin.first, r.rows.first()), ("last", &pin.last, r.rows.last())] {
                if let Some(want) = want {
                    if got != Some(want) {
                        out.push(format!("{what} row: expected {want:?}, got {got:?}"));
                    }
                }
            }
        }
    }
    out
}

/// Pins every query to what the current engine answers.
pub fn pin(a: &Answer) -> PinnedQuery {
    PinnedQuery {
        text: a.text.clone(),
        total: a.result.as_ref().map(|r| r.total_count),
        first: a.result.as_ref().and_then(|r| r.rows.first().cloned()),
        last: a.result.as_ref().and_then(|r| r.rows.last().cloned()),
        rejected: a.result.is_none(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Written {
    pub loans: usize,
    pub travel: usize,
    pub documents: usize,
    pub answers: usize,
}

/// Writes `loans.csv`, `travel.csv`, `documents/*.txt` and, given query
/// texts, `answers.json`.
pub fn write_dataset(seed: u64, size: usize, out: &Path, queries: &[String]) -> anyhow::Result<Written> {
    let world = build_world(&WorldConfig {
        seed,
        size,
        ..WorldConfig::default()
    })?;
    let d = &world.dataset;
    let docs = out.join("documents");
    fs::create_dir_all(&docs).with_context(|| docs.display().to_string())?;
    fs::write(out.join("loans.csv"), d.loans.to_csv())?;
    fs::write(out.join("travel.csv"), d.travel.to_csv())?;
    for (name, text) in &d.documents {
        fs::write(docs.join(name), text)?;
    }
    let answers: Vec<Answer> = queries.iter().map(|q| answer(q, d, &world.loan_schema)).collect();
    if !queries.is_empty() {
        fs::write(out.join("answers.json"), serde_json::to_string_pretty(&answers)? + "\n")?;
    }
    Ok(Written {
        loans: d.loans.rows.len(),
        travel: d.travel.rows.len(),
        documents: d.documents.len(),
        answers: answers.len(),
    })
}
