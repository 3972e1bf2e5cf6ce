//! Natural-language questions over tabular process data: a fixed grammar,
//! a typed AST, an evaluator and a seeded synthetic dataset.

mod ast;
mod eval;
mod generate;
#[cfg(any(test, feature = "oracle"))]
pub mod oracle;
mod parser;
mod render;
mod table;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::{AggFn, Aggregate, Comparator, Filter, Having, Literal, Order, QueryAst, TopK};
pub use eval::{evaluate, text_key};
pub use generate::{civil_from_days, generate_dataset, Dataset, DatasetConfig};
pub use parser::{parse_query, ParseError};
pub use render::render;
pub use table::{write_csv, SchemaColumn, Table, TableSchema};

use crate::contract::{Cell, Column, TablePayload};

/// Rows shown inline before a result is truncated for display.
pub const DISPLAY_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueryError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid query: {0}")]
    Invalid(String),
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QueryResult {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
    /// Size of the full result, before display truncation.
    pub total_count: usize,
    pub truncated: bool,
}

impl QueryResult {
    pub fn new(columns: Vec<Column>, rows: Vec<Vec<Cell>>) -> Self {
        let total_count = rows.len();
        Self {
            columns,
            rows,
            total_count,
            truncated: false,
        }
    }

    pub fn truncated_to(&self, limit: usize) -> Self {
        let mut out = self.clone();
        if out.rows.len() > limit {
            out.rows.truncate(limit);
            out.truncated = true;
        }
        out
    }

    pub fn to_payload(&self) -> TablePayload {
        TablePayload {
            columns: self.columns.clone(),
            rows: self.rows.clone(),
            total_count: self.total_count,
            truncated: self.truncated,
        }
    }

    /// The single number of a scalar aggregate result.
    pub fn scalar(&self) -> Option<f64> {
        match self.rows.as_slice() {
            [row] if row.len() == 1 => row[0].as_f64(),
            _ => None,
        }
    }
}

impl fmt::Display for QueryResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        writeln!(f, "{}", names.join(" | "))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(ToString::to_string).collect();
            writeln!(f, "{}", cells.join(" | "))?;
        }
        Ok(())
    }
}
