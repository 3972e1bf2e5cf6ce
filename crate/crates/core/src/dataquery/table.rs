use std::io::Read;

use serde::{Deserialize, Serialize};

use super::QueryError;
use crate::contract::{format_number, Cell, Column, ColumnType, TablePayload};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(
        name: impl Into<String>,
        columns: Vec<Column>,
        rows: Vec<Vec<Cell>>,
    ) -> Result<Self, QueryError> {
        let t = Self {
            name: name.into(),
            columns,
            rows,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), QueryError> {
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.columns.len() {
                return Err(QueryError::Invalid(format!(
                    "row {i} of `{}` has {} cells, expected {}",
                    self.name,
                    row.len(),
                    self.columns.len()
                )));
            }
            for (cell, col) in row.iter().zip(&self.columns) {
                if !cell.matches_type(col.ty) {
                    return Err(QueryError::Invalid(format!(
                        "row {i} column `{}` has the wrong type",
                        col.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn to_payload(&self) -> TablePayload {
        TablePayload::new(self.columns.clone(), self.rows.clone())
    }

    /// RFC-4180 style CSV with a header row.
    pub fn to_csv(&self) -> Vec<u8> {
        write_csv(&self.columns, &self.rows)
    }

    /// Loads a CSV with a header row; columns are reordered to schema order.
    pub fn from_csv<R: Read>(reader: R, schema: &TableSchema) -> Result<Self, QueryError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| QueryError::Csv(e.to_string()))?
            .clone();
        let mut positions = Vec::new();
        for col in &schema.columns {
            let pos = headers
                .iter()
                .position(|h| h.trim() == col.name)
                .ok_or_else(|| QueryError::Csv(format!("missing column `{}`", col.name)))?;
            positions.push(pos);
        }
        let mut rows = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| QueryError::Csv(e.to_string()))?;
            let mut row = Vec::with_capacity(positions.len());
            for (col, &pos) in schema.columns.iter().zip(&positions) {
                let raw = record.get(pos).unwrap_or("").trim();
                let cell = match col.ty {
                    ColumnType::Number => Cell::Number(raw.parse().map_err(|_| {
                        QueryError::Csv(format!(
                            "line {}: `{raw}` is not a number in `{}`",
                            line + 2,
                            col.name
                        ))
                    })?),
                    ColumnType::String | ColumnType::Date => Cell::Text(raw.to_string()),
                };
                row.push(cell);
            }
            rows.push(row);
        }
        Table::new(
            schema.table.clone(),
            schema.columns.iter().map(|c| Column::new(&c.name, c.ty)).collect(),
            rows,
        )
    }
}

pub fn write_csv(columns: &[Column], rows: &[Vec<Cell>]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    // Writing into a Vec cannot fail.
    w.write_record(columns.iter().map(|c| c.name.as_str()))
        .expect("in-memory csv");
    for row in rows {
        w.write_record(row.iter().map(|c| match c {
            Cell::Number(n) => format_number(*n),
            Cell::Text(s) => s.clone(),
        }))
        .expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaColumn {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ColumnType,
    #[serde(default)]
    pub synonyms: Vec<String>,
    #[serde(default)]
    pub money: bool,
}

/// Sidecar description of a table: column types, the nouns that name its
/// rows, and surface synonyms for columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TableSchema {
    pub table: String,
    pub row_nouns: Vec<String>,
    /// The column rows are grouped by when a query ranks "borrowers".
    pub key_column: String,
    pub columns: Vec<SchemaColumn>,
}

impl TableSchema {
    pub fn from_toml(text: &str) -> Result<Self, QueryError> {
        let s: Self = toml::from_str(text).map_err(|e| QueryError::Invalid(e.to_string()))?;
        if s.column(&s.key_column).is_none() {
            return Err(QueryError::Invalid(format!(
                "key column `{}` is not declared",
                s.key_column
            )));
        }
        Ok(s)
    }

    pub fn column(&self, name: &str) -> Option<&SchemaColumn> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_type(&self, name: &str) -> Option<ColumnType> {
        self.column(name).map(|c| c.ty)
    }

    pub fn is_money(&self, name: &str) -> bool {
        self.column(name).is_some_and(|c| c.money)
    }

    pub fn columns(&self) -> Vec<Column> {
        self.columns.iter().map(|c| Column::new(&c.name, c.ty)).collect()
    }

    /// Human phrase for a column: its first synonym, else the name with
    /// underscores as spaces.
    pub fn phrase(&self, name: &str) -> String {
        self.column(name)
            .and_then(|c| c.synonyms.first().cloned())
            .unwrap_or_else(|| name.replace('_', " "))
    }
}
