use std::fmt;

use serde::{Deserialize, Serialize};

use super::QueryError;
use crate::contract::{Column, ColumnType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=", alias = "≤")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=", alias = "≥")]
    Ge,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=", alias = "≠")]
    Ne,
}

impl Comparator {
    pub const ALL: [Comparator; 6] = [
        Comparator::Lt,
        Comparator::Le,
        Comparator::Gt,
        Comparator::Ge,
        Comparator::Eq,
        Comparator::Ne,
    ];

    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            Comparator::Lt => ord == Less,
            Comparator::Le => ord != Greater,
            Comparator::Gt => ord == Greater,
            Comparator::Ge => ord != Less,
            Comparator::Eq => ord == Equal,
            Comparator::Ne => ord != Equal,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
            Comparator::Eq => "=",
            Comparator::Ne => "!=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Number(f64),
    Text(String),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Number(n) => f.write_str(&crate::contract::format_number(*n)),
            Literal::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Filter {
    pub column: String,
    pub comparator: Comparator,
    pub value: Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggFn {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl AggFn {
    pub fn as_str(self) -> &'static str {
        match self {
            AggFn::Count => "count",
            AggFn::Sum => "sum",
            AggFn::Avg => "avg",
            AggFn::Min => "min",
            AggFn::Max => "max",
        }
    }
}

/// `column` is ignored (and normally absent) for `Count`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Aggregate {
    pub func: AggFn,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
}

impl Aggregate {
    pub fn count() -> Self {
        Self {
            func: AggFn::Count,
            column: None,
        }
    }

    pub fn of(func: AggFn, column: &str) -> Self {
        Self {
            func,
            column: Some(column.to_string()),
        }
    }

    /// Name of the aggregate column in results, e.g. `avg_amount`.
    pub fn output_name(&self) -> String {
        match (&self.func, &self.column) {
            (AggFn::Count, _) | (_, None) => "count".to_string(),
            (f, Some(c)) => format!("{}_{c}", f.as_str()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    Desc,
    Asc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopK {
    pub k: usize,
    pub order: Order,
    /// Numeric column to rank rows by when the query has no aggregate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub by: Option<String>,
}

/// Condition on the aggregate value of a group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Having {
    pub comparator: Comparator,
    pub value: f64,
}

/// Typed form of a natural-language data question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QueryAst {
    pub source: String,
    #[serde(default)]
    pub filters: Vec<Filter>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_by: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<Aggregate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub having: Vec<Having>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<TopK>,
    /// Columns to return for row queries; empty means all.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub projection: Vec<String>,
}

impl QueryAst {
    pub fn rows_of(source: &str) -> Self {
        Self {
            source: source.to_string(),
            filters: Vec::new(),
            group_by: None,
            aggregate: None,
            having: Vec::new(),
            top_k: None,
            projection: Vec::new(),
        }
    }

    /// Checks the query against a table's columns.
    pub fn validate(&self, table: &str, columns: &[Column]) -> Result<(), QueryError> {
        let invalid = |msg: String| Err(QueryError::Invalid(msg));
        let ty = |name: &str| columns.iter().find(|c| c.name == name).map(|c| c.ty);
        if self.source != table {
            return invalid(format!("unknown table `{}`", self.source));
        }
        for f in &self.filters {
            let Some(t) = ty(&f.column) else {
                return invalid(format!("unknown column `{}`", f.column));
            };
            let ok = match (&f.value, t) {
                (Literal::Number(n), ColumnType::Number) => n.is_finite(),
                (Literal::Text(_), ColumnType::String | ColumnType::Date) => true,
                _ => false,
            };
            if !ok {
                return invalid(format!("literal `{}` does not fit column `{}`", f.value, f.column));
            }
        }
        if let Some(agg) = &self.aggregate {
            if agg.func != AggFn::Count {
                match agg.column.as_deref().map(ty) {
                    Some(Some(ColumnType::Number)) => {}
                    Some(Some(_)) => return invalid(format!("{} needs a numeric column", agg.func.as_str())),
                    Some(None) => return invalid("aggregate over unknown column".into()),
                    None => return invalid(format!("{} needs a column", agg.func.as_str())),
                }
            } else if let Some(c) = &agg.column {
                if ty(c).is_none() {
                    return invalid(format!("unknown column `{c}`"));
                }
            }
            if !self.projection.is_empty() {
                return invalid("projection is not allowed on aggregate queries".into());
            }
        } else {
            if self.group_by.is_some() {
                return invalid("grouping needs an aggregate".into());
            }
            if !self.having.is_empty() {
                return invalid("aggregate conditions need an aggregate".into());
            }
        }
        if let Some(g) = &self.group_by {
            if ty(g).is_none() {
                return invalid(format!("unknown column `{g}`"));
            }
        }
        if self.having.iter().any(|h| !h.value.is_finite()) {
            return invalid("non-finite aggregate bound".into());
        }
        if let Some(top) = &self.top_k {
            if top.k < 1 {
                return invalid("top-k needs k of at least 1".into());
            }
            match (&self.aggregate, &top.by) {
                (Some(_), None) => {}
                (Some(_), Some(_)) => return invalid("top-k on an aggregate ranks by the aggregate".into()),
                (None, Some(b)) if ty(b) == Some(ColumnType::Number) => {}
                (None, Some(b)) => return invalid(format!("cannot rank by `{b}`")),
                (None, None) => return invalid("top-k needs an aggregate or a numeric order column".into()),
            }
        }
        for p in &self.projection {
            if ty(p).is_none() {
                return invalid(format!("unknown column `{p}`"));
            }
        }
        Ok(())
    }
}
