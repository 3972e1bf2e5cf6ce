use std::collections::BTreeMap;
use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Primitive type of a table column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ColumnType {
    String,
    Number,
    Date,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ColumnType,
}

impl Column {
    pub fn new(name: impl Into<String>, ty: ColumnType) -> Self {
        Self {
            name: name.into(),
            ty,
        }
    }
}

/// A single table cell. Dates are ISO-8601 (`YYYY-MM-DD`) strings and order
/// lexicographically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Number(f64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Number(n) => Some(*n),
            Cell::Text(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            Cell::Number(_) => None,
        }
    }

    pub fn matches_type(&self, ty: ColumnType) -> bool {
        matches!(
            (self, ty),
            (Cell::Number(_), ColumnType::Number)
                | (Cell::Text(_), ColumnType::String)
                | (Cell::Text(_), ColumnType::Date)
        )
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Number(n) => write!(f, "{}", format_number(*n)),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

/// Renders a number without a trailing `.0` for integral values.
pub fn format_number(n: f64) -> String {
    if n.fract() == 0.0 && n.abs() < 1e15 {
        format!("{}", n as i64)
    } else {
        format!("{n}")
    }
}

/// Whole dollars with thousands separators, e.g. `$584,917`. Fractions
/// are rounded.
pub fn format_money(n: f64) -> String {
    let rounded = n.round();
    let digits = format!("{}", rounded.abs() as i64);
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    let sign = if rounded < 0.0 { "-" } else { "" };
    format!("{sign}${out}")
}

/// Tabular payload carried in context values and table responses.
///
/// `total_count` is the size of the full result; `rows` may hold fewer when
/// `truncated` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TablePayload {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
    pub total_count: usize,
    pub truncated: bool,
}

impl TablePayload {
    pub fn new(columns: Vec<Column>, rows: Vec<Vec<Cell>>) -> Self {
        let total_count = rows.len();
        Self {
            columns,
            rows,
            total_count,
            truncated: false,
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Keeps at most `limit` rows, preserving `total_count`.
    pub fn truncated_to(&self, limit: usize) -> Self {
        if self.rows.len() <= limit {
            return self.clone();
        }
        Self {
            columns: self.columns.clone(),
            rows: self.rows[..limit].to_vec(),
            total_count: self.total_count,
            truncated: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableEnvelope {
    #[serde(rename = "$table")]
    table: TablePayload,
}

/// A context value. The set is closed so the wire contract stays checkable.
///
/// On the wire this is plain JSON, except tables which are wrapped as
/// `{"$table": {...}}` so they cannot be confused with maps.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    String(String),
    Number(f64),
    Bool(bool),
    List(Vec<Value>),
    Map(BTreeMap<String, Value>),
    Table(TablePayload),
}

impl Value {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::String(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Number(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_table(&self) -> Option<&TablePayload> {
        match self {
            Value::Table(t) => Some(t),
            _ => None,
        }
    }

    pub fn as_map(&self) -> Option<&BTreeMap<String, Value>> {
        match self {
            Value::Map(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Value]> {
        match self {
            Value::List(l) => Some(l),
            _ => None,
        }
    }

    /// Converts any serializable type into a context value.
    pub fn from_serde<T: Serialize>(value: &T) -> Result<Self, serde_json::Error> {
        serde_json::to_value(value).and_then(serde_json::from_value)
    }

    /// Reads a context value back into a typed structure.
    pub fn to_serde<T: DeserializeOwned>(&self) -> Result<T, serde_json::Error> {
        serde_json::to_value(self).and_then(serde_json::from_value)
    }

    /// Every map key (recursively) is non-empty.
    pub fn is_well_formed(&self) -> bool {
        match self {
            Value::List(items) => items.iter().all(Value::is_well_formed),
            Value::Map(m) => m.iter().all(|(k, v)| !k.is_empty() && v.is_well_formed()),
            Value::Number(n) => n.is_finite(),
            _ => true,
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::String(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::String(s)
    }
}

impl From<f64> for Value {
    fn from(n: f64) -> Self {
        Value::Number(n)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<TablePayload> for Value {
    fn from(t: TablePayload) -> Self {
        Value::Table(t)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::String(s) => f.write_str(s),
            Value::Number(n) => f.write_str(&format_number(*n)),
            Value::Bool(b) => write!(f, "{b}"),
            other => {
                let json = serde_json::to_string(other).map_err(|_| fmt::Error)?;
                f.write_str(&json)
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum WireValue {
    Bool(bool),
    Number(f64),
    String(String),
    List(Vec<Value>),
    Table(TableEnvelope),
    Map(BTreeMap<String, Value>),
}

impl Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::String(s) => serializer.serialize_str(s),
            Value::Number(n) => serializer.serialize_f64(*n),
            Value::Bool(b) => serializer.serialize_bool(*b),
            Value::List(items) => items.serialize(serializer),
            Value::Map(m) => m.serialize(serializer),
            Value::Table(t) => TableEnvelope { table: t.clone() }.serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(match WireValue::deserialize(deserializer)? {
            WireValue::Bool(b) => Value::Bool(b),
            WireValue::Number(n) => Value::Number(n),
            WireValue::String(s) => Value::String(s),
            WireValue::List(l) => Value::List(l),
            WireValue::Table(t) => Value::Table(t.table),
            WireValue::Map(m) => Value::Map(m),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_is_distinguished_from_map() {
        let t = TablePayload::new(
            vec![Column::new("a", ColumnType::Number)],
            vec![vec![Cell::Number(1.0)]],
        );
        let v = Value::Table(t);
        let json = serde_json::to_string(&v).unwrap();
        assert!(json.starts_with("{\"$table\""));
        assert_eq!(serde_json::from_str::<Value>(&json).unwrap(), v);

        let mut m = BTreeMap::new();
        m.insert("columns".to_string(), Value::List(vec![]));
        let v = Value::Map(m);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<Value>(&json).unwrap(), v);
    }

    #[test]
    fn integral_numbers_render_without_fraction() {
        assert_eq!(format_number(550.0), "550");
        assert_eq!(format_number(1.5), "1.5");
        assert_eq!(Value::Number(10000.0).to_string(), "10000");
    }

    #[test]
    fn truncation_keeps_total() {
        let rows = (0..30).map(|i| vec![Cell::Number(i as f64)]).collect();
        let t = TablePayload::new(vec![Column::new("n", ColumnType::Number)], rows);
        let cut = t.truncated_to(20);
        assert_eq!(cut.rows.len(), 20);
        assert_eq!(cut.total_count, 30);
        assert!(cut.truncated);
        assert!(!t.truncated_to(50).truncated);
    }
}
