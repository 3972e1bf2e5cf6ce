use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::ast::{AggFn, Comparator, Literal, Order, QueryAst};
use super::{QueryError, QueryResult, Table};
use crate::contract::{Cell, Column, ColumnType};

/// Comparison key for String cells: lowercase alphanumerics only, so
/// "V. Doe" and "v doe" are the same borrower.
pub fn text_key(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

fn compare_cell(cell: &Cell, ty: ColumnType, lit: &Literal) -> Ordering {
    match (cell, lit) {
        (Cell::Number(a), Literal::Number(b)) => a.partial_cmp(b).unwrap_or(Ordering::Equal),
        (Cell::Text(a), Literal::Text(b)) if ty == ColumnType::String => text_key(a).cmp(&text_key(b)),
        (Cell::Text(a), Literal::Text(b)) => a.as_str().cmp(b.as_str()),
        // Validation rules out mixed kinds.
        _ => Ordering::Equal,
    }
}

/// Group identity: numbers by value, text by folded key. The first spelling
/// seen in table order represents the group.
#[derive(Debug, Clone)]
struct GroupKey(Cell);

impl PartialEq for GroupKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for GroupKey {}

impl Ord for GroupKey {
    fn cmp(&self, other: &Self) -> Ordering {
        match (&self.0, &other.0) {
            (Cell::Number(a), Cell::Number(b)) => a.partial_cmp(b).unwrap_or(Ordering::Equal),
            (Cell::Text(a), Cell::Text(b)) => text_key(a).cmp(&text_key(b)),
            (Cell::Number(_), Cell::Text(_)) => Ordering::Less,
            (Cell::Text(_), Cell::Number(_)) => Ordering::Greater,
        }
    }
}

impl PartialOrd for GroupKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy)]
struct Acc {
    count: usize,
    sum: f64,
    min: f64,
    max: f64,
}

impl Acc {
    fn new() -> Self {
        Self {
            count: 0,
            sum: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    fn push(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        if v < self.min {
            self.min = v;
        }
        if v > self.max {
            self.max = v;
        }
    }

    fn value(&self, func: AggFn) -> Option<f64> {
        match func {
            AggFn::Count => Some(self.count as f64),
            AggFn::Sum => Some(self.sum),
            _ if self.count == 0 => None,
            AggFn::Avg => Some(self.sum / self.count as f64),
            AggFn::Min => Some(self.min),
            AggFn::Max => Some(self.max),
        }
    }
}

/// Runs a validated query: filter, group, aggregate, having, order, top-k,
/// project. The result is never truncated here.
pub fn evaluate(ast: &QueryAst, table: &Table) -> Result<QueryResult, QueryError> {
    ast.validate(&table.name, &table.columns)?;
    let col = |name: &str| table.column_index(name).expect("validated column");

    let preds: Vec<(usize, ColumnType, Comparator, &Literal)> = ast
        .filters
        .iter()
        .map(|f| {
            let i = col(&f.column);
            (i, table.columns[i].ty, f.comparator, &f.value)
        })
        .collect();
    let matched: Vec<&Vec<Cell>> = table
        .rows
        .iter()
        .filter(|row| {
            preds
                .iter()
                .all(|(i, ty, cmp, lit)| cmp.holds(compare_cell(&row[*i], *ty, lit)))
        })
        .collect();

    let Some(agg) = &ast.aggregate else {
        return Ok(rows_result(ast, table, matched));
    };
    let agg_col = match (agg.func, &agg.column) {
        (AggFn::Count, _) | (_, None) => None,
        (_, Some(c)) => Some(col(c)),
    };
    let value_of = |row: &Vec<Cell>| agg_col.and_then(|i| row[i].as_f64()).unwrap_or(0.0);
    let passes_having = |v: f64| {
        ast.having
            .iter()
            .all(|h| h.comparator.holds(v.partial_cmp(&h.value).unwrap_or(Ordering::Equal)))
    };
    let agg_column = Column::new(agg.output_name(), ColumnType::Number);

    let Some(group) = &ast.group_by else {
        let mut acc = Acc::new();
        for row in &matched {
            acc.push(value_of(row));
        }
        let rows = match acc.value(agg.func) {
            Some(v) if passes_having(v) => vec![vec![Cell::Number(v)]],
            _ => Vec::new(),
        };
        return Ok(QueryResult::new(vec![agg_column], rows));
    };

    let gi = col(group);
    let mut groups: BTreeMap<GroupKey, Acc> = BTreeMap::new();
    for row in &matched {
        groups
            .entry(GroupKey(row[gi].clone()))
            .or_insert_with(Acc::new)
            .push(value_of(row));
    }
    let mut out: Vec<(GroupKey, f64)> = groups
        .into_iter()
        .filter_map(|(k, acc)| acc.value(agg.func).map(|v| (k, v)))
        .filter(|(_, v)| passes_having(*v))
        .collect();
    if let Some(top) = &ast.top_k {
        // Keys are already ascending, so a stable sort keeps that as the tie-break.
        out.sort_by(|a, b| match top.order {
            Order::Desc => b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal),
            Order::Asc => a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal),
        });
        out.truncate(top.k);
    }
    let rows = out
        .into_iter()
        .map(|(k, v)| vec![k.0, Cell::Number(v)])
        .collect();
    Ok(QueryResult::new(
        vec![table.columns[gi].clone(), agg_column],
        rows,
    ))
}

fn rows_result(ast: &QueryAst, table: &Table, mut matched: Vec<&Vec<Cell>>) -> QueryResult {
    if let Some(top) = &ast.top_k {
        let by = top
            .by
            .as_deref()
            .and_then(|b| table.column_index(b))
            .expect("validated order column");
        let num = |row: &Vec<Cell>| row[by].as_f64().unwrap_or(0.0);
        matched.sort_by(|a, b| match top.order {
            Order::Desc => num(b).partial_cmp(&num(a)).unwrap_or(Ordering::Equal),
            Order::Asc => num(a).partial_cmp(&num(b)).unwrap_or(Ordering::Equal),
        });
        matched.truncate(top.k);
    }
    let picks: Vec<usize> = if ast.projection.is_empty() {
        (0..table.columns.len()).collect()
    } else {
        ast.projection
            .iter()
            .map(|p| table.column_index(p).expect("validated projection"))
            .collect()
    };
    let columns = picks.iter().map(|&i| table.columns[i].clone()).collect();
    let rows = matched
        .into_iter()
        .map(|row| picks.iter().map(|&i| row[i].clone()).collect())
        .collect();
    QueryResult::new(columns, rows)
}
