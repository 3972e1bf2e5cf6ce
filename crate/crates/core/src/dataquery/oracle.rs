//! Reference evaluator for equivalence tests. Deliberately naive: nested
//! loops and selection sorts, sharing nothing with the real evaluator
//! beyond the AST and table types.

use super::ast::{AggFn, Comparator, Literal, Order, QueryAst};
use super::{QueryError, QueryResult, Table};
use crate::contract::{Cell, Column, ColumnType};

fn fold(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        if c.is_alphanumeric() {
            for l in c.to_lowercase() {
                out.push(l);
            }
        }
    }
    out
}

fn index_of(table: &Table, name: &str) -> usize {
    let mut i = 0;
    while i < table.columns.len() {
        if table.columns[i].name == name {
            return i;
        }
        i += 1;
    }
    panic!("column {name} not found");
}

fn test_num(a: f64, cmp: Comparator, b: f64) -> bool {
    match cmp {
        Comparator::Lt => a < b,
        Comparator::Le => a <= b,
        Comparator::Gt => a > b,
        Comparator::Ge => a >= b,
        Comparator::Eq => a == b,
        Comparator::Ne => a != b,
    }
}

fn test_str(a: &str, cmp: Comparator, b: &str) -> bool {
    match cmp {
        Comparator::Lt => a < b,
        Comparator::Le => a <= b,
        Comparator::Gt => a > b,
        Comparator::Ge => a >= b,
        Comparator::Eq => a == b,
        Comparator::Ne => a != b,
    }
}

fn row_passes(table: &Table, ast: &QueryAst, row: &[Cell]) -> bool {
    for f in &ast.filters {
        let i = index_of(table, &f.column);
        let ok = match (&row[i], &f.value) {
            (Cell::Number(a), Literal::Number(b)) => test_num(*a, f.comparator, *b),
            (Cell::Text(a), Literal::Text(b)) => {
                if table.columns[i].ty == ColumnType::String {
                    test_str(&fold(a), f.comparator, &fold(b))
                } else {
                    test_str(a, f.comparator, b)
                }
            }
            _ => false,
        };
        if !ok {
            return false;
        }
    }
    true
}

fn same_key(a: &Cell, b: &Cell) -> bool {
    match (a, b) {
        (Cell::Number(x), Cell::Number(y)) => x == y,
        (Cell::Text(x), Cell::Text(y)) => fold(x) == fold(y),
        _ => false,
    }
}

fn key_less(a: &Cell, b: &Cell) -> bool {
    match (a, b) {
        (Cell::Number(x), Cell::Number(y)) => x < y,
        (Cell::Text(x), Cell::Text(y)) => fold(x) < fold(y),
        (Cell::Number(_), Cell::Text(_)) => true,
        _ => false,
    }
}

/// Aggregate over `rows` (already in table order); `None` for avg/min/max
/// of nothing.
fn aggregate(rows: &[&Vec<Cell>], func: AggFn, col: Option<usize>) -> Option<f64> {
    let value = |r: &Vec<Cell>| match col {
        Some(i) => match r[i] {
            Cell::Number(n) => n,
            _ => 0.0,
        },
        None => 0.0,
    };
    match func {
        AggFn::Count => Some(rows.len() as f64),
        AggFn::Sum => {
            let mut s = 0.0;
            for r in rows {
                s += value(r);
            }
            Some(s)
        }
        AggFn::Avg => {
            if rows.is_empty() {
                return None;
            }
            let mut s = 0.0;
            for r in rows {
                s += value(r);
            }
            Some(s / rows.len() as f64)
        }
        AggFn::Min | AggFn::Max => {
            if rows.is_empty() {
                return None;
            }
            let mut best = value(rows[0]);
            for r in rows {
                let v = value(r);
                if (func == AggFn::Min && v < best) || (func == AggFn::Max && v > best) {
                    best = v;
                }
            }
            Some(best)
        }
    }
}

fn having_passes(ast: &QueryAst, v: f64) -> bool {
    for h in &ast.having {
        if !test_num(v, h.comparator, h.value) {
            return false;
        }
    }
    true
}

fn better(order: Order, a: f64, b: f64) -> bool {
    match order {
        Order::Desc => a > b,
        Order::Asc => a < b,
    }
}

pub fn oracle_evaluate(ast: &QueryAst, table: &Table) -> Result<QueryResult, QueryError> {
    ast.validate(&table.name, &table.columns)?;

    let mut matched: Vec<&Vec<Cell>> = Vec::new();
    for row in &table.rows {
        if row_passes(table, ast, row) {
            matched.push(row);
        }
    }

    let Some(agg) = &ast.aggregate else {
        let mut ordered: Vec<&Vec<Cell>> = Vec::new();
        if let Some(top) = &ast.top_k {
            let by = index_of(table, top.by.as_deref().unwrap_or_default());
            let mut remaining = matched.clone();
            while ordered.len() < top.k && !remaining.is_empty() {
                let mut best = 0;
                for j in 1..remaining.len() {
                    let (Cell::Number(vj), Cell::Number(vb)) = (&remaining[j][by], &remaining[best][by]) else {
                        continue;
                    };
                    if better(top.order, *vj, *vb) {
                        best = j;
                    }
                }
                ordered.push(remaining.remove(best));
            }
        } else {
            ordered = matched;
        }
        let mut picks = Vec::new();
        if ast.projection.is_empty() {
            for i in 0..table.columns.len() {
                picks.push(i);
            }
        } else {
            for p in &ast.projection {
                picks.push(index_of(table, p));
            }
        }
        let mut columns = Vec::new();
        for &i in &picks {
            columns.push(table.columns[i].clone());
        }
        let mut rows = Vec::new();
        for r in ordered {
            let mut out = Vec::new();
            for &i in &picks {
                out.push(r[i].clone());
            }
            rows.push(out);
        }
        return Ok(QueryResult::new(columns, rows));
    };

    let agg_col = if agg.func == AggFn::Count {
        None
    } else {
        agg.column.as_deref().map(|c| index_of(table, c))
    };
    let out_col = Column::new(agg.output_name(), ColumnType::Number);

    let Some(group) = &ast.group_by else {
        let mut rows = Vec::new();
        if let Some(v) = aggregate(&matched, agg.func, agg_col) {
            if having_passes(ast, v) {
                rows.push(vec![Cell::Number(v)]);
            }
        }
        return Ok(QueryResult::new(vec![out_col], rows));
    };

    let gi = index_of(table, group);
    let mut keys: Vec<Cell> = Vec::new();
    for r in &matched {
        let mut seen = false;
        for k in &keys {
            if same_key(k, &r[gi]) {
                seen = true;
            }
        }
        if !seen {
            keys.push(r[gi].clone());
        }
    }
    let mut groups: Vec<(Cell, f64)> = Vec::new();
    for k in keys {
        let mut members = Vec::new();
        for r in &matched {
            if same_key(&k, &r[gi]) {
                members.push(*r);
            }
        }
        if let Some(v) = aggregate(&members, agg.func, agg_col) {
            if having_passes(ast, v) {
                groups.push((k, v));
            }
        }
    }

    let limit = match &ast.top_k {
        Some(top) => top.k,
        None => usize::MAX,
    };
    let mut rows = Vec::new();
    while rows.len() < limit && !groups.is_empty() {
        let mut best = 0;
        for j in 1..groups.len() {
            let (kj, vj) = &groups[j];
            let (kb, vb) = &groups[best];
            let wins = match &ast.top_k {
                Some(top) => better(top.order, *vj, *vb) || (*vj == *vb && key_less(kj, kb)),
                None => key_less(kj, kb),
            };
            if wins {
                best = j;
            }
        }
        let (k, v) = groups.remove(best);
        rows.push(vec![k, Cell::Number(v)]);
    }
    Ok(QueryResult::new(
        vec![table.columns[gi].clone(), out_col],
        rows,
    ))
}

/// A random table of at most 50 rows and a valid query over it, for
/// equivalence testing. Values are drawn from small ranges so ties and
/// repeated group keys are common.
pub fn random_instance(seed: u64) -> (Table, QueryAst) {
    use super::ast::{Aggregate, Filter, Having, TopK};
    use rand::{Rng, SeedableRng};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let names = ["Ann", "ann", "Bo", "V. Doe", "v doe", "Cy"];
    let statuses = ["open", "Closed", "held"];
    let columns = vec![
        Column::new("name", ColumnType::String),
        Column::new("amount", ColumnType::Number),
        Column::new("score", ColumnType::Number),
        Column::new("day", ColumnType::Date),
        Column::new("status", ColumnType::String),
    ];
    let n = rng.random_range(0..=50);
    let mut rows = Vec::new();
    for _ in 0..n {
        rows.push(vec![
            Cell::Text(names[rng.random_range(0..names.len())].to_string()),
            Cell::Number(f64::from(rng.random_range(-5..=20i32)) * 2.5),
            Cell::Number(f64::from(rng.random_range(0..=9i32))),
            Cell::Text(format!("2019-0{}-1{}", rng.random_range(1..=3), rng.random_range(0..=2))),
            Cell::Text(statuses[rng.random_range(0..statuses.len())].to_string()),
        ]);
    }
    let table = Table::new("t", columns.clone(), rows).expect("well-typed rows");

    let cmps = Comparator::ALL;
    let numeric = ["amount", "score"];
    let mut ast = QueryAst::rows_of("t");
    for _ in 0..rng.random_range(0..=3) {
        let cmp = cmps[rng.random_range(0..cmps.len())];
        let filter = match rng.random_range(0..4) {
            0 => Filter {
                column: "name".into(),
                comparator: cmp,
                value: Literal::Text(names[rng.random_range(0..names.len())].to_lowercase()),
            },
            1 => Filter {
                column: "day".into(),
                comparator: cmp,
                value: Literal::Text(format!("2019-0{}-11", rng.random_range(1..=3))),
            },
            2 => Filter {
                column: "status".into(),
                comparator: cmp,
                value: Literal::Text(statuses[rng.random_range(0..statuses.len())].to_string()),
            },
            _ => Filter {
                column: numeric[rng.random_range(0..2)].into(),
                comparator: cmp,
                value: Literal::Number(f64::from(rng.random_range(-5..=20i32)) * 2.5),
            },
        };
        ast.filters.push(filter);
    }
    let funcs = [AggFn::Count, AggFn::Sum, AggFn::Avg, AggFn::Min, AggFn::Max];
    if rng.random_bool(0.6) {
        let func = funcs[rng.random_range(0..funcs.len())];
        ast.aggregate = Some(if func == AggFn::Count {
            Aggregate::count()
        } else {
            Aggregate::of(func, numeric[rng.random_range(0..2)])
        });
        if rng.random_bool(0.7) {
            let groupable = ["name", "status", "score", "day"];
            ast.group_by = Some(groupable[rng.random_range(0..groupable.len())].to_string());
        }
        for _ in 0..rng.random_range(0..=2) {
            ast.having.push(Having {
                comparator: cmps[rng.random_range(0..cmps.len())],
                value: f64::from(rng.random_range(-5..=40i32)),
            });
        }
        if rng.random_bool(0.5) {
            ast.top_k = Some(TopK {
                k: rng.random_range(1..=5),
                order: if rng.random_bool(0.5) { Order::Desc } else { Order::Asc },
                by: None,
            });
        }
    } else {
        if rng.random_bool(0.5) {
            ast.top_k = Some(TopK {
                k: rng.random_range(1..=8),
                order: if rng.random_bool(0.5) { Order::Desc } else { Order::Asc },
                by: Some(numeric[rng.random_range(0..2)].to_string()),
            });
        }
        if rng.random_bool(0.4) {
            for c in &columns {
                if rng.random_bool(0.5) {
                    ast.projection.push(c.name.clone());
                }
            }
        }
    }
    (table, ast)
}
