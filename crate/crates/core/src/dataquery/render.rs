use super::ast::{AggFn, Aggregate, Comparator, Literal, Order, QueryAst};
use super::{QueryError, TableSchema};
use crate::contract::format_number;

fn agg_phrase(agg: &Aggregate, schema: &TableSchema) -> String {
    let noun = schema.row_nouns.first().map(String::as_str).unwrap_or("records");
    match (agg.func, agg.column.as_deref()) {
        (AggFn::Count, _) => format!("number of {noun}"),
        (f, Some(c)) => {
            let word = match f {
                AggFn::Sum => "total",
                AggFn::Avg => "average",
                AggFn::Min => "minimum",
                _ => "maximum",
            };
            format!("{word} {}", schema.phrase(c))
        }
        (_, None) => "records".to_string(),
    }
}

fn cmp_phrase(cmp: Comparator, value: &Literal) -> &'static str {
    match (cmp, value) {
        (Comparator::Gt, _) => "more than ",
        (Comparator::Lt, _) => "less than ",
        (Comparator::Ge, _) => "at least ",
        (Comparator::Le, _) => "at most ",
        (Comparator::Ne, _) => "other than ",
        (Comparator::Eq, Literal::Number(_)) => "exactly ",
        (Comparator::Eq, Literal::Text(_)) => "",
    }
}

/// Canonical English for a query; parsing the output yields the same AST.
/// Projections and counts over a named column have no canonical form.
pub fn render(ast: &QueryAst, schema: &TableSchema) -> Result<String, QueryError> {
    if !ast.projection.is_empty() {
        return Err(QueryError::Invalid("projections cannot be rendered".into()));
    }
    if ast
        .aggregate
        .as_ref()
        .is_some_and(|a| a.func == AggFn::Count && a.column.is_some())
    {
        return Err(QueryError::Invalid("count over a column cannot be rendered".into()));
    }
    let noun = schema.row_nouns.first().map(String::as_str).unwrap_or("records");
    let mut out = String::new();
    out.push_str(if ast.aggregate.is_some() { "show the" } else { "list the" });
    if let Some(top) = &ast.top_k {
        let word = match top.order {
            Order::Desc => "top",
            Order::Asc => "bottom",
        };
        out.push_str(&format!(" {word} {}", top.k));
    }
    match &ast.aggregate {
        Some(agg) => {
            out.push(' ');
            out.push_str(&agg_phrase(agg, schema));
        }
        None => {
            out.push(' ');
            out.push_str(noun);
        }
    }

    let mut conds = Vec::new();
    for f in &ast.filters {
        let value = match &f.value {
            Literal::Number(n) => format_number(*n),
            Literal::Text(s) => s.clone(),
        };
        conds.push(format!(
            "{} {}{value}",
            schema.phrase(&f.column),
            cmp_phrase(f.comparator, &f.value)
        ));
    }
    if let Some(agg) = &ast.aggregate {
        for h in &ast.having {
            let lit = Literal::Number(h.value);
            conds.push(format!(
                "{} {}{}",
                agg_phrase(agg, schema),
                cmp_phrase(h.comparator, &lit),
                format_number(h.value)
            ));
        }
    }
    if !conds.is_empty() {
        out.push_str(" with ");
        out.push_str(&conds.join(" and "));
    }

    if let Some(g) = &ast.group_by {
        out.push_str(&format!(" per {}", schema.phrase(g)));
    } else if let Some(by) = ast.top_k.as_ref().and_then(|t| t.by.as_deref()) {
        out.push_str(&format!(" by {}", schema.phrase(by)));
    }
    Ok(out)
}
