use std::fmt;

use thiserror::Error;

use super::ast::{AggFn, Aggregate, Comparator, Filter, Having, Literal, Order, QueryAst, TopK};
use super::TableSchema;
use crate::contract::ColumnType;
use crate::nlu::{parse_date, parse_money, parse_number, tokenize};

/// Failure to parse, with the longest prefix that was understood.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ParseError {
    pub message: String,
    pub prefix: String,
    pub offending: Option<String>,
    pub consumed: usize,
    pub total: usize,
    /// Whether the question named something the table holds (e.g. "borrowers").
    pub subject_found: bool,
}

impl ParseError {
    /// Share of tokens in the valid prefix.
    pub fn prefix_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.consumed as f64 / self.total as f64
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.offending {
            Some(tok) => write!(f, "{} at `{tok}`", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

const LEADS: &[&str] = &[
    "who are",
    "who is",
    "what are",
    "what is",
    "whats",
    "show me",
    "show",
    "list",
    "find",
    "give me",
    "display",
    "how many",
];

const CONNECTORS: &[&str] = &[
    "with",
    "where",
    "whose",
    "having",
    "that have",
    "that has",
    "who have",
    "who has",
    "have",
    "has",
];

const STOP_WORDS: &[&str] = &["and", "but", "per", "by"];

fn agg_words() -> Vec<(&'static str, AggFn)> {
    vec![
        ("average", AggFn::Avg),
        ("avg", AggFn::Avg),
        ("mean", AggFn::Avg),
        ("total", AggFn::Sum),
        ("sum of", AggFn::Sum),
        ("sum", AggFn::Sum),
        ("number of", AggFn::Count),
        ("count of", AggFn::Count),
        ("maximum", AggFn::Max),
        ("max", AggFn::Max),
        ("highest", AggFn::Max),
        ("minimum", AggFn::Min),
        ("min", AggFn::Min),
        ("lowest", AggFn::Min),
    ]
}

fn comparators() -> Vec<(&'static str, Comparator)> {
    vec![
        ("more than", Comparator::Gt),
        ("greater than", Comparator::Gt),
        ("over", Comparator::Gt),
        ("above", Comparator::Gt),
        ("less than", Comparator::Lt),
        ("fewer than", Comparator::Lt),
        ("below", Comparator::Lt),
        ("under", Comparator::Lt),
        ("at least", Comparator::Ge),
        ("at most", Comparator::Le),
        ("exactly", Comparator::Eq),
        ("equal to", Comparator::Eq),
        ("equals", Comparator::Eq),
        ("other than", Comparator::Ne),
        ("not equal to", Comparator::Ne),
        ("not", Comparator::Ne),
    ]
}

#[derive(Debug, Clone, PartialEq)]
enum Subject {
    Rows,
    Agg(Aggregate),
}

struct Cond {
    agg: Option<Aggregate>,
    column: Option<String>,
    comparator: Comparator,
    value: Literal,
}

struct Parser<'a> {
    schema: &'a TableSchema,
    tokens: Vec<String>,
    pos: usize,
    subject_found: bool,
}

impl<'a> Parser<'a> {
    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            message: message.into(),
            prefix: self.tokens[..self.pos].join(" "),
            offending: self.tokens.get(self.pos).cloned(),
            consumed: self.pos,
            total: self.tokens.len(),
            subject_found: self.subject_found,
        }
    }

    fn at(&self, phrase: &[String]) -> bool {
        !phrase.is_empty()
            && self.tokens.len() >= self.pos + phrase.len()
            && self.tokens[self.pos..self.pos + phrase.len()] == *phrase
    }

    /// Longest candidate phrase matching at the cursor; consumes it.
    fn longest<T: Clone>(&mut self, candidates: &[(Vec<String>, T)]) -> Option<T> {
        let best = candidates
            .iter()
            .filter(|(p, _)| self.at(p))
            .max_by_key(|(p, _)| p.len())?;
        self.pos += best.0.len();
        Some(best.1.clone())
    }

    fn phrases<T: Clone>(list: &[(&str, T)]) -> Vec<(Vec<String>, T)> {
        list.iter().map(|(p, t)| (tokenize(p), t.clone())).collect()
    }

    fn take(&mut self, word: &str) -> bool {
        if self.tokens.get(self.pos).is_some_and(|t| t == word) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn column(&mut self) -> Option<String> {
        let mut cands = Vec::new();
        for c in &self.schema.columns {
            cands.push((tokenize(&c.name.replace('_', " ")), c.name.clone()));
            for s in &c.synonyms {
                cands.push((tokenize(s), c.name.clone()));
            }
        }
        self.longest(&cands)
    }

    fn row_noun(&mut self) -> bool {
        let cands: Vec<(Vec<String>, ())> =
            self.schema.row_nouns.iter().map(|n| (tokenize(n), ())).collect();
        self.longest(&cands).is_some()
    }

    /// `agg column` or `number of [row-noun]`.
    fn aggregate(&mut self) -> Result<Option<Aggregate>, ParseError> {
        let Some(func) = self.longest(&Self::phrases(&agg_words())) else {
            return Ok(None);
        };
        if func == AggFn::Count {
            self.row_noun();
            return Ok(Some(Aggregate::count()));
        }
        let Some(col) = self.column() else {
            return Err(self.error(format!("expected a column after `{}`", func.as_str())));
        };
        Ok(Some(Aggregate::of(func, &col)))
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let n = self.tokens.get(self.pos).and_then(|t| parse_money(t));
        match n {
            Some(n) => {
                self.pos += 1;
                Ok(n)
            }
            None => Err(self.error("expected a number")),
        }
    }

    fn cond(&mut self) -> Result<Cond, ParseError> {
        let agg = self.aggregate()?;
        let column = match &agg {
            Some(_) => None,
            None => Some(self.column().ok_or_else(|| self.error("expected a column"))?),
        };
        let _ = self.take("is") || self.take("are") || self.take("of");
        let comparator = self.longest(&Self::phrases(&comparators()));
        let ty = column
            .as_deref()
            .and_then(|c| self.schema.column_type(c))
            .unwrap_or(ColumnType::Number);
        let value = match ty {
            ColumnType::Number => Literal::Number(self.number()?),
            ColumnType::Date => {
                let d = self.tokens.get(self.pos).and_then(|t| parse_date(t));
                match d {
                    Some(d) => {
                        self.pos += 1;
                        Literal::Text(d)
                    }
                    None => return Err(self.error("expected a date like 2019-05-01")),
                }
            }
            ColumnType::String => {
                let start = self.pos;
                while self
                    .tokens
                    .get(self.pos)
                    .is_some_and(|t| !STOP_WORDS.contains(&t.as_str()))
                {
                    self.pos += 1;
                }
                if self.pos == start {
                    return Err(self.error("expected a value"));
                }
                Literal::Text(self.tokens[start..self.pos].join(" "))
            }
        };
        Ok(Cond {
            agg,
            column,
            comparator: comparator.unwrap_or(Comparator::Eq),
            value,
        })
    }

    fn parse(mut self) -> Result<QueryAst, ParseError> {
        let lead = self.longest(&Self::phrases(&LEADS.iter().map(|l| (*l, *l)).collect::<Vec<_>>()));
        let how_many = lead == Some("how many");
        self.take("the");

        let mut top = None;
        for (word, order) in [("top", Order::Desc), ("bottom", Order::Asc)] {
            if self.take(word) {
                let k = self.tokens.get(self.pos).and_then(|t| parse_number(t));
                match k {
                    Some(k) if k >= 1.0 && k.fract() == 0.0 => {
                        self.pos += 1;
                        top = Some((k as usize, order));
                    }
                    Some(_) => return Err(self.error("the number of results must be a whole number of at least 1")),
                    None => return Err(self.error("expected how many results to show")),
                }
            }
        }
        self.take("all");
        self.take("the");

        let subject = if let Some(agg) = self.aggregate()? {
            if !self.take("of") {
                self.take("for");
            }
            self.take("all");
            self.take("the");
            self.row_noun();
            Subject::Agg(agg)
        } else if self.row_noun() {
            Subject::Rows
        } else {
            return Err(self.error("expected what to look for, such as borrowers"));
        };
        self.subject_found = true;

        let mut conds = Vec::new();
        if self.longest(&Self::phrases(&CONNECTORS.iter().map(|c| (*c, ())).collect::<Vec<_>>())).is_some() {
            conds.push(self.cond()?);
            while self.take("and") || self.take("but") {
                conds.push(self.cond()?);
            }
        }

        let mut by_col = None;
        let mut by_agg = None;
        if self.take("per") || self.take("by") {
            if let Some(agg) = self.aggregate()? {
                by_agg = Some(agg);
            } else {
                by_col = Some(self.column().ok_or_else(|| self.error("expected a column to group by"))?);
            }
        }
        if self.pos < self.tokens.len() {
            return Err(self.error("unexpected words"));
        }
        self.assemble(how_many, top, subject, conds, by_col, by_agg)
    }

    fn assemble(
        &self,
        how_many: bool,
        top: Option<(usize, Order)>,
        subject: Subject,
        conds: Vec<Cond>,
        by_col: Option<String>,
        by_agg: Option<Aggregate>,
    ) -> Result<QueryAst, ParseError> {
        let mut ast = QueryAst::rows_of(&self.schema.table);
        let mut having_agg: Option<Aggregate> = None;
        for c in conds {
            match (c.agg, c.column, c.value) {
                (Some(agg), _, Literal::Number(v)) => {
                    if having_agg.as_ref().is_some_and(|h| *h != agg) {
                        return Err(self.error("conditions on two different aggregates"));
                    }
                    having_agg = Some(agg);
                    ast.having.push(Having {
                        comparator: c.comparator,
                        value: v,
                    });
                }
                (None, Some(column), value) => ast.filters.push(Filter {
                    column,
                    comparator: c.comparator,
                    value,
                }),
                _ => return Err(self.error("malformed condition")),
            }
        }

        let subject_agg = match subject {
            Subject::Agg(a) => Some(a),
            Subject::Rows if how_many => Some(Aggregate::count()),
            Subject::Rows => None,
        };
        if how_many && having_agg.is_some() {
            return Err(self.error("cannot count groups filtered on an aggregate"));
        }
        let mut aggregate = subject_agg.clone();
        for other in [having_agg.clone(), by_agg.clone()].into_iter().flatten() {
            match &aggregate {
                Some(a) if *a != other => return Err(self.error("mixes two different aggregates")),
                _ => aggregate = Some(other),
            }
        }

        let mut top_by = None;
        match (&by_col, &aggregate) {
            (Some(c), Some(_)) => ast.group_by = Some(c.clone()),
            (Some(c), None) if top.is_some() => top_by = Some(c.clone()),
            (Some(_), None) => return Err(self.error("grouping needs an aggregate such as average")),
            (None, Some(_)) if subject_agg.is_none() => ast.group_by = Some(self.schema.key_column.clone()),
            _ => {}
        }
        ast.aggregate = aggregate;
        if let Some((k, order)) = top {
            ast.top_k = Some(TopK { k, order, by: top_by });
        }
        ast.validate(&self.schema.table, &self.schema.columns())
            .map_err(|e| self.error(e.to_string()))?;
        Ok(ast)
    }
}

/// Parses a question into a query over the schema's table.
pub fn parse_query(text: &str, schema: &TableSchema) -> Result<QueryAst, ParseError> {
    Parser {
        schema,
        tokens: tokenize(text),
        pos: 0,
        subject_found: false,
    }
    .parse()
}
