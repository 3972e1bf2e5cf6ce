use std::sync::Arc;

use async_trait::async_trait;

use super::{ids, text, World, LAST_RESULT};
use crate::contract::{
    format_money, format_number, Agent, AgentDescriptor, AgentError, AgentPreview, AgentResult, Cell, ChartKind,
    ChartSpec, ColumnType, Context, FileAttachment, ResponsePayload, TablePayload, TaxonomyClass, Utterance, Value,
};
use crate::dataquery::{text_key, write_csv};
use crate::nlu::NluModel;

const MAX_BINS: usize = 10;

/// Equal-width bins over `values`, Sturges' count capped at ten. Returns
/// (lower, upper, count) per bin; the last bin includes its upper edge.
pub fn histogram(values: &[f64]) -> Vec<(f64, f64, usize)> {
    if values.is_empty() {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return vec![(lo, hi, values.len())];
    }
    let bins = ((values.len() as f64).log2().ceil() as usize + 1).clamp(1, MAX_BINS);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in values {
        let i = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[i] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let a = lo + width * i as f64;
            let b = if i + 1 == bins { hi } else { lo + width * (i + 1) as f64 };
            (a, b, c)
        })
        .collect()
}

fn last_result(ctx: &Context) -> Option<&TablePayload> {
    ctx.shared(LAST_RESULT).and_then(Value::as_table)
}

/// Charts over the most recent result.
pub struct VisualizationAgent {
    descriptor: AgentDescriptor,
    model: NluModel,
    world: Arc<World>,
}

impl VisualizationAgent {
    pub fn new(model: NluModel, world: Arc<World>) -> Self {
        Self {
            descriptor: AgentDescriptor::new(ids::VISUALIZATION, "Visualization", TaxonomyClass::DataAnalytics, false)
                .consumes(LAST_RESULT),
            model,
            world,
        }
    }

    fn phrase(&self, column: &str) -> String {
        if self.world.loan_schema.column(column).is_some() {
            self.world.loan_schema.phrase(column)
        } else if self.world.travel_schema.column(column).is_some() {
            self.world.travel_schema.phrase(column)
        } else {
            column.replace('_', " ")
        }
    }

    /// Money columns, including aggregates over one such as `avg_amount`.
    fn is_money(&self, column: &str) -> bool {
        let base = ["avg_", "sum_", "min_", "max_"]
            .iter()
            .find_map(|p| column.strip_prefix(p))
            .unwrap_or(column);
        self.world.loan_schema.is_money(base) || self.world.travel_schema.is_money(base)
    }

    fn respond(&self, u: &Utterance, ctx: &Context) -> AgentPreview {
        let nlu = self.model.classify(&u.text);
        if !nlu.is("plot") {
            return AgentPreview::new(ids::VISUALIZATION, text(""), 0.0, false);
        }
        let Some(table) = last_result(ctx) else {
            return AgentPreview::new(
                ids::VISUALIZATION,
                text("There is no result to plot yet. Ask a data question first."),
                0.5 * nlu.confidence,
                false,
            );
        };
        let requested = nlu.entity_str("column");
        let column = match requested {
            Some(c) => table.columns.iter().position(|col| col.name == c),
            None => table
                .columns
                .iter()
                .rposition(|c| c.ty == ColumnType::Number)
                .or((!table.columns.is_empty()).then_some(0)),
        };
        let Some(ci) = column else {
            return AgentPreview::new(
                ids::VISUALIZATION,
                text(format!(
                    "The last result has no {} column.",
                    requested.map(|c| self.phrase(c)).unwrap_or_default()
                )),
                0.5 * nlu.confidence,
                false,
            );
        };
        let kind = nlu.entity_str("chart_type").and_then(ChartKind::parse).unwrap_or(ChartKind::Bar);
        let chart = self.chart(table, ci, kind);
        let n = table.rows.len();
        let msg = if n == 0 {
            format!("There are no records to plot, so the {} chart is empty.", kind.as_str())
        } else {
            format!(
                "Here is the {} chart per {} over {} records.",
                kind.as_str(),
                self.phrase(&table.columns[ci].name),
                n
            )
        };
        AgentPreview::new(
            ids::VISUALIZATION,
            ResponsePayload::composite(vec![text(msg), ResponsePayload::chart(chart)]),
            nlu.confidence,
            false,
        )
    }

    fn chart(&self, table: &TablePayload, ci: usize, kind: ChartKind) -> ChartSpec {
        let col = &table.columns[ci];
        let phrase = self.phrase(&col.name);
        let (labels, values, y_label) = if col.ty == ColumnType::Number {
            let nums: Vec<f64> = table.rows.iter().filter_map(|r| r.get(ci).and_then(Cell::as_f64)).collect();
            let key = table
                .columns
                .iter()
                .position(|c| c.ty == ColumnType::String)
                .filter(|&k| k != ci && distinct_keys(table, k) && table.rows.len() <= 20 && table.columns.len() <= 3);
            match key {
                // A small keyed result (a top-k list, say) plots one bar per row.
                Some(k) => (
                    table.rows.iter().map(|r| r[k].to_string()).collect(),
                    nums,
                    phrase.clone(),
                ),
                None => {
                    let money = self.is_money(&col.name);
                    let fmt = |v: f64| if money { format_money(v) } else { format_number(v.round()) };
                    let bins = histogram(&nums);
                    (
                        bins.iter().map(|(a, b, _)| format!("{} to {}", fmt(*a), fmt(*b))).collect(),
                        bins.iter().map(|(_, _, c)| *c as f64).collect(),
                        "records".to_string(),
                    )
                }
            }
        } else {
            let mut cats: Vec<(String, String, usize)> = Vec::new();
            for r in &table.rows {
                let label = r.get(ci).map(ToString::to_string).unwrap_or_default();
                let key = text_key(&label);
                match cats.iter_mut().find(|(k, _, _)| *k == key) {
                    Some(c) => c.2 += 1,
                    None => cats.push((key, label, 1)),
                }
            }
            (
                cats.iter().map(|c| c.1.clone()).collect(),
                cats.iter().map(|c| c.2 as f64).collect(),
                "records".to_string(),
            )
        };
        ChartSpec {
            kind,
            title: format!("{} per {}", capitalize(&y_label), phrase),
            x_label: phrase,
            y_label,
            labels,
            values,
        }
    }
}

fn distinct_keys(table: &TablePayload, k: usize) -> bool {
    let mut keys: Vec<String> = table.rows.iter().map(|r| text_key(&r[k].to_string())).collect();
    keys.sort();
    keys.dedup();
    keys.len() == table.rows.len()
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

#[async_trait]
impl Agent for VisualizationAgent {
    fn descriptor(&self) -> &AgentDescriptor {
        &self.descriptor
    }

    async fn preview(&self, u: &Utterance, ctx: &Context) -> Result<AgentPreview, AgentError> {
        Ok(self.respond(u, ctx))
    }

    async fn execute(&self, u: &Utterance, ctx: &Context) -> Result<AgentResult, AgentError> {
        Ok(self.respond(u, ctx))
    }
}

/// Exports the most recent result as CSV.
pub struct DataExportAgent {
    descriptor: AgentDescriptor,
    model: NluModel,
}

impl DataExportAgent {
    pub fn new(model: NluModel) -> Self {
        Self {
            descriptor: AgentDescriptor::new(ids::DATA_EXPORT, "Data Export", TaxonomyClass::DataAnalytics, false)
                .consumes(LAST_RESULT),
            model,
        }
    }

    fn respond(&self, u: &Utterance, ctx: &Context) -> AgentPreview {
        let nlu = self.model.classify(&u.text);
        if !nlu.is("export") {
            return AgentPreview::new(ids::DATA_EXPORT, text(""), 0.0, false);
        }
        let Some(table) = last_result(ctx) else {
            return AgentPreview::new(
                ids::DATA_EXPORT,
                text("There is no result to export yet. Ask a data question first."),
                0.5 * nlu.confidence,
                false,
            );
        };
        let file = FileAttachment {
            filename: "result.csv".into(),
            media_type: "text/csv".into(),
            bytes: write_csv(&table.columns, &table.rows),
        };
        AgentPreview::new(
            ids::DATA_EXPORT,
            ResponsePayload::composite(vec![text("The result for your query is:"), ResponsePayload::attachment(file)]),
            nlu.confidence,
            false,
        )
    }
}

#[async_trait]
impl Agent for DataExportAgent {
    fn descriptor(&self) -> &AgentDescriptor {
        &self.descriptor
    }

    async fn preview(&self, u: &Utterance, ctx: &Context) -> Result<AgentPreview, AgentError> {
        Ok(self.respond(u, ctx))
    }

    async fn execute(&self, u: &Utterance, ctx: &Context) -> Result<AgentResult, AgentError> {
        Ok(self.respond(u, ctx))
    }
}
