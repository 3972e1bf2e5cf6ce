//! Plain-text rendering of turn results for the terminal.

use std::fmt::Write as _;
use std::path::Path;

use bpassist_core::contract::{format_number, ChartSpec, FileAttachment, Modality, ResponsePayload, TablePayload};
use bpassist_core::orchestrator::TurnResult;

/// Each response followed by the responding agent in brackets. Attachments
/// are written into `save_dir` when given.
pub fn render_turn(turn: &TurnResult, save_dir: Option<&Path>) -> String {
    let mut out = String::new();
    for r in &turn.responses {
        let mut lines = Vec::new();
        render_payload(&r.response, save_dir, &mut lines);
        if lines.is_empty() {
            lines.push(String::new());
        }
        lines[0] = format!("{} [{}]", lines[0], r.agent_id).trim_start().to_string();
        for l in lines {
            out.push_str(&l);
            out.push('\n');
        }
    }
    out
}

fn render_payload(p: &ResponsePayload, save_dir: Option<&Path>, lines: &mut Vec<String>) {
    match p.modality {
        Modality::Text => lines.extend(p.text.iter().flat_map(|t| t.lines().map(str::to_string))),
        Modality::Table => lines.extend(p.table.iter().flat_map(render_table)),
        Modality::ChartSpec => lines.extend(p.chart.iter().map(render_chart)),
        Modality::FileAttachment => lines.extend(p.attachment.iter().map(|a| render_file(a, save_dir))),
        Modality::Composite => {
            for part in p.parts.iter().flatten() {
                render_payload(part, save_dir, lines);
            }
        }
    }
}

/// Columns padded to their widest cell, numbers right-aligned.
pub fn render_table(t: &TablePayload) -> Vec<String> {
    let cells: Vec<Vec<String>> = t.rows.iter().map(|r| r.iter().map(ToString::to_string).collect()).collect();
    let numeric: Vec<bool> = (0..t.columns.len())
        .map(|i| t.rows.iter().all(|r| r.get(i).and_then(|c| c.as_f64()).is_some()))
        .collect();
    let widths: Vec<usize> = t
        .columns
        .iter()
        .enumerate()
        .map(|(i, c)| {
            cells
                .iter()
                .filter_map(|r| r.get(i))
                .map(|s| s.chars().count())
                .chain([c.name.chars().count()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |row: Vec<&str>| {
        let mut s = String::new();
        for (i, cell) in row.iter().enumerate() {
            let w = widths[i];
            if i > 0 {
                s.push_str("  ");
            }
            if numeric[i] {
                let _ = write!(s, "{cell:>w$}");
            } else {
                let _ = write!(s, "{cell:<w$}");
            }
        }
        s.trim_end().to_string()
    };
    let mut out = vec![line(t.columns.iter().map(|c| c.name.as_str()).collect())];
    out.push(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    for r in &cells {
        out.push(line(r.iter().map(String::as_str).collect()));
    }
    if t.truncated {
        out.push(format!("({} of {} rows shown)", t.rows.len(), t.total_count));
    }
    out
}

pub fn render_chart(c: &ChartSpec) -> String {
    let bars: Vec<String> = c
        .labels
        .iter()
        .zip(&c.values)
        .map(|(l, v)| format!("{l}: {}", format_number(*v)))
        .collect();
    format!("[{} chart \"{}\", {} by {}: {}]", c.kind.as_str(), c.title, c.y_label, c.x_label, bars.join("; "))
}

fn render_file(a: &FileAttachment, save_dir: Option<&Path>) -> String {
    let Some(dir) = save_dir else {
        return format!("[file {} ({}, {} bytes)]", a.filename, a.media_type, a.bytes.len());
    };
    // Only the final component of the suggested name is used.
    let name = Path::new(&a.filename).file_name().map_or("attachment".into(), |n| n.to_owned());
    let path = dir.join(name);
    match std::fs::create_dir_all(dir).and_then(|_| std::fs::write(&path, &a.bytes)) {
        Ok(()) => format!("[saved {} ({} bytes)]", path.display(), a.bytes.len()),
        Err(e) => format!("[could not save {}: {e}]", path.display()),
    }
}
