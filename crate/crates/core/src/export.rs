//! Plot-ready exports: CSV metric tables, JSON-lines prediction traces and
//! DOT renderings of per-round predictions.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::ForwardTrace;

/// Renders `rows` as CSV with a header derived from the field names.
pub fn render_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::usage(format!("cannot serialize CSV row: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::usage(format!("cannot finish CSV: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_text(path, &render_csv(rows)?)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct TraceLine<'a> {
    round: usize,
    predictions: &'a [u8],
    /// Nodes whose prediction matches the label.
    correct: usize,
    mean_state_norm: f64,
}

/// One JSON line per frame: round, argmax predictions, agreement with the
/// labels and the mean state norm.
pub fn trace_jsonl(graph: &Graph, trace: &ForwardTrace) -> String {
    let mut out = String::new();
    for f in &trace.frames {
        let correct = f
            .predictions
            .iter()
            .zip(graph.labels())
            .filter(|(p, l)| p == l)
            .count();
        let line = TraceLine {
            round: f.round,
            predictions: &f.predictions,
            correct,
            mean_state_norm: f.mean_state_norm,
        };
        out.push_str(&serde_json::to_string(&line).expect("plain data serializes"));
        out.push('\n');
    }
    out
}

/// Fill colors for predicted class 0 and 1.
pub const CLASS_COLORS: [&str; 2] = ["lightgray", "tomato"];

/// Undirected DOT graph whose node fill shows the predicted class. Nodes
/// with a set input flag are drawn as double circles; nodes predicted
/// wrongly get a thick blue outline.
pub fn dot_frame(graph: &Graph, predictions: &[u8], round: usize) -> Result<String> {
    if predictions.len() != graph.num_nodes() {
        return Err(Error::usage(format!(
            "{} predictions for {} nodes",
            predictions.len(),
            graph.num_nodes()
        )));
    }
    let mut out = String::new();
    let _ = writeln!(out, "graph round_{round} {{");
    let _ = writeln!(out, "  label=\"{} round {round}\";", graph.task());
    let _ = writeln!(out, "  node [style=filled, shape=circle];");
    for (v, &p) in predictions.iter().enumerate() {
        let color = CLASS_COLORS[usize::from(p.min(1))];
        let flagged = graph.features().row(v).iter().any(|&x| x != 0.0);
        let mut attrs = format!("fillcolor=\"{color}\"");
        if flagged {
            attrs.push_str(", shape=doublecircle");
        }
        if graph.labels()[v] != p {
            attrs.push_str(", color=\"blue\", penwidth=3");
        }
        let _ = writeln!(out, "  {v} [{attrs}];");
    }
    for &(u, v) in graph.edges() {
        let _ = writeln!(out, "  {u} -- {v};");
    }
    out.push_str("}\n");
    Ok(out)
}
