//! JSON-lines dataset files: one self-contained graph record per line.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, TaskTag};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub num_nodes: usize,
    pub edges: Vec<[usize; 2]>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub task_tag: TaskTag,
}

impl From<&Graph> for GraphRecord {
    fn from(g: &Graph) -> Self {
        GraphRecord {
            num_nodes: g.num_nodes(),
            edges: g.edges().iter().map(|&(u, v)| [u, v]).collect(),
            features: g.features().to_rows(),
            labels: g.labels().to_vec(),
            task_tag: g.task(),
        }
    }
}

impl TryFrom<GraphRecord> for Graph {
    type Error = Error;

    fn try_from(r: GraphRecord) -> Result<Graph> {
        let features = if r.features.is_empty() {
            Matrix::zeros(0, 0)
        } else {
            Matrix::from_rows(&r.features)?
        };
        if features.rows() == r.num_nodes && features.cols() != r.task_tag.in_dim() {
            return Err(Error::usage(format!(
                "{} graphs need {} feature columns, got {}",
                r.task_tag,
                r.task_tag.in_dim(),
                features.cols()
            )));
        }
        let g = Graph::new(
            r.num_nodes,
            r.edges.into_iter().map(|[u, v]| (u, v)),
            features,
            r.labels,
            r.task_tag,
        )?;
        g.check_connected()?;
        Ok(g)
    }
}

/// Serializes graphs to JSON-lines text (trailing newline after each record).
pub fn to_jsonl(graphs: &[Graph]) -> String {
    let mut out = String::new();
    for g in graphs {
        out.push_str(&serde_json::to_string(&GraphRecord::from(g)).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl(path: impl AsRef<Path>, graphs: &[Graph]) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(to_jsonl(graphs).as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn parse_jsonl(text: &str, context: &str) -> Result<Vec<Graph>> {
    let mut graphs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        graphs.push(parse_line(line, context, i)?);
    }
    Ok(graphs)
}

fn parse_line(line: &str, context: &str, i: usize) -> Result<Graph> {
    let record: GraphRecord = serde_json::from_str(line)
        .map_err(|e| Error::parse(format!("{context} line {}", i + 1), e.to_string()))?;
    Graph::try_from(record).map_err(|e| Error::parse(format!("{context} line {}", i + 1), e.to_string()))
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<Graph>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let context = path.display().to_string();
    let mut graphs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        graphs.push(parse_line(&line, &context, i)?);
    }
    Ok(graphs)
}

/// Reads a dataset and checks that every record carries the expected task tag.
pub fn read_task_jsonl(path: impl AsRef<Path>, task: TaskTag) -> Result<Vec<Graph>> {
    let path = path.as_ref();
    let graphs = read_jsonl(path)?;
    if graphs.is_empty() {
        return Err(Error::Config(format!("{} contains no graphs", path.display())));
    }
    if let Some((i, g)) = graphs.iter().enumerate().find(|(_, g)| g.task() != task) {
        return Err(Error::Config(format!(
            "{} line {} is a {} graph, expected {task}",
            path.display(),
            i + 1,
            g.task()
        )));
    }
    Ok(graphs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_format_is_stable() {
        let g = Graph::new(
            3,
            [(1, 0), (1, 2)],
            Matrix::from_rows(&[vec![1.0], vec![0.0], vec![0.0]]).unwrap(),
            vec![0, 1, 0],
            TaskTag::Distance,
        )
        .unwrap();
        let text = to_jsonl(std::slice::from_ref(&g));
        assert_eq!(
            text,
            "{\"num_nodes\":3,\"edges\":[[0,1],[1,2]],\"features\":[[1.0],[0.0],[0.0]],\
             \"labels\":[0,1,0],\"task_tag\":\"distance\"}\n"
        );
        assert_eq!(parse_jsonl(&text, "mem").unwrap(), vec![g]);
    }

    #[test]
    fn bad_records_report_their_line() {
        let err = parse_jsonl("\n{\"num_nodes\":2}\n", "mem").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let disconnected = "{\"num_nodes\":3,\"edges\":[[0,1]],\"features\":[[0.0],[0.0],[0.0]],\"labels\":[0,0,0],\"task_tag\":\"distance\"}";
        assert!(parse_jsonl(disconnected, "mem").is_err());
        let wrong_width = "{\"num_nodes\":2,\"edges\":[[0,1]],\"features\":[[0.0],[0.0]],\"labels\":[0,0],\"task_tag\":\"prefix_sum\"}";
        assert!(parse_jsonl(wrong_width, "mem").is_err());
    }
}
