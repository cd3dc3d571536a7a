use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Episode, WalkPolicy};
use crate::graph::{AttributedGraph, NodeId};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed trace record: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
}

/// Exported step. Nodes are named and carry their label indices so traces
/// can be analyzed without the graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub node: String,
    pub node_labels: Vec<usize>,
    pub neighbors: Vec<String>,
    pub scores: Vec<f64>,
    #[serde(default)]
    pub distilled_scores: Option<Vec<f64>>,
    pub action: usize,
    pub local_prob: f64,
    #[serde(default)]
    pub distilled_prob: Option<f64>,
    pub sampling_prob: f64,
    pub dead_end: bool,
    pub aggregate: Vec<f64>,
    pub history: Vec<f64>,
}

/// One exported episode, one JSON line each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub agent: usize,
    pub label: String,
    pub vocabulary: Vec<String>,
    pub policy: WalkPolicy,
    pub start: String,
    pub start_labels: Vec<usize>,
    pub steps: Vec<TraceStep>,
    pub end_node: String,
    pub end_labels: Vec<usize>,
    pub final_history: Vec<f64>,
    pub probability: f64,
    pub reward: Option<i8>,
}

fn f64s<S: Scalar>(v: &[S]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

/// Label indices a node carries, including hidden ground truth.
fn labels_of<S: Scalar>(graph: &AttributedGraph<S>, v: NodeId) -> Vec<usize> {
    (0..graph.label_count())
        .filter(|&l| graph.has_label(v, l))
        .collect()
}

impl TraceRecord {
    pub fn from_episode<S: Scalar>(episode: &Episode<S>, graph: &AttributedGraph<S>) -> Self {
        let name = |v: NodeId| graph.node_name(v).to_string();
        Self {
            agent: episode.agent,
            label: graph.label_names()[episode.agent].clone(),
            vocabulary: graph.label_names().to_vec(),
            policy: episode.policy,
            start: name(episode.start),
            start_labels: labels_of(graph, episode.start),
            steps: episode
                .steps
                .iter()
                .map(|s| TraceStep {
                    node: name(s.node),
                    node_labels: labels_of(graph, s.node),
                    neighbors: s.neighbors.iter().map(|&k| name(k)).collect(),
                    scores: f64s(&s.scores),
                    distilled_scores: s.distilled_scores.as_deref().map(f64s),
                    action: s.action,
                    local_prob: s.local_prob.as_f64(),
                    distilled_prob: s.distilled_prob.map(|p| p.as_f64()),
                    sampling_prob: s.sampling_prob.as_f64(),
                    dead_end: s.dead_end,
                    aggregate: f64s(&s.aggregate),
                    history: f64s(&s.history),
                })
                .collect(),
            end_node: name(episode.end_node),
            end_labels: labels_of(graph, episode.end_node),
            final_history: f64s(episode.final_history()),
            probability: episode.probability.as_f64(),
            reward: episode.reward,
        }
    }

    /// Label sets of the visited nodes `v_2 ..= v_{T+1}`, optionally
    /// preceded by the start node's.
    pub fn visited_labels(&self, include_start: bool) -> Vec<&[usize]> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        if include_start {
            out.push(self.start_labels.as_slice());
        }
        out.extend(self.steps.iter().skip(1).map(|s| s.node_labels.as_slice()));
        out.push(self.end_labels.as_slice());
        out
    }
}

pub fn write_traces(path: impl AsRef<Path>, records: &[TraceRecord]) -> Result<(), TraceError> {
    let path = path.as_ref();
    let io = |source| TraceError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for r in records {
        let line = serde_json::to_string(r).expect("trace records serialize");
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_traces(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>, TraceError> {
    let path = path.as_ref();
    let io = |source| TraceError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path).map_err(io)?)
        .lines()
        .enumerate()
    {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| TraceError::Malformed {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn malformed_line_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.jsonl");
        std::fs::write(&p, "\n{oops}\n").unwrap();
        match read_traces(&p) {
            Err(TraceError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
