//! Statistics over walk trajectories: which labels agents visit, and how
//! many labels the visited nodes carry.
//!
//! Both statistics are computed identically from in-memory episodes and from
//! exported traces. A node's labels include hidden ground truth. Repeat
//! visits count every time; the start node is excluded unless requested.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::AttributedGraph;
use crate::scalar::Scalar;
use crate::walk::{Episode, TraceRecord};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no episodes to analyze")]
    Empty,
    #[error("label mismatch: {0}")]
    LabelMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisitOptions {
    pub include_start: bool,
    /// Scale every heatmap column to sum to one.
    pub normalize: bool,
}

impl Default for VisitOptions {
    fn default() -> Self {
        Self {
            include_start: false,
            normalize: true,
        }
    }
}

/// `values[row][col]`: how often agent `agents[col]`, started from nodes
/// carrying its label, visited nodes carrying label `row`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitHeatmap {
    pub labels: Vec<String>,
    pub agents: Vec<usize>,
    /// Raw label incidences before normalization.
    pub counts: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
}

impl VisitHeatmap {
    pub fn value(&self, row: usize, agent: usize) -> Option<f64> {
        let col = self.agents.iter().position(|&a| a == agent)?;
        Some(self.values[row][col])
    }

    /// CSV matrix with label names as header row and first column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label");
        for &a in &self.agents {
            let _ = write!(out, ",{}", self.labels[a]);
        }
        out.push('\n');
        for (r, name) in self.labels.iter().enumerate() {
            out.push_str(name);
            for v in &self.values[r] {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStatistic {
    pub agent: usize,
    pub label: String,
    pub value: f64,
    pub visits: usize,
}

pub fn statistics_csv(stats: &[AgentStatistic]) -> String {
    let mut out = String::from("agent,value\n");
    for s in stats {
        let _ = writeln!(out, "{},{}", s.label, s.value);
    }
    out
}

/// Source-independent view of one trajectory.
struct Visits<'a> {
    agent: usize,
    start_labels: Vec<usize>,
    visited: Vec<&'a [usize]>,
}

fn from_traces<'a>(
    traces: &'a [TraceRecord],
    opts: &VisitOptions,
) -> Result<(Vec<String>, Vec<Visits<'a>>), AnalysisError> {
    let first = traces.first().ok_or(AnalysisError::Empty)?;
    let vocab = first.vocabulary.clone();
    let mut out = Vec::with_capacity(traces.len());
    for t in traces {
        if t.vocabulary != vocab {
            return Err(AnalysisError::LabelMismatch(
                "traces use different label vocabularies".into(),
            ));
        }
        if t.agent >= vocab.len() {
            return Err(AnalysisError::LabelMismatch(format!(
                "agent {} outside a vocabulary of {} labels",
                t.agent,
                vocab.len()
            )));
        }
        out.push(Visits {
            agent: t.agent,
            start_labels: t.start_labels.clone(),
            visited: t.visited_labels(opts.include_start),
        });
    }
    Ok((vocab, out))
}

fn from_episodes<'a, S: Scalar>(
    episodes: &[Episode<S>],
    graph: &AttributedGraph<S>,
    table: &'a [Vec<usize>],
    opts: &VisitOptions,
) -> Result<Vec<Visits<'a>>, AnalysisError> {
    if episodes.is_empty() {
        return Err(AnalysisError::Empty);
    }
    episodes
        .iter()
        .map(|e| {
            if e.agent >= graph.label_count() {
                return Err(AnalysisError::LabelMismatch(format!(
                    "agent {} outside a vocabulary of {} labels",
                    e.agent,
                    graph.label_count()
                )));
            }
            if let Some(&v) = e.visited(true).iter().find(|&&v| v >= graph.node_count()) {
                return Err(AnalysisError::LabelMismatch(format!(
                    "node {v} is not in the graph"
                )));
            }
            Ok(Visits {
                agent: e.agent,
                start_labels: table[e.start].clone(),
                visited: e
                    .visited(opts.include_start)
                    .into_iter()
                    .map(|v| table[v].as_slice())
                    .collect(),
            })
        })
        .collect()
}

fn label_table<S: Scalar>(graph: &AttributedGraph<S>) -> Vec<Vec<usize>> {
    (0..graph.node_count())
        .map(|v| {
            (0..graph.label_count())
                .filter(|&l| graph.has_label(v, l))
                .collect()
        })
        .collect()
}

fn heatmap(labels: Vec<String>, visits: &[Visits<'_>], opts: &VisitOptions) -> VisitHeatmap {
    let l = labels.len();
    let mut agents: Vec<usize> = visits.iter().map(|v| v.agent).collect();
    agents.sort_unstable();
    agents.dedup();
    let mut counts = vec![vec![0.0; agents.len()]; l];
    for v in visits {
        if !v.start_labels.contains(&v.agent) {
            continue;
        }
        let col = agents.binary_search(&v.agent).expect("agent listed");
        for node_labels in &v.visited {
            for &row in node_labels.iter() {
                counts[row][col] += 1.0;
            }
        }
    }
    let mut values = counts.clone();
    if opts.normalize {
        for c in 0..agents.len() {
            let total: f64 = (0..l).map(|r| counts[r][c]).sum();
            if total > 0.0 {
                for row in values.iter_mut() {
                    row[c] /= total;
                }
            }
        }
    }
    VisitHeatmap {
        labels,
        agents,
        counts,
        values,
    }
}

fn per_agent(labels: &[String], visits: &[Visits<'_>]) -> Vec<AgentStatistic> {
    let mut sums = vec![(0usize, 0usize); labels.len()];
    for v in visits {
        for node_labels in &v.visited {
            sums[v.agent].0 += node_labels.len();
            sums[v.agent].1 += 1;
        }
    }
    sums.iter()
        .enumerate()
        .filter(|(_, (_, n))| *n > 0)
        .map(|(a, &(total, n))| AgentStatistic {
            agent: a,
            label: labels[a].clone(),
            value: total as f64 / n as f64,
            visits: n,
        })
        .collect()
}

pub fn build_heatmap<S: Scalar>(
    episodes: &[Episode<S>],
    graph: &AttributedGraph<S>,
    opts: &VisitOptions,
) -> Result<VisitHeatmap, AnalysisError> {
    let table = label_table(graph);
    let visits = from_episodes(episodes, graph, &table, opts)?;
    Ok(heatmap(graph.label_names().to_vec(), &visits, opts))
}

pub fn heatmap_from_traces(
    traces: &[TraceRecord],
    opts: &VisitOptions,
) -> Result<VisitHeatmap, AnalysisError> {
    let (labels, visits) = from_traces(traces, opts)?;
    Ok(heatmap(labels, &visits, opts))
}

/// Mean number of labels per visited node, one entry per agent present.
pub fn labels_per_visited_node<S: Scalar>(
    episodes: &[Episode<S>],
    graph: &AttributedGraph<S>,
    opts: &VisitOptions,
) -> Result<Vec<AgentStatistic>, AnalysisError> {
    let table = label_table(graph);
    let visits = from_episodes(episodes, graph, &table, opts)?;
    Ok(per_agent(graph.label_names(), &visits))
}

pub fn labels_per_visited_node_from_traces(
    traces: &[TraceRecord],
    opts: &VisitOptions,
) -> Result<Vec<AgentStatistic>, AnalysisError> {
    let (labels, visits) = from_traces(traces, opts)?;
    Ok(per_agent(&labels, &visits))
}
