//! Attributed multi-label graphs.
//!
//! Graphs are stored directed in CSR form. Node and edge attributes are dense
//! row-major blocks; labels are a dense `nodes x labels` bit table plus a mask
//! marking which nodes count as labeled. A node may carry label bits while
//! being masked out (hidden ground truth); only masked-in labels are ever used
//! for supervision.

mod io;
mod split;
mod subgraph;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{norm, Scalar};

pub use io::{load_graph, write_graph, LoadOptions};
pub use split::{stratified_kfold, FoldAssignment, Regime};
pub use subgraph::IdTranslation;

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{context}: feature dimension {found}, expected {expected}")]
    FeatureDimension {
        context: String,
        expected: usize,
        found: usize,
    },
    #[error("{context}: edge endpoint `{id}` is not a known node")]
    DanglingEndpoint { context: String, id: String },
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("graph has no nodes")]
    Empty,
    #[error("node `{0}` is marked labeled but carries no labels")]
    LabeledWithoutLabels(String),
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("unknown node name `{0}`")]
    UnknownNodeName(String),
    #[error("label `{0}` is not in the vocabulary")]
    UnknownLabel(String),
    #[error("fold split: {0}")]
    Split(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Directedness {
    Directed,
    Symmetrized,
}

/// Immutable attributed graph. Safe to share between any number of readers.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph<S> {
    node_names: Vec<String>,
    node_dim: usize,
    node_features: Vec<S>,
    edge_dim: usize,
    edge_features: Vec<S>,
    edges: Vec<(NodeId, NodeId)>,
    offsets: Vec<usize>,
    adjacency: Vec<(NodeId, EdgeId)>,
    label_names: Vec<String>,
    labels: Vec<bool>,
    labeled: Vec<bool>,
    directedness: Directedness,
}

impl<S: Scalar> AttributedGraph<S> {
    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_dim(&self) -> usize {
        self.node_dim
    }

    pub fn edge_dim(&self) -> usize {
        self.edge_dim
    }

    pub fn label_count(&self) -> usize {
        self.label_names.len()
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn directedness(&self) -> Directedness {
        self.directedness
    }

    pub fn node_name(&self, v: NodeId) -> &str {
        &self.node_names[v]
    }

    pub fn node_names(&self) -> &[String] {
        &self.node_names
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.node_names.iter().position(|n| n == name)
    }

    pub fn node_features(&self, v: NodeId) -> &[S] {
        &self.node_features[v * self.node_dim..(v + 1) * self.node_dim]
    }

    pub fn edge_features(&self, e: EdgeId) -> &[S] {
        &self.edge_features[e * self.edge_dim..(e + 1) * self.edge_dim]
    }

    pub fn edge(&self, e: EdgeId) -> (NodeId, NodeId) {
        self.edges[e]
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    /// Out-neighbors of `v` as `(neighbor, edge)` pairs, in edge-id order.
    pub fn neighbors(&self, v: NodeId) -> &[(NodeId, EdgeId)] {
        &self.adjacency[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn out_degree(&self, v: NodeId) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    /// Raw label bits, including hidden ground truth on unlabeled nodes.
    pub fn label_bits(&self, v: NodeId) -> &[bool] {
        let l = self.label_count();
        &self.labels[v * l..(v + 1) * l]
    }

    pub fn has_label(&self, v: NodeId, label: usize) -> bool {
        self.labels[v * self.label_count() + label]
    }

    pub fn is_labeled(&self, v: NodeId) -> bool {
        self.labeled[v]
    }

    pub fn labeled_nodes(&self) -> Vec<NodeId> {
        (0..self.node_count())
            .filter(|&v| self.labeled[v])
            .collect()
    }

    /// Label indices of `v` if it is labeled, otherwise empty.
    pub fn visible_labels(&self, v: NodeId) -> Vec<usize> {
        if !self.labeled[v] {
            return Vec::new();
        }
        (0..self.label_count())
            .filter(|&l| self.has_label(v, l))
            .collect()
    }

    /// Mean number of labels per labeled node.
    pub fn label_cardinality(&self) -> f64 {
        let labeled = self.labeled_nodes();
        if labeled.is_empty() {
            return 0.0;
        }
        let total: usize = labeled
            .iter()
            .map(|&v| self.label_bits(v).iter().filter(|&&b| b).count())
            .sum();
        total as f64 / labeled.len() as f64
    }

    /// Same graph with the labeled mask restricted to `keep`. Used to hide
    /// test labels during transductive training.
    pub fn with_labeled_subset(&self, keep: &[NodeId]) -> Result<Self, GraphError> {
        let mut mask = vec![false; self.node_count()];
        for &v in keep {
            if v >= self.node_count() {
                return Err(GraphError::UnknownNode(v));
            }
            mask[v] = self.labeled[v];
        }
        Ok(Self {
            labeled: mask,
            ..self.clone()
        })
    }

    /// Marks every node that carries label bits as labeled.
    pub fn with_all_labels_revealed(&self) -> Self {
        let labeled = (0..self.node_count())
            .map(|v| self.label_bits(v).iter().any(|&b| b))
            .collect();
        Self {
            labeled,
            ..self.clone()
        }
    }
}

/// Incremental construction of an [`AttributedGraph`] from named records.
#[derive(Debug, Clone)]
pub struct GraphBuilder<S> {
    names: Vec<String>,
    index: HashMap<String, NodeId>,
    node_dim: Option<usize>,
    node_features: Vec<S>,
    node_labels: Vec<Vec<String>>,
    labeled: Vec<bool>,
    edge_dim: Option<usize>,
    edges: Vec<(NodeId, NodeId, Option<Vec<S>>)>,
    vocabulary: Option<Vec<String>>,
}

impl<S: Scalar> Default for GraphBuilder<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> GraphBuilder<S> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            index: HashMap::new(),
            node_dim: None,
            node_features: Vec::new(),
            node_labels: Vec::new(),
            labeled: Vec::new(),
            edge_dim: None,
            edges: Vec::new(),
            vocabulary: None,
        }
    }

    /// Fixes the edge attribute dimension even if no edge carries features.
    pub fn edge_dim(mut self, dim: usize) -> Self {
        self.edge_dim = Some(dim);
        self
    }

    /// Fixes the label vocabulary instead of deriving it from the nodes.
    /// Names not present in the vocabulary are rejected at build time.
    pub fn vocabulary(mut self, names: Vec<String>) -> Self {
        self.vocabulary = Some(names);
        self
    }

    pub fn node_dim(&self) -> Option<usize> {
        self.node_dim
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// Adds a node. `labeled = None` means "labeled iff labels nonempty".
    pub fn add_node(
        &mut self,
        name: &str,
        features: &[S],
        labels: &[String],
        labeled: Option<bool>,
    ) -> Result<NodeId, GraphError> {
        if self.index.contains_key(name) {
            return Err(GraphError::DuplicateNode(name.to_string()));
        }
        match self.node_dim {
            None => self.node_dim = Some(features.len()),
            Some(d) if d != features.len() => {
                return Err(GraphError::FeatureDimension {
                    context: format!("node `{name}`"),
                    expected: d,
                    found: features.len(),
                })
            }
            Some(_) => {}
        }
        let labeled = labeled.unwrap_or(!labels.is_empty());
        if labeled && labels.is_empty() {
            return Err(GraphError::LabeledWithoutLabels(name.to_string()));
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        self.node_features.extend_from_slice(features);
        let mut labels = labels.to_vec();
        labels.sort();
        labels.dedup();
        self.node_labels.push(labels);
        self.labeled.push(labeled);
        Ok(id)
    }

    pub fn add_edge(
        &mut self,
        src: &str,
        dst: &str,
        features: Option<&[S]>,
    ) -> Result<EdgeId, GraphError> {
        let context = format!("edge {src} -> {dst}");
        let s = *self
            .index
            .get(src)
            .ok_or_else(|| GraphError::DanglingEndpoint {
                context: context.clone(),
                id: src.to_string(),
            })?;
        let d = *self
            .index
            .get(dst)
            .ok_or_else(|| GraphError::DanglingEndpoint {
                context: context.clone(),
                id: dst.to_string(),
            })?;
        if let Some(f) = features {
            match self.edge_dim {
                None => self.edge_dim = Some(f.len()),
                Some(dim) if dim != f.len() => {
                    return Err(GraphError::FeatureDimension {
                        context,
                        expected: dim,
                        found: f.len(),
                    })
                }
                Some(_) => {}
            }
        }
        self.edges.push((s, d, features.map(<[S]>::to_vec)));
        Ok(self.edges.len() - 1)
    }

    /// Validates and freezes the graph. Missing edge attributes become zero
    /// vectors; `symmetrize` adds the reverse of every edge that lacks one.
    pub fn build(
        self,
        symmetrize: bool,
        normalize: bool,
    ) -> Result<AttributedGraph<S>, GraphError> {
        if self.names.is_empty() {
            return Err(GraphError::Empty);
        }
        let node_dim = self.node_dim.unwrap_or(0);
        let edge_dim = self.edge_dim.unwrap_or(0);

        let label_names: Vec<String> = match self.vocabulary {
            Some(v) => v,
            None => self
                .node_labels
                .iter()
                .flatten()
                .cloned()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        };
        let label_index: HashMap<&str, usize> = label_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let n = self.names.len();
        let l = label_names.len();
        let mut labels = vec![false; n * l];
        for (v, names) in self.node_labels.iter().enumerate() {
            for name in names {
                let li = *label_index
                    .get(name.as_str())
                    .ok_or_else(|| GraphError::UnknownLabel(name.clone()))?;
                labels[v * l + li] = true;
            }
        }

        let mut node_features = self.node_features;
        if normalize && node_dim > 0 {
            for row in node_features.chunks_exact_mut(node_dim) {
                let nrm = norm(row);
                // Already-unit rows are left untouched so reloading is exact.
                if nrm > S::zero() && (nrm - S::one()).abs() > S::epsilon() * S::of(4.0) {
                    for x in row.iter_mut() {
                        *x /= nrm;
                    }
                }
            }
        }

        let mut edges: Vec<(NodeId, NodeId)> = Vec::with_capacity(self.edges.len());
        let mut edge_features: Vec<S> = Vec::with_capacity(self.edges.len() * edge_dim);
        for (s, d, f) in &self.edges {
            edges.push((*s, *d));
            match f {
                Some(f) => edge_features.extend_from_slice(f),
                None => edge_features.extend(std::iter::repeat_n(S::zero(), edge_dim)),
            }
        }
        let directedness = if symmetrize {
            let present: std::collections::HashSet<(NodeId, NodeId)> =
                edges.iter().copied().collect();
            let original = edges.len();
            for e in 0..original {
                let (s, d) = edges[e];
                if s != d && !present.contains(&(d, s)) {
                    edges.push((d, s));
                    let start = e * edge_dim;
                    let feat: Vec<S> = edge_features[start..start + edge_dim].to_vec();
                    edge_features.extend(feat);
                }
            }
            Directedness::Symmetrized
        } else {
            Directedness::Directed
        };

        Ok(assemble(
            self.names,
            node_dim,
            node_features,
            edge_dim,
            edge_features,
            edges,
            label_names,
            labels,
            self.labeled,
            directedness,
        ))
    }
}

#[allow(clippy::too_many_arguments)]
fn assemble<S: Scalar>(
    node_names: Vec<String>,
    node_dim: usize,
    node_features: Vec<S>,
    edge_dim: usize,
    edge_features: Vec<S>,
    edges: Vec<(NodeId, NodeId)>,
    label_names: Vec<String>,
    labels: Vec<bool>,
    labeled: Vec<bool>,
    directedness: Directedness,
) -> AttributedGraph<S> {
    let n = node_names.len();
    let mut offsets = vec![0usize; n + 1];
    for &(s, _) in &edges {
        offsets[s + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor = offsets.clone();
    let mut adjacency = vec![(0, 0); edges.len()];
    for (e, &(s, d)) in edges.iter().enumerate() {
        adjacency[cursor[s]] = (d, e);
        cursor[s] += 1;
    }
    AttributedGraph {
        node_names,
        node_dim,
        node_features,
        edge_dim,
        edge_features,
        edges,
        offsets,
        adjacency,
        label_names,
        labels,
        labeled,
        directedness,
    }
}
