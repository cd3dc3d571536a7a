use serde::{Deserialize, Serialize};

use super::{assemble, AttributedGraph, GraphError, NodeId};
use crate::scalar::Scalar;

/// Mapping between node ids of a source graph and a derived graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdTranslation {
    /// `forward[old] = Some(new)` for nodes that survive.
    pub forward: Vec<Option<NodeId>>,
    /// `backward[new] = old`.
    pub backward: Vec<NodeId>,
}

impl IdTranslation {
    pub fn identity(n: usize) -> Self {
        Self {
            forward: (0..n).map(Some).collect(),
            backward: (0..n).collect(),
        }
    }

    pub fn to_new(&self, old: NodeId) -> Option<NodeId> {
        self.forward.get(old).copied().flatten()
    }

    pub fn to_old(&self, new: NodeId) -> NodeId {
        self.backward[new]
    }
}

impl<S: Scalar> AttributedGraph<S> {
    /// Graph whose node `i` is node `order[i]` of `self`, keeping only edges
    /// whose endpoints both appear in `order`. Edge order is preserved.
    fn induced(&self, order: &[NodeId]) -> (Self, IdTranslation) {
        let mut forward = vec![None; self.node_count()];
        for (new, &old) in order.iter().enumerate() {
            forward[old] = Some(new);
        }
        let l = self.label_count();
        let mut node_names = Vec::with_capacity(order.len());
        let mut node_features = Vec::with_capacity(order.len() * self.node_dim);
        let mut labels = Vec::with_capacity(order.len() * l);
        let mut labeled = Vec::with_capacity(order.len());
        for &old in order {
            node_names.push(self.node_names[old].clone());
            node_features.extend_from_slice(self.node_features(old));
            labels.extend_from_slice(self.label_bits(old));
            labeled.push(self.labeled[old]);
        }
        let mut edges = Vec::new();
        let mut edge_features = Vec::new();
        for (e, &(s, d)) in self.edges.iter().enumerate() {
            if let (Some(ns), Some(nd)) = (forward[s], forward[d]) {
                edges.push((ns, nd));
                edge_features.extend_from_slice(self.edge_features(e));
            }
        }
        let graph = assemble(
            node_names,
            self.node_dim,
            node_features,
            self.edge_dim,
            edge_features,
            edges,
            self.label_names.clone(),
            labels,
            labeled,
            self.directedness,
        );
        (
            graph,
            IdTranslation {
                forward,
                backward: order.to_vec(),
            },
        )
    }

    /// Removes `ids` and every incident edge. Surviving nodes keep their
    /// relative order; the label vocabulary is unchanged.
    pub fn remove_nodes(&self, ids: &[NodeId]) -> Result<(Self, IdTranslation), GraphError> {
        let mut drop = vec![false; self.node_count()];
        for &v in ids {
            if v >= self.node_count() {
                return Err(GraphError::UnknownNode(v));
            }
            drop[v] = true;
        }
        let keep: Vec<NodeId> = (0..self.node_count()).filter(|&v| !drop[v]).collect();
        if keep.is_empty() {
            return Err(GraphError::Empty);
        }
        Ok(self.induced(&keep))
    }

    /// Re-adds to `self` (a graph produced by `original.remove_nodes`) every
    /// node and edge of `original` that was removed. Surviving nodes keep their
    /// ids in `self`; removed nodes are appended in their original order.
    /// The returned translation maps `original` ids to the rebuilt graph.
    pub fn reinsert(
        &self,
        original: &Self,
        removal: &IdTranslation,
    ) -> Result<(Self, IdTranslation), GraphError> {
        if removal.backward.len() != self.node_count()
            || removal.forward.len() != original.node_count()
        {
            return Err(GraphError::Split(
                "id translation does not match the graphs".into(),
            ));
        }
        let mut order = removal.backward.clone();
        order.extend((0..original.node_count()).filter(|&v| removal.forward[v].is_none()));
        Ok(original.induced(&order))
    }
}
