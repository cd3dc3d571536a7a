use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::LearnError;
use crate::graph::AttributedGraph;
use crate::nn::{AffineSigmoid, Checkpoint, Gru, ParamTensor, Parameters};
use crate::scalar::Scalar;
use crate::seed::{stream, TAG_INIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub node_dim: usize,
    pub edge_dim: usize,
    pub hidden: usize,
}

impl ModelDims {
    pub fn for_graph<S: Scalar>(graph: &AttributedGraph<S>, hidden: usize) -> Self {
        Self {
            node_dim: graph.node_dim(),
            edge_dim: graph.edge_dim(),
            hidden,
        }
    }

    /// Width of a score-net input `[h | x_v | x_e | x_k]`.
    pub fn score_input(&self) -> usize {
        self.hidden + 2 * self.node_dim + self.edge_dim
    }
}

/// Score, history and classifier networks of one label agent.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelAgent<S> {
    pub score: AffineSigmoid<S>,
    pub history: Gru<S>,
    pub classifier: AffineSigmoid<S>,
}

impl<S> Parameters<S> for LabelAgent<S> {
    fn tensors(&self) -> Vec<&ParamTensor<S>> {
        let mut v = self.score.tensors();
        v.extend(self.history.tensors());
        v.extend(self.classifier.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut ParamTensor<S>> {
        let mut v = self.score.tensors_mut();
        v.extend(self.history.tensors_mut());
        v.extend(self.classifier.tensors_mut());
        v
    }
}

/// Parameters of all label agents plus the shared distilled score net.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentParameters<S> {
    pub labels: Vec<String>,
    pub dims: ModelDims,
    pub agents: Vec<LabelAgent<S>>,
    pub distilled: Option<AffineSigmoid<S>>,
}

impl<S: Scalar> AgentParameters<S> {
    /// Glorot-initialized weights, zero biases, seeded.
    pub fn new(labels: Vec<String>, dims: ModelDims, with_distilled: bool, seed: u64) -> Self {
        let agents = (0..labels.len())
            .map(|i| {
                let mut rng = stream(seed, &[TAG_INIT, i as u64]);
                let name = format!("agent.{i}");
                LabelAgent {
                    score: AffineSigmoid::new(
                        &format!("{name}.score"),
                        dims.score_input(),
                        1,
                        &mut rng,
                    ),
                    history: Gru::new(
                        &format!("{name}.history"),
                        2 * dims.node_dim,
                        dims.hidden,
                        &mut rng,
                    ),
                    classifier: AffineSigmoid::new(
                        &format!("{name}.classifier"),
                        dims.hidden,
                        1,
                        &mut rng,
                    ),
                }
            })
            .collect();
        let distilled = with_distilled.then(|| {
            let mut rng = stream(seed, &[TAG_INIT, u64::MAX]);
            AffineSigmoid::new("distilled.score", dims.score_input(), 1, &mut rng)
        });
        Self {
            labels,
            dims,
            agents,
            distilled,
        }
    }

    pub fn for_graph(
        graph: &AttributedGraph<S>,
        hidden: usize,
        with_distilled: bool,
        seed: u64,
    ) -> Self {
        Self::new(
            graph.label_names().to_vec(),
            ModelDims::for_graph(graph, hidden),
            with_distilled,
            seed,
        )
    }

    pub fn label_count(&self) -> usize {
        self.labels.len()
    }

    /// Checks that `graph` has the label vocabulary and attribute widths
    /// these parameters were built for.
    pub fn check_compatible(&self, graph: &AttributedGraph<S>) -> Result<(), LearnError> {
        if graph.label_names() != self.labels.as_slice() {
            return Err(LearnError::Incompatible(format!(
                "label vocabulary {:?} does not match the parameters' {:?}",
                graph.label_names(),
                self.labels
            )));
        }
        if graph.node_dim() != self.dims.node_dim || graph.edge_dim() != self.dims.edge_dim {
            return Err(LearnError::Incompatible(format!(
                "graph attribute widths ({}, {}) do not match the parameters' ({}, {})",
                graph.node_dim(),
                graph.edge_dim(),
                self.dims.node_dim,
                self.dims.edge_dim
            )));
        }
        Ok(())
    }

    pub fn to_checkpoint(&self, mut metadata: BTreeMap<String, serde_json::Value>) -> Checkpoint {
        metadata.insert("labels".into(), serde_json::json!(self.labels));
        metadata.insert("dims".into(), serde_json::json!(self.dims));
        metadata.insert(
            "distilled".into(),
            serde_json::json!(self.distilled.is_some()),
        );
        Checkpoint::from_tensors(self.tensors(), metadata)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, LearnError> {
        let field = |k: &str| {
            ck.metadata
                .get(k)
                .cloned()
                .ok_or_else(|| LearnError::Incompatible(format!("checkpoint lacks `{k}` metadata")))
        };
        let parse = |e: serde_json::Error| LearnError::Incompatible(e.to_string());
        let labels: Vec<String> = serde_json::from_value(field("labels")?).map_err(parse)?;
        let dims: ModelDims = serde_json::from_value(field("dims")?).map_err(parse)?;
        let distilled: bool = serde_json::from_value(field("distilled")?).map_err(parse)?;
        let mut params = Self::new(labels, dims, distilled, 0);
        ck.restore_into(params.tensors_mut())?;
        Ok(params)
    }
}

impl<S> Parameters<S> for AgentParameters<S> {
    fn tensors(&self) -> Vec<&ParamTensor<S>> {
        let mut v: Vec<&ParamTensor<S>> = self.agents.iter().flat_map(|a| a.tensors()).collect();
        if let Some(d) = &self.distilled {
            v.extend(d.tensors());
        }
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut ParamTensor<S>> {
        let mut v: Vec<&mut ParamTensor<S>> = self
            .agents
            .iter_mut()
            .flat_map(|a| a.tensors_mut())
            .collect();
        if let Some(d) = &mut self.distilled {
            v.extend(d.tensors_mut());
        }
        v
    }
}
