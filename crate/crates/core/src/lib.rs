//! Collaborative multi-agent graph walks for multi-label node classification.
//!
//! One agent per label walks an attributed graph from the node being
//! classified. Each agent scores neighbors with a small perceptron, samples
//! its next step, folds what it sees into a GRU history and classifies the
//! start node from the final history. A shared distilled policy regularizes
//! the agents and can steer their walks.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix it to `f64`.
//!
//! ```
//! use mlgw::synth::{planted_graph, PlantedConfig};
//! use mlgw::HyperParams;
//!
//! let graph: mlgw::Graph = planted_graph(&PlantedConfig { nodes: 40, ..Default::default() }, 1).unwrap();
//! let hp = HyperParams { hidden_dim: 8, walk_length: 3, epochs: 1, ..Default::default() };
//! let train = graph.labeled_nodes();
//! let (params, log) = mlgw::learn::train(&graph, &hp, &train).unwrap();
//! assert_eq!(params.label_count(), graph.label_count());
//! assert_eq!(log.len(), graph.label_count());
//! ```

pub mod analysis;
pub mod eval;
pub mod graph;
pub mod learn;
pub mod nn;
pub mod scalar;
pub mod seed;
pub mod synth;
pub mod walk;

pub use scalar::Scalar;

pub type Graph = graph::AttributedGraph<f64>;
pub type GraphBuilder = graph::GraphBuilder<f64>;
pub type AgentParameters = learn::AgentParameters<f64>;
pub type Episode = walk::Episode<f64>;
pub type StepRecord = walk::StepRecord<f64>;
pub type Prediction = walk::Prediction<f64>;

pub use eval::MetricsReport;
pub use learn::{HyperParams, Variant};
pub use walk::WalkPolicy;
