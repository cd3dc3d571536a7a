//! Planted-structure graphs with known labels, for tests and experiments.
//!
//! Every label has a random prototype direction. A node's features are the
//! mean prototype of its labels plus isotropic Gaussian noise; edges prefer
//! nodes that share a label. Only a fraction of nodes is marked labeled; the
//! rest keep their labels as hidden ground truth.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::graph::{AttributedGraph, GraphBuilder, GraphError};
use crate::scalar::Scalar;
use crate::seed::{stream, TAG_SYNTH};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedConfig {
    pub nodes: usize,
    pub labels: usize,
    pub feature_dim: usize,
    pub edge_dim: usize,
    /// Undirected edges drawn per node.
    pub edges_per_node: usize,
    /// Probability that an edge joins two nodes of the same primary label.
    pub homophily: f64,
    /// Norm of the noise added to the unit-norm prototype mean.
    pub noise: f64,
    /// Probability of a second, uniformly chosen label.
    pub extra_label_prob: f64,
    /// If set, nodes whose primary label is 0 or 1 carry both with this
    /// probability, and no other label pair ever co-occurs.
    pub cooccurrence: Option<f64>,
    pub labeled_fraction: f64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            nodes: 500,
            labels: 4,
            feature_dim: 300,
            edge_dim: 8,
            edges_per_node: 12,
            homophily: 0.95,
            noise: 6.0,
            extra_label_prob: 0.2,
            cooccurrence: None,
            labeled_fraction: 0.2,
        }
    }
}

fn unit_gaussian<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Generates a planted graph. Node features are normalized to unit norm and
/// edges are symmetrized.
pub fn planted_graph<S: Scalar>(
    config: &PlantedConfig,
    seed: u64,
) -> Result<AttributedGraph<S>, GraphError> {
    let c = config;
    if c.nodes == 0 || c.labels == 0 {
        return Err(GraphError::Empty);
    }
    let mut rng = stream(seed, &[TAG_SYNTH]);
    let prototypes: Vec<Vec<f64>> = (0..c.labels)
        .map(|_| unit_gaussian(c.feature_dim, &mut rng))
        .collect();

    let mut primary = Vec::with_capacity(c.nodes);
    let mut label_sets: Vec<BTreeSet<usize>> = Vec::with_capacity(c.nodes);
    for i in 0..c.nodes {
        // Round-robin primaries keep the classes balanced.
        let p = i % c.labels;
        let mut set = BTreeSet::from([p]);
        match c.cooccurrence {
            Some(q) if c.labels >= 2 => {
                if p < 2 && rng.gen_bool(q) {
                    set.insert(1 - p);
                }
            }
            _ => {
                if c.labels > 1 && rng.gen_bool(c.extra_label_prob) {
                    let mut other = rng.gen_range(0..c.labels - 1);
                    if other >= p {
                        other += 1;
                    }
                    set.insert(other);
                }
            }
        }
        primary.push(p);
        label_sets.push(set);
    }

    let mut order: Vec<usize> = (0..c.nodes).collect();
    order.shuffle(&mut rng);
    let labeled_count = ((c.labeled_fraction * c.nodes as f64).round() as usize).min(c.nodes);
    let mut labeled = vec![false; c.nodes];
    for &v in &order[..labeled_count] {
        labeled[v] = true;
    }

    let label_names: Vec<String> = (0..c.labels).map(|l| format!("label{l}")).collect();
    let mut builder = GraphBuilder::<S>::new().edge_dim(c.edge_dim);
    for v in 0..c.nodes {
        let set = &label_sets[v];
        let mut x = vec![0.0; c.feature_dim];
        for &l in set {
            for (xi, pi) in x.iter_mut().zip(&prototypes[l]) {
                *xi += pi / set.len() as f64;
            }
        }
        let noise = unit_gaussian(c.feature_dim, &mut rng);
        for (xi, ni) in x.iter_mut().zip(&noise) {
            *xi += c.noise * ni;
        }
        let feats: Vec<S> = x.into_iter().map(S::of).collect();
        let names: Vec<String> = set.iter().map(|&l| label_names[l].clone()).collect();
        builder.add_node(&format!("n{v}"), &feats, &names, Some(labeled[v]))?;
    }

    let by_primary: Vec<Vec<usize>> = (0..c.labels)
        .map(|l| (0..c.nodes).filter(|&v| primary[v] == l).collect())
        .collect();
    let mut seen = BTreeSet::new();
    for v in 0..c.nodes {
        for _ in 0..c.edges_per_node {
            let u = if rng.gen_bool(c.homophily) {
                *by_primary[primary[v]]
                    .choose(&mut rng)
                    .expect("own class is nonempty")
            } else {
                rng.gen_range(0..c.nodes)
            };
            let key = (v.min(u), v.max(u));
            if u == v || !seen.insert(key) {
                continue;
            }
            builder.add_edge(&format!("n{}", key.0), &format!("n{}", key.1), None)?;
        }
    }
    builder.build(true, true)
}
