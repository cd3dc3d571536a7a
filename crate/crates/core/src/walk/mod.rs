//! Recorded stochastic walks.
//!
//! An agent starts at the node being classified and takes exactly `T` steps.
//! At each step it scores every out-neighbor, samples the next node, sums the
//! features of neighbors scoring above one half and feeds `[x_v | c_n]` to its
//! GRU. The final history is classified. Every intermediate quantity is kept
//! in the [`Episode`] so training and analysis never re-run the forward pass.
//!
//! A node without out-neighbors is a dead end: the agent stays put with
//! probability one and an all-zero aggregate.

mod trace;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{AttributedGraph, EdgeId, NodeId};
use crate::learn::AgentParameters;
use crate::nn::{AffineSigmoid, GruState, NnError};
use crate::scalar::{dot, sigmoid, Scalar};
use crate::seed::{stream, TAG_PREDICT};

pub use trace::{read_traces, write_traces, TraceError, TraceRecord, TraceStep};

#[derive(Debug, Error)]
pub enum WalkError {
    #[error("start node {0} does not exist")]
    InvalidStart(NodeId),
    #[error("walk length must be at least 1")]
    ZeroLength,
    #[error("walks per node must be at least 1")]
    ZeroWalks,
    #[error("agent {0} does not exist")]
    UnknownAgent(usize),
    #[error("the joint policy needs distilled parameters")]
    MissingDistilled,
    #[error("replayed action {action} at step {step} is out of range")]
    BadReplay { step: usize, action: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Which distribution an agent samples its steps from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WalkPolicy {
    /// The agent's own normalized scores.
    Local,
    /// The renormalized product of the agent's and the distilled policy.
    Joint,
}

/// One step of a walk.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<S> {
    pub node: NodeId,
    /// Candidate next nodes; `[node]` at a dead end.
    pub neighbors: Vec<NodeId>,
    /// Edge ids parallel to `neighbors`; empty at a dead end.
    pub edges: Vec<EdgeId>,
    /// Agent scores, one per neighbor; empty at a dead end.
    pub scores: Vec<S>,
    /// Distilled scores, present whenever distilled parameters exist.
    pub distilled_scores: Option<Vec<S>>,
    pub action: usize,
    /// Agent policy probability of the action.
    pub local_prob: S,
    /// Distilled policy probability of the action.
    pub distilled_prob: Option<S>,
    /// Probability of the action under the distribution actually sampled.
    pub sampling_prob: S,
    pub dead_end: bool,
    pub aggregate: Vec<S>,
    /// History after this step.
    pub history: Vec<S>,
}

impl<S: Copy> StepRecord<S> {
    pub fn next_node(&self) -> NodeId {
        self.neighbors[self.action]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode<S> {
    pub agent: usize,
    pub start: NodeId,
    pub policy: WalkPolicy,
    pub steps: Vec<StepRecord<S>>,
    /// Node reached by the last action.
    pub end_node: NodeId,
    /// Classifier output on the final history.
    pub probability: S,
    /// `+1` / `-1` for labeled start nodes, `None` otherwise.
    pub reward: Option<i8>,
    pub(crate) states: Vec<GruState<S>>,
}

impl<S: Scalar> Episode<S> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn final_history(&self) -> &[S] {
        &self
            .steps
            .last()
            .expect("episodes have at least one step")
            .history
    }

    pub fn predicted(&self) -> bool {
        self.probability > S::of(0.5)
    }

    /// GRU states with forward caches, one per step. Empty for episodes that
    /// were deserialized rather than run.
    pub fn states(&self) -> &[GruState<S>] {
        &self.states
    }

    /// Visited nodes `v_2 ..= v_{T+1}`, optionally preceded by the start.
    pub fn visited(&self, include_start: bool) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        if include_start {
            out.push(self.start);
        }
        out.extend(self.steps.iter().skip(1).map(|s| s.node));
        out.push(self.end_node);
        out
    }
}

/// Features of one candidate neighbor.
#[derive(Debug, Clone, Copy)]
pub struct Neighbor<'a, S> {
    pub features: &'a [S],
    pub edge_features: &'a [S],
}

/// Scores each neighbor with the shared scorer on `[h_prev | x_v | x_e | x_k]`.
pub fn score_neighbors<S: Scalar>(
    scorer: &AffineSigmoid<S>,
    h_prev: &[S],
    x_v: &[S],
    neighbors: &[Neighbor<'_, S>],
) -> Result<Vec<S>, NnError> {
    let row = scorer.weight.row(0);
    let (d, f) = (h_prev.len(), x_v.len());
    let mut out = Vec::with_capacity(neighbors.len());
    let mut base = None;
    for n in neighbors {
        let fe = n.edge_features.len();
        let width = d + f + fe + n.features.len();
        if width != scorer.inputs() {
            return Err(NnError::Dimension {
                what: scorer.weight.name.clone(),
                expected: scorer.inputs(),
                found: width,
            });
        }
        // The history and current-node terms are shared by every neighbor.
        let b = *base.get_or_insert_with(|| {
            scorer.bias.value[0] + dot(&row[..d], h_prev) + dot(&row[d..d + f], x_v)
        });
        let z =
            b + dot(&row[d + f..d + f + fe], n.edge_features) + dot(&row[d + f + fe..], n.features);
        out.push(sigmoid(z));
    }
    Ok(out)
}

/// `w / sum(w)`.
pub fn normalize<S: Scalar>(weights: &[S]) -> Vec<S> {
    let total: S = weights.iter().copied().sum();
    weights.iter().map(|&w| w / total).collect()
}

/// Renormalized elementwise product of two distributions.
pub fn joint_distribution<S: Scalar>(local: &[S], distilled: &[S]) -> Vec<S> {
    let prod: Vec<S> = local.iter().zip(distilled).map(|(&a, &b)| a * b).collect();
    normalize(&prod)
}

/// Draws an index from a probability vector by inverse CDF.
pub fn sample_categorical<S: Scalar, R: Rng + ?Sized>(probs: &[S], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p.as_f64();
        if u < acc {
            return k;
        }
    }
    probs
        .iter()
        .rposition(|p| *p > S::zero())
        .unwrap_or(probs.len() - 1)
}

/// Draws from `Cat(scores / sum(scores))`; returns the index and its
/// probability.
pub fn sample_action<S: Scalar, R: Rng + ?Sized>(scores: &[S], rng: &mut R) -> (usize, S) {
    let probs = normalize(scores);
    let k = sample_categorical(&probs, rng);
    (k, probs[k])
}

/// Sum of the features of neighbors scoring strictly above one half.
pub fn aggregate_neighbors<S: Scalar>(scores: &[S], features: &[&[S]], dim: usize) -> Vec<S> {
    let half = S::of(0.5);
    let mut out = vec![S::zero(); dim];
    for (&s, x) in scores.iter().zip(features) {
        if s > half {
            for (o, &v) in out.iter_mut().zip(x.iter()) {
                *o += v;
            }
        }
    }
    out
}

fn walk<S: Scalar>(
    graph: &AttributedGraph<S>,
    params: &AgentParameters<S>,
    agent: usize,
    start: NodeId,
    walk_length: usize,
    policy: WalkPolicy,
    mut choose: impl FnMut(usize, &[S]) -> Result<usize, WalkError>,
) -> Result<Episode<S>, WalkError> {
    let a = params
        .agents
        .get(agent)
        .ok_or(WalkError::UnknownAgent(agent))?;
    if start >= graph.node_count() {
        return Err(WalkError::InvalidStart(start));
    }
    if walk_length == 0 {
        return Err(WalkError::ZeroLength);
    }
    let distilled = params.distilled.as_ref();
    if policy == WalkPolicy::Joint && distilled.is_none() {
        return Err(WalkError::MissingDistilled);
    }
    let f = graph.node_dim();
    let mut states: Vec<GruState<S>> = Vec::with_capacity(walk_length);
    let mut steps = Vec::with_capacity(walk_length);
    let zero_h = vec![S::zero(); a.history.hidden()];
    let mut v = start;
    for t in 0..walk_length {
        let h_prev = states.last().map_or(zero_h.as_slice(), |s| s.h.as_slice());
        let x_v = graph.node_features(v);
        let adj = graph.neighbors(v);
        let mut rec = if adj.is_empty() {
            choose(t, &[S::one()])?;
            StepRecord {
                node: v,
                neighbors: vec![v],
                edges: Vec::new(),
                scores: Vec::new(),
                distilled_scores: distilled.map(|_| Vec::new()),
                action: 0,
                local_prob: S::one(),
                distilled_prob: distilled.map(|_| S::one()),
                sampling_prob: S::one(),
                dead_end: true,
                aggregate: vec![S::zero(); f],
                history: Vec::new(),
            }
        } else {
            let views: Vec<Neighbor<'_, S>> = adj
                .iter()
                .map(|&(k, e)| Neighbor {
                    features: graph.node_features(k),
                    edge_features: graph.edge_features(e),
                })
                .collect();
            let scores = score_neighbors(&a.score, h_prev, x_v, &views)?;
            let local = normalize(&scores);
            let dscores = distilled
                .map(|d| score_neighbors(d, h_prev, x_v, &views))
                .transpose()?;
            let dprobs = dscores.as_deref().map(normalize);
            let sampling = match (policy, &dprobs) {
                (WalkPolicy::Joint, Some(dp)) => joint_distribution(&local, dp),
                _ => local.clone(),
            };
            let action = choose(t, &sampling)?;
            let feats: Vec<&[S]> = views.iter().map(|n| n.features).collect();
            StepRecord {
                node: v,
                neighbors: adj.iter().map(|&(k, _)| k).collect(),
                edges: adj.iter().map(|&(_, e)| e).collect(),
                aggregate: aggregate_neighbors(&scores, &feats, f),
                scores,
                distilled_scores: dscores,
                action,
                local_prob: local[action],
                distilled_prob: dprobs.map(|p| p[action]),
                sampling_prob: sampling[action],
                dead_end: false,
                history: Vec::new(),
            }
        };
        let state = a.history.forward(h_prev, x_v, &rec.aggregate)?;
        rec.history = state.h.clone();
        v = rec.next_node();
        states.push(state);
        steps.push(rec);
    }
    let h_last = &states.last().expect("walk_length >= 1").h;
    let probability = a.classifier.forward_scalar(&[h_last])?;
    let reward = graph.is_labeled(start).then(|| {
        if (probability > S::of(0.5)) == graph.has_label(start, agent) {
            1
        } else {
            -1
        }
    });
    Ok(Episode {
        agent,
        start,
        policy,
        steps,
        end_node: v,
        probability,
        reward,
        states,
    })
}

/// Runs one walk of `walk_length` steps for `agent` from `start`.
pub fn run_episode<S: Scalar, R: Rng + ?Sized>(
    graph: &AttributedGraph<S>,
    params: &AgentParameters<S>,
    agent: usize,
    start: NodeId,
    walk_length: usize,
    policy: WalkPolicy,
    rng: &mut R,
) -> Result<Episode<S>, WalkError> {
    walk(
        graph,
        params,
        agent,
        start,
        walk_length,
        policy,
        |_, probs| Ok(sample_categorical(probs, rng)),
    )
}

/// Re-runs a walk taking the given action indices instead of sampling.
pub fn replay_episode<S: Scalar>(
    graph: &AttributedGraph<S>,
    params: &AgentParameters<S>,
    agent: usize,
    start: NodeId,
    actions: &[usize],
    policy: WalkPolicy,
) -> Result<Episode<S>, WalkError> {
    walk(
        graph,
        params,
        agent,
        start,
        actions.len(),
        policy,
        |t, probs| {
            let action = actions[t];
            if action >= probs.len() {
                return Err(WalkError::BadReplay { step: t, action });
            }
            Ok(action)
        },
    )
}

/// Multi-label prediction for one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction<S> {
    pub labels: Vec<bool>,
    /// Mean classifier output per label.
    pub probabilities: Vec<S>,
}

/// The `walks` episodes per agent that prediction runs from `start`,
/// agent-major. Each draws from its own stream, so the result does not
/// depend on scheduling.
pub fn node_episodes<S: Scalar>(
    graph: &AttributedGraph<S>,
    params: &AgentParameters<S>,
    start: NodeId,
    walk_length: usize,
    walks: usize,
    policy: WalkPolicy,
    seed: u64,
) -> Result<Vec<Episode<S>>, WalkError> {
    if walks == 0 {
        return Err(WalkError::ZeroWalks);
    }
    let mut out = Vec::with_capacity(params.label_count() * walks);
    for agent in 0..params.label_count() {
        for m in 0..walks {
            let mut rng = stream(seed, &[TAG_PREDICT, start as u64, agent as u64, m as u64]);
            out.push(run_episode(
                graph,
                params,
                agent,
                start,
                walk_length,
                policy,
                &mut rng,
            )?);
        }
    }
    Ok(out)
}

/// Runs `walks` episodes per agent from `start` and thresholds the mean
/// classifier output at one half.
pub fn predict_node<S: Scalar>(
    graph: &AttributedGraph<S>,
    params: &AgentParameters<S>,
    start: NodeId,
    walk_length: usize,
    walks: usize,
    policy: WalkPolicy,
    seed: u64,
) -> Result<Prediction<S>, WalkError> {
    let episodes = node_episodes(graph, params, start, walk_length, walks, policy, seed)?;
    let probabilities: Vec<S> = episodes
        .chunks(walks)
        .map(|c| c.iter().map(|e| e.probability).sum::<S>() / S::of(walks as f64))
        .collect();
    Ok(Prediction {
        labels: probabilities.iter().map(|&p| p > S::of(0.5)).collect(),
        probabilities,
    })
}

/// [`predict_node`] over many nodes in parallel; output order follows `nodes`.
pub fn predict_nodes<S: Scalar>(
    graph: &AttributedGraph<S>,
    params: &AgentParameters<S>,
    nodes: &[NodeId],
    walk_length: usize,
    walks: usize,
    policy: WalkPolicy,
    seed: u64,
) -> Result<Vec<Prediction<S>>, WalkError> {
    nodes
        .par_iter()
        .map(|&v| predict_node(graph, params, v, walk_length, walks, policy, seed))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;
    use crate::learn::ModelDims;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn star() -> AttributedGraph<f64> {
        let mut b = GraphBuilder::<f64>::new();
        b.add_node("c", &[1.0, 0.0], &["x".into()], None).unwrap();
        for (i, n) in ["l1", "l2", "l3"].iter().enumerate() {
            b.add_node(n, &[0.0, i as f64 + 1.0], &[], None).unwrap();
            b.add_edge("c", n, None).unwrap();
        }
        b.add_node("lonely", &[1.0, 1.0], &["x".into()], None)
            .unwrap();
        b.build(false, true).unwrap()
    }

    fn params(g: &AttributedGraph<f64>, distilled: bool) -> AgentParameters<f64> {
        AgentParameters::new(
            g.label_names().to_vec(),
            ModelDims::for_graph(g, 4),
            distilled,
            3,
        )
    }

    #[test]
    fn zero_weights_score_one_half() {
        let s = AffineSigmoid::<f64>::zeros("s", (2 + 1) + 1, 1);
        let x = [0.3];
        let n = [Neighbor {
            features: &x[..],
            edge_features: &[],
        }; 3];
        assert_eq!(
            score_neighbors(&s, &[1.0, 2.0], &x, &n).unwrap(),
            vec![0.5; 3]
        );
    }

    #[test]
    fn scores_match_the_concatenated_forward_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = AffineSigmoid::<f64>::new("s", 2 + 1 + 2 + 1, 1, &mut rng);
        let (h, xv, xe, xk) = ([0.1, -0.2], [0.5], [0.3, 0.4], [-0.7]);
        let got = score_neighbors(
            &s,
            &h,
            &xv,
            &[Neighbor {
                features: &xk,
                edge_features: &xe,
            }],
        )
        .unwrap();
        let want = s.forward_scalar(&[&h, &xv, &xe, &xk]).unwrap();
        assert!((got[0] - want).abs() < 1e-15);
        let bad = score_neighbors(
            &s,
            &h,
            &xv,
            &[Neighbor {
                features: &xk,
                edge_features: &[],
            }],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn normalization_and_aggregation() {
        assert_eq!(normalize(&[0.8, 0.2]), vec![0.8, 0.2]);
        assert_eq!(normalize(&[0.5; 4]), vec![0.25; 4]);
        let (e1, e2, e3) = ([1.0, 0.0], [0.0, 1.0], [2.0, 2.0]);
        assert_eq!(
            aggregate_neighbors(&[0.7, 0.4, 0.9], &[&e1, &e2, &e3], 2),
            vec![3.0, 2.0]
        );
        assert_eq!(
            aggregate_neighbors(&[0.5, 0.1], &[&e1, &e2], 2),
            vec![0.0, 0.0]
        );
        let j = joint_distribution(&[0.5_f64, 0.5], &[0.9, 0.1]);
        assert!((j[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn star_walk_and_dead_end() {
        let g = star();
        let p = params(&g, true);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ep = run_episode(&g, &p, 0, 0, 1, WalkPolicy::Local, &mut rng).unwrap();
        assert_eq!(ep.steps.len(), 1);
        assert_eq!(ep.steps[0].neighbors, vec![1, 2, 3]);
        assert!(ep.reward.is_some());

        let lonely = g.node_by_name("lonely").unwrap();
        let ep = run_episode(&g, &p, 0, lonely, 2, WalkPolicy::Joint, &mut rng).unwrap();
        for s in &ep.steps {
            assert!(s.dead_end);
            assert_eq!(s.neighbors, vec![lonely]);
            assert_eq!(s.local_prob, 1.0);
            assert_eq!(s.aggregate, vec![0.0, 0.0]);
        }
        assert_eq!(ep.end_node, lonely);
    }

    #[test]
    fn errors() {
        let g = star();
        let p = params(&g, false);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            run_episode(&g, &p, 0, 99, 1, WalkPolicy::Local, &mut rng),
            Err(WalkError::InvalidStart(99))
        ));
        assert!(matches!(
            run_episode(&g, &p, 0, 0, 0, WalkPolicy::Local, &mut rng),
            Err(WalkError::ZeroLength)
        ));
        assert!(matches!(
            run_episode(&g, &p, 0, 0, 1, WalkPolicy::Joint, &mut rng),
            Err(WalkError::MissingDistilled)
        ));
        assert!(matches!(
            replay_episode(&g, &p, 0, 0, &[5], WalkPolicy::Local),
            Err(WalkError::BadReplay { step: 0, action: 5 })
        ));
    }

    #[test]
    fn prediction_averages_walks() {
        let g = star();
        let p = params(&g, false);
        let one = predict_node(&g, &p, 0, 2, 1, WalkPolicy::Local, 4).unwrap();
        let mut rng = stream(4, &[TAG_PREDICT, 0, 0, 0]);
        let ep = run_episode(&g, &p, 0, 0, 2, WalkPolicy::Local, &mut rng).unwrap();
        assert_eq!(one.probabilities[0], ep.probability);
        assert_eq!(one.labels[0], ep.predicted());
        let many = predict_nodes(&g, &p, &[0, 1], 2, 3, WalkPolicy::Local, 4).unwrap();
        assert_eq!(
            many[0],
            predict_node(&g, &p, 0, 2, 3, WalkPolicy::Local, 4).unwrap()
        );
    }
}
