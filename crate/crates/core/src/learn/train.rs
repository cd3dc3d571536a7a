use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gradient::{backprop_episode, binary_cross_entropy, episode_kl, Sinks, Weights};
use super::{AgentParameters, HyperParams, LearnError, Variant};
use crate::graph::{AttributedGraph, NodeId};
use crate::nn::{NnError, Optimizer, Parameters};
use crate::scalar::Scalar;
use crate::seed::{stream, TAG_EPISODE, TAG_SHUFFLE};
use crate::walk::{run_episode, Episode};

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub agent: usize,
    pub label: String,
    pub mean_reward: f64,
    pub supervised_loss: f64,
    /// Mean per-step `KL(pi_i || pi_d)`; absent without a distilled policy.
    pub mean_kl: Option<f64>,
    pub wall_time_s: f64,
}

pub const TRAINING_LOG_HEADER: &str = "epoch,agent,mean_reward,supervised_loss,mean_KL,wall_time_s";

/// Writes the training log as CSV. Wall times are left empty unless
/// `wall_time` is set, so logs of identical runs are byte-identical.
pub fn write_training_log(
    path: impl AsRef<Path>,
    logs: &[EpochLog],
    wall_time: bool,
) -> std::io::Result<()> {
    let mut out = String::new();
    out.push_str(TRAINING_LOG_HEADER);
    out.push('\n');
    for l in logs {
        let kl = l.mean_kl.map(|k| k.to_string()).unwrap_or_default();
        let wt = if wall_time {
            format!("{:.3}", l.wall_time_s)
        } else {
            String::new()
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            l.epoch, l.label, l.mean_reward, l.supervised_loss, kl, wt
        );
    }
    std::fs::write(path, out)
}

#[derive(Default, Clone, Copy)]
struct Tally {
    reward: f64,
    loss: f64,
    kl: f64,
    kl_n: usize,
    episodes: usize,
}

/// Initializes parameters for `graph` and trains them on `train_nodes`.
pub fn train<S: Scalar>(
    graph: &AttributedGraph<S>,
    hp: &HyperParams,
    train_nodes: &[NodeId],
) -> Result<(AgentParameters<S>, Vec<EpochLog>), LearnError> {
    let params =
        AgentParameters::for_graph(graph, hp.hidden_dim, hp.variant.uses_distilled(), hp.seed);
    train_with(graph, hp, train_nodes, params, |_, _, _| Ok(()))
}

/// Trains `params` in place. `on_epoch` sees each finished epoch's index,
/// parameters and log rows.
pub fn train_with<S: Scalar>(
    graph: &AttributedGraph<S>,
    hp: &HyperParams,
    train_nodes: &[NodeId],
    mut params: AgentParameters<S>,
    mut on_epoch: impl FnMut(usize, &AgentParameters<S>, &[EpochLog]) -> Result<(), LearnError>,
) -> Result<(AgentParameters<S>, Vec<EpochLog>), LearnError> {
    hp.validate()?;
    params.check_compatible(graph)?;
    if hp.variant.uses_distilled() != params.distilled.is_some() {
        return Err(LearnError::Incompatible(format!(
            "variant {} does not match the parameters' distilled policy",
            hp.variant
        )));
    }
    let labels = params.label_count();
    let nodes: Vec<NodeId> = train_nodes
        .iter()
        .copied()
        .filter(|&v| v < graph.node_count() && graph.is_labeled(v))
        .collect();
    if nodes.len() != train_nodes.len() {
        log::warn!(
            "ignoring {} training nodes that are unknown or unlabeled",
            train_nodes.len() - nodes.len()
        );
    }
    for l in 0..labels {
        if !nodes.iter().any(|&v| graph.has_label(v, l)) {
            log::warn!("label `{}` has no positive training node", params.labels[l]);
        }
    }
    if hp.epochs > 0 && nodes.is_empty() {
        return Err(LearnError::EmptyBatch);
    }
    for t in params.tensors_mut() {
        t.ensure_grad();
        t.zero_grad();
    }

    let policy = hp.variant.walk_policy();
    let m = hp.walks_per_node;
    let mut optimizer = Optimizer::<S>::new(hp.optimizer, hp.learning_rate);
    let mut baselines = vec![0.0_f64; labels];
    let mut logs = Vec::new();

    for epoch in 0..hp.epochs {
        let started = Instant::now();
        let mut order = nodes.clone();
        order.shuffle(&mut stream(hp.seed, &[TAG_SHUFFLE, epoch as u64]));
        let mut tallies = vec![Tally::default(); labels];

        for (b, batch) in order.chunks(hp.batch_size).enumerate() {
            // Agent-major order: agent, start node, walk.
            let jobs: Vec<(usize, usize, NodeId, usize)> = (0..labels)
                .flat_map(|i| {
                    batch
                        .iter()
                        .enumerate()
                        .flat_map(move |(pos, &v)| (0..m).map(move |k| (i, pos, v, k)))
                })
                .collect();
            let snapshot = &params;
            let episodes: Vec<Episode<S>> = jobs
                .par_iter()
                .map(|&(i, pos, v, k)| {
                    let mut rng = stream(
                        hp.seed,
                        &[
                            TAG_EPISODE,
                            epoch as u64,
                            b as u64,
                            pos as u64,
                            i as u64,
                            k as u64,
                        ],
                    );
                    run_episode(graph, snapshot, i, v, hp.walk_length, policy, &mut rng)
                })
                .collect::<Result<_, _>>()?;

            let per_agent = batch.len() * m;
            let inv = S::one() / S::of(per_agent as f64);
            let w = Weights {
                supervised: inv,
                policy: inv,
                distilled_policy: if hp.variant == Variant::RegularizedJoint {
                    inv
                } else {
                    S::zero()
                },
                matching: if hp.variant.uses_distilled() {
                    inv
                } else {
                    S::zero()
                },
            };

            let AgentParameters {
                agents, distilled, ..
            } = &mut params;
            let shared = distilled.as_ref();
            let results: Vec<(Option<crate::nn::AffineSigmoid<S>>, Tally)> = agents
                .par_iter_mut()
                .zip(episodes.par_chunks(per_agent))
                .enumerate()
                .map(|(i, (agent, eps))| {
                    let mut dgrad = shared.cloned();
                    if let Some(d) = dgrad.as_mut() {
                        d.zero_grad();
                    }
                    let baseline = S::of(baselines[i]);
                    let mut tally = Tally::default();
                    for ep in eps {
                        let truth = graph.has_label(ep.start, i);
                        let sinks = Sinks {
                            agent: Some(&mut *agent),
                            distilled: dgrad.as_mut(),
                            distilled_values: shared,
                        };
                        backprop_episode(graph, hp, ep, sinks, w, Some(truth), baseline)?;
                        tally.reward += ep.reward.unwrap_or(0) as f64;
                        tally.loss += binary_cross_entropy(ep.probability, truth).as_f64();
                        if let Some(kl) = episode_kl(ep) {
                            tally.kl += kl;
                            tally.kl_n += 1;
                        }
                        tally.episodes += 1;
                    }
                    Ok((dgrad, tally))
                })
                .collect::<Result<_, LearnError>>()?;

            for (i, (dgrad, t)) in results.into_iter().enumerate() {
                if !t.loss.is_finite() {
                    return Err(LearnError::Divergence(format!(
                        "non-finite supervised loss for agent {i} in epoch {epoch}"
                    )));
                }
                if let (Some(d), Some(g)) = (distilled.as_mut(), dgrad.as_ref()) {
                    d.weight.merge_grad(&g.weight);
                    d.bias.merge_grad(&g.bias);
                }
                if hp.reward_baseline {
                    baselines[i] = 0.9 * baselines[i] + 0.1 * t.reward / t.episodes as f64;
                }
                let acc = &mut tallies[i];
                acc.reward += t.reward;
                acc.loss += t.loss;
                acc.kl += t.kl;
                acc.kl_n += t.kl_n;
                acc.episodes += t.episodes;
            }
            optimizer
                .step(&mut params.tensors_mut())
                .map_err(|e| match e {
                    NnError::NonFinite { .. } => LearnError::Divergence(e.to_string()),
                    other => other.into(),
                })?;
        }

        let wall = started.elapsed().as_secs_f64();
        let first = logs.len();
        for (i, t) in tallies.iter().enumerate() {
            let n = t.episodes.max(1) as f64;
            logs.push(EpochLog {
                epoch,
                agent: i,
                label: params.labels[i].clone(),
                mean_reward: t.reward / n,
                supervised_loss: t.loss / n,
                mean_kl: (t.kl_n > 0).then(|| t.kl / t.kl_n as f64),
                wall_time_s: wall,
            });
        }
        log::info!(
            "epoch {epoch}: mean reward {:.4}",
            tallies.iter().map(|t| t.reward).sum::<f64>()
                / tallies.iter().map(|t| t.episodes).sum::<usize>().max(1) as f64
        );
        on_epoch(epoch, &params, &logs[first..])?;
    }
    Ok((params, logs))
}
