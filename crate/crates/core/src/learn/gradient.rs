use std::sync::atomic::{AtomicU64, Ordering};

use super::{HyperParams, LabelAgent, LearnError, Variant};
use crate::graph::AttributedGraph;
use crate::nn::AffineSigmoid;
use crate::scalar::{axpy, Scalar};
use crate::walk::{Episode, StepRecord, WalkPolicy};

/// Lower bound applied to probabilities before taking logarithms.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

static FLOOR_HITS: AtomicU64 = AtomicU64::new(0);

/// Number of times a probability was clamped to [`PROBABILITY_FLOOR`] since
/// the process started.
pub fn probability_floor_hits() -> u64 {
    FLOOR_HITS.load(Ordering::Relaxed)
}

fn safe_ln<S: Scalar>(p: S) -> S {
    let floor = S::of(PROBABILITY_FLOOR);
    if p < floor {
        FLOOR_HITS.fetch_add(1, Ordering::Relaxed);
        floor.ln()
    } else {
        p.ln()
    }
}

/// `-(y ln p + (1 - y) ln (1 - p))`.
pub fn binary_cross_entropy<S: Scalar>(p: S, truth: bool) -> S {
    if truth {
        -safe_ln(p)
    } else {
        -safe_ln(S::one() - p)
    }
}

fn reward_of<S: Scalar>(episode: &Episode<S>) -> Result<S, LearnError> {
    episode
        .reward
        .map(|r| S::of(r as f64))
        .ok_or(LearnError::NoReward(episode.start))
}

/// `r + alpha ln pi_d(a) - (alpha + beta) ln pi(a)`, or `r` for variant I.
fn step_return<S: Scalar>(
    step: &StepRecord<S>,
    reward: S,
    hp: &HyperParams,
) -> Result<S, LearnError> {
    if hp.variant == Variant::Independent {
        return Ok(reward);
    }
    let pd = step
        .distilled_prob
        .ok_or(LearnError::MissingDistilled("the regularized return"))?;
    let (alpha, beta) = (S::of(hp.alpha), S::of(hp.beta));
    Ok(reward + alpha * safe_ln(pd) - (alpha + beta) * safe_ln(step.sampling_prob))
}

/// Regularized return `R(u)` of step `u` (1-based). The reward term is
/// zero before the final step.
pub fn regularized_return<S: Scalar>(
    episode: &Episode<S>,
    u: usize,
    hp: &HyperParams,
) -> Result<S, LearnError> {
    let t_len = episode.steps.len();
    if u == 0 || u > t_len {
        return Err(LearnError::StepOutOfRange(u));
    }
    let reward = if u == t_len {
        reward_of(episode)?
    } else {
        S::zero()
    };
    step_return(&episode.steps[u - 1], reward, hp)
}

/// Coefficients `G(t) = sum_{u >= t} gamma^(T - u) R(u)` for `t = 1..=T`,
/// with `baseline` subtracted from the reward.
pub fn discounted_returns<S: Scalar>(
    episode: &Episode<S>,
    hp: &HyperParams,
    baseline: S,
) -> Result<Vec<S>, LearnError> {
    let reward = reward_of(episode)? - baseline;
    let t_len = episode.steps.len();
    let gamma = S::of(hp.gamma);
    let mut out = vec![S::zero(); t_len];
    let mut acc = S::zero();
    let mut discount = S::one();
    for u in (0..t_len).rev() {
        let r = if u + 1 == t_len { reward } else { S::zero() };
        acc += discount * step_return(&episode.steps[u], r, hp)?;
        out[u] = acc;
        discount *= gamma;
    }
    Ok(out)
}

/// Mean over non-dead-end steps of `KL(pi || pi_d)` between the agent's
/// own policy and the distilled policy.
pub fn episode_kl<S: Scalar>(episode: &Episode<S>) -> Option<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for step in episode.steps.iter().filter(|s| !s.dead_end) {
        let psi = step.distilled_scores.as_ref()?;
        let sp: f64 = step.scores.iter().map(|x| x.as_f64()).sum();
        let sd: f64 = psi.iter().map(|x| x.as_f64()).sum();
        total += step
            .scores
            .iter()
            .zip(psi)
            .map(|(&a, &b)| {
                let p = a.as_f64() / sp;
                p * (p / (b.as_f64() / sd)).ln()
            })
            .sum::<f64>();
        n += 1;
    }
    Some(if n == 0 { 0.0 } else { total / n as f64 })
}

/// Scale applied to each loss term of one episode.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Weights<S> {
    pub supervised: S,
    pub policy: S,
    pub distilled_policy: S,
    pub matching: S,
}

impl<S: Scalar> Weights<S> {
    pub fn none() -> Self {
        Self {
            supervised: S::zero(),
            policy: S::zero(),
            distilled_policy: S::zero(),
            matching: S::zero(),
        }
    }
}

/// Gradient sinks for one episode.
pub(crate) struct Sinks<'a, S> {
    /// Receives score, history and classifier gradients.
    pub agent: Option<&'a mut LabelAgent<S>>,
    /// Receives distilled-net gradients.
    pub distilled: Option<&'a mut AffineSigmoid<S>>,
    /// Distilled values, needed for the history path of the joint policy.
    pub distilled_values: Option<&'a AffineSigmoid<S>>,
}

/// Accumulates the weighted loss gradients of one episode in a single pass,
/// including backpropagation through time into the history network.
pub(crate) fn backprop_episode<S: Scalar>(
    graph: &AttributedGraph<S>,
    hp: &HyperParams,
    episode: &Episode<S>,
    sinks: Sinks<'_, S>,
    w: Weights<S>,
    truth: Option<bool>,
    baseline: S,
) -> Result<(), LearnError> {
    let Sinks {
        mut agent,
        mut distilled,
        distilled_values,
    } = sinks;
    let zero = S::zero();
    let one = S::one();
    let t_len = episode.steps.len();
    if t_len == 0 {
        return Err(LearnError::EmptyBatch);
    }
    let d = episode.steps[0].history.len();
    let joint = episode.policy == WalkPolicy::Joint;
    let needs_returns = w.policy != zero || w.distilled_policy != zero;
    let returns = if needs_returns {
        discounted_returns(episode, hp, baseline)?
    } else {
        Vec::new()
    };
    let mut dh = vec![vec![zero; d]; t_len + 1];
    let zero_h = vec![zero; d];
    let gamma = S::of(hp.gamma);
    let alpha = S::of(hp.alpha);

    for (s, step) in episode.steps.iter().enumerate() {
        if step.dead_end {
            continue;
        }
        let h_prev: &[S] = if s == 0 {
            &zero_h
        } else {
            &episode.steps[s - 1].history
        };
        let x_v = graph.node_features(step.node);
        let parts = |k: usize| -> [&[S]; 4] {
            [
                h_prev,
                x_v,
                graph.edge_features(step.edges[k]),
                graph.node_features(step.neighbors[k]),
            ]
        };
        let phi = &step.scores;
        let psi = step.distilled_scores.as_deref();
        let a = step.action;
        let n = phi.len();

        // d ln pi_act(a) / d phi_k and, for the joint policy, / d psi_k.
        let (dphi, dpsi): (Vec<S>, Option<Vec<S>>) = if joint {
            let psi = psi.ok_or(LearnError::MissingDistilled("the joint policy"))?;
            let sq: S = (0..n).map(|k| phi[k] * psi[k]).sum();
            let dphi = (0..n)
                .map(|k| if k == a { one / phi[a] } else { zero } - psi[k] / sq)
                .collect();
            let dpsi = (0..n)
                .map(|k| if k == a { one / psi[a] } else { zero } - phi[k] / sq)
                .collect();
            (dphi, Some(dpsi))
        } else {
            let sp: S = phi.iter().copied().sum();
            let dphi = (0..n)
                .map(|k| if k == a { one / phi[a] } else { zero } - one / sp)
                .collect();
            (dphi, None)
        };

        if w.policy != zero {
            let scale = -w.policy * returns[s];
            let ag = agent
                .as_deref_mut()
                .ok_or(LearnError::MissingSink("agent parameters"))?;
            let mut hsum = zero;
            for k in 0..n {
                let g = scale * dphi[k] * phi[k] * (one - phi[k]);
                ag.score.backward_logits(&parts(k), &[g]);
                hsum += g;
            }
            axpy(hsum, &ag.score.weight.row(0)[..d], &mut dh[s]);
            if let (Some(dpsi), Some(psi)) = (&dpsi, psi) {
                let dv =
                    distilled_values.ok_or(LearnError::MissingDistilled("the joint policy"))?;
                let hs: S = (0..n)
                    .map(|k| scale * dpsi[k] * psi[k] * (one - psi[k]))
                    .sum();
                axpy(hs, &dv.weight.row(0)[..d], &mut dh[s]);
            }
        }

        if w.distilled_policy != zero {
            if let (Some(dpsi), Some(psi)) = (&dpsi, psi) {
                let dn = distilled
                    .as_deref_mut()
                    .ok_or(LearnError::MissingDistilled("the distilled gradient"))?;
                let scale = -w.distilled_policy * returns[s];
                for k in 0..n {
                    let g = scale * dpsi[k] * psi[k] * (one - psi[k]);
                    dn.backward_logits(&parts(k), &[g]);
                }
            }
        }

        if w.matching != zero {
            let psi = psi.ok_or(LearnError::MissingDistilled("the matching term"))?;
            let pd = step
                .distilled_prob
                .ok_or(LearnError::MissingDistilled("the matching term"))?;
            let coef = alpha * gamma.powi((t_len - s - 1) as i32) * (step.sampling_prob - pd);
            if coef != zero {
                let dn = distilled
                    .as_deref_mut()
                    .ok_or(LearnError::MissingDistilled("the matching term"))?;
                let sd: S = psi.iter().copied().sum();
                let scale = -w.matching * coef;
                for k in 0..n {
                    let dl = if k == a { one / psi[a] } else { zero } - one / sd;
                    let g = scale * dl * psi[k] * (one - psi[k]);
                    dn.backward_logits(&parts(k), &[g]);
                }
            }
        }
    }

    if w.supervised != zero {
        let y = truth.ok_or(LearnError::NoReward(episode.start))?;
        let ag = agent
            .as_deref_mut()
            .ok_or(LearnError::MissingSink("agent parameters"))?;
        let target = if y { one } else { zero };
        let g = w.supervised * (episode.probability - target);
        let h_last = episode.final_history();
        ag.classifier.backward_logits(&[h_last], &[g]);
        axpy(g, ag.classifier.weight.row(0), &mut dh[t_len]);
    }

    if w.policy != zero || w.supervised != zero {
        let ag = agent.ok_or(LearnError::MissingSink("agent parameters"))?;
        let states = episode.states();
        let mut carry = std::mem::take(&mut dh[t_len]);
        for s in (0..t_len).rev() {
            if carry.iter().all(|&g| g == zero) {
                carry = std::mem::take(&mut dh[s]);
                continue;
            }
            let state = states.get(s).ok_or(crate::nn::NnError::MissingCache)?;
            let mut back = ag.history.backward(state, &carry, false)?.h_prev;
            axpy(one, &dh[s], &mut back);
            carry = back;
        }
    }
    Ok(())
}

fn check_agent<S: Scalar>(episodes: &[Episode<S>]) -> Result<(), LearnError> {
    if episodes.is_empty() {
        return Err(LearnError::EmptyBatch);
    }
    Ok(())
}

/// Accumulates the negated local policy gradient of a batch of one agent's
/// episodes into the agent's score and history networks, averaged over the
/// batch. `distilled` is required for episodes walked under the joint
/// policy.
pub fn local_policy_gradient<S: Scalar>(
    graph: &AttributedGraph<S>,
    hp: &HyperParams,
    agent: &mut LabelAgent<S>,
    distilled: Option<&AffineSigmoid<S>>,
    episodes: &[Episode<S>],
) -> Result<(), LearnError> {
    check_agent(episodes)?;
    let w = Weights {
        policy: S::one() / S::of(episodes.len() as f64),
        ..Weights::none()
    };
    for ep in episodes {
        let sinks = Sinks {
            agent: Some(&mut *agent),
            distilled: None,
            distilled_values: distilled,
        };
        backprop_episode(graph, hp, ep, sinks, w, None, S::zero())?;
    }
    Ok(())
}

/// Accumulates the negated distilled policy gradient of all agents'
/// episodes. `N` is the number of episodes per agent: the batch length
/// divided by the number of distinct agents.
pub fn distilled_policy_gradient<S: Scalar>(
    graph: &AttributedGraph<S>,
    hp: &HyperParams,
    distilled: &mut AffineSigmoid<S>,
    episodes: &[Episode<S>],
) -> Result<(), LearnError> {
    if !hp.variant.uses_distilled() {
        return Err(LearnError::IndependentVariant);
    }
    check_agent(episodes)?;
    let mut agents: Vec<usize> = episodes.iter().map(|e| e.agent).collect();
    agents.sort_unstable();
    agents.dedup();
    let per_agent = episodes.len().div_ceil(agents.len());
    let inv = S::one() / S::of(per_agent as f64);
    let w = Weights {
        distilled_policy: if hp.variant == Variant::RegularizedJoint {
            inv
        } else {
            S::zero()
        },
        matching: inv,
        ..Weights::none()
    };
    for ep in episodes {
        let sinks = Sinks {
            agent: None,
            distilled: Some(&mut *distilled),
            distilled_values: None,
        };
        backprop_episode(graph, hp, ep, sinks, w, None, S::zero())?;
    }
    Ok(())
}

/// Accumulates the gradient of the binary cross-entropy of the episode's
/// classifier output through the classifier and the whole history chain.
/// Returns the loss.
pub fn supervised_gradient<S: Scalar>(
    graph: &AttributedGraph<S>,
    hp: &HyperParams,
    agent: &mut LabelAgent<S>,
    episode: &Episode<S>,
    truth: bool,
) -> Result<S, LearnError> {
    let w = Weights {
        supervised: S::one(),
        ..Weights::none()
    };
    let sinks = Sinks {
        agent: Some(agent),
        distilled: None,
        distilled_values: None,
    };
    backprop_episode(graph, hp, episode, sinks, w, Some(truth), S::zero())?;
    Ok(binary_cross_entropy(episode.probability, truth))
}
