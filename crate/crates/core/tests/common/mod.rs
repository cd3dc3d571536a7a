//! Oracles shared by the integration tests: finite differences over replayed
//! episodes and exhaustive enumeration of small walk MDPs.

#![allow(dead_code)]

use mlgw::graph::GraphBuilder;
use mlgw::learn::{
    discounted_returns, distilled_policy_gradient, local_policy_gradient, supervised_gradient,
    AgentParameters, ModelDims,
};
use mlgw::nn::{AffineSigmoid, Gru, ParamTensor, Parameters};
use mlgw::seed::stream;
use mlgw::walk::{replay_episode, run_episode, Episode, StepRecord};
use mlgw::{Graph, HyperParams, Variant, WalkPolicy};
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;

/// `||a - b|| / max(||a||, ||b||)`, or 0 when both are negligible.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale < 1e-10 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn uniform(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Central differences of `loss` with respect to every entry of `tensor(p)`.
pub fn numeric_gradient<P: Clone>(
    params: &P,
    tensor: impl Fn(&mut P) -> &mut ParamTensor<f64>,
    loss: impl Fn(&P) -> f64,
    step: f64,
) -> Vec<f64> {
    let mut p = params.clone();
    let n = tensor(&mut p).value.len();
    (0..n)
        .map(|i| {
            let orig = tensor(&mut p).value[i];
            tensor(&mut p).value[i] = orig + step;
            let up = loss(&p);
            tensor(&mut p).value[i] = orig - step;
            let down = loss(&p);
            tensor(&mut p).value[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Random directed graph with 2-3 out-neighbors per node and, when
/// `dead_end` is set, one node without any.
pub fn random_graph(seed: u64, nodes: usize, dead_end: bool) -> Graph {
    let mut rng = stream(seed, &[1]);
    let (f, e) = (4, 2);
    let mut b = GraphBuilder::<f64>::new()
        .edge_dim(e)
        .vocabulary(vec!["l0".into(), "l1".into()]);
    for v in 0..nodes {
        let labels: Vec<String> = (0..2)
            .filter(|_| rng.gen_bool(0.5))
            .map(|l| format!("l{l}"))
            .collect();
        let labels = if labels.is_empty() {
            vec!["l0".to_string()]
        } else {
            labels
        };
        b.add_node(&format!("n{v}"), &uniform(&mut rng, f, 1.0), &labels, None)
            .unwrap();
    }
    for v in 0..nodes {
        if dead_end && v == nodes - 1 {
            continue;
        }
        let k = rng.gen_range(2..=3);
        let mut targets: Vec<usize> = (0..nodes).filter(|&u| u != v).collect();
        for _ in 0..k {
            let u = targets.swap_remove(rng.gen_range(0..targets.len()));
            b.add_edge(
                &format!("n{v}"),
                &format!("n{u}"),
                Some(&uniform(&mut rng, e, 1.0)),
            )
            .unwrap();
        }
    }
    b.build(false, false).unwrap()
}

/// Parameters with every entry (biases included) drawn from `U(-scale, scale)`.
pub fn random_params(
    graph: &Graph,
    hidden: usize,
    distilled: bool,
    seed: u64,
    scale: f64,
) -> AgentParameters<f64> {
    let mut p = AgentParameters::for_graph(graph, hidden, distilled, seed);
    let mut rng = stream(seed, &[2]);
    for t in p.tensors_mut() {
        for v in t.value.iter_mut() {
            *v = rng.gen_range(-scale..scale);
        }
    }
    p
}

pub fn hyper(variant: Variant, walk_length: usize) -> HyperParams {
    HyperParams {
        variant,
        walk_length,
        gamma: 0.9,
        alpha: 1.0,
        beta: 0.1,
        ..Default::default()
    }
}

/// One recorded walk together with everything needed to replay it.
pub struct Instance {
    pub graph: Graph,
    pub params: AgentParameters<f64>,
    pub hp: HyperParams,
    pub agent: usize,
    pub start: usize,
    pub actions: Vec<usize>,
    pub policy: WalkPolicy,
    pub episode: Episode<f64>,
}

impl Instance {
    pub fn new(seed: u64, variant: Variant, walk_length: usize) -> Self {
        let graph = random_graph(seed, 7, seed.is_multiple_of(3));
        let params = random_params(&graph, 3, variant.uses_distilled(), seed, 0.8);
        let hp = hyper(variant, walk_length);
        let policy = variant.walk_policy();
        let mut rng = stream(seed, &[3]);
        let agent = rng.gen_range(0..2);
        let start = rng.gen_range(0..graph.node_count());
        let episode =
            run_episode(&graph, &params, agent, start, walk_length, policy, &mut rng).unwrap();
        let actions = episode.steps.iter().map(|s| s.action).collect();
        Self {
            graph,
            params,
            hp,
            agent,
            start,
            actions,
            policy,
            episode,
        }
    }

    pub fn replay(&self, params: &AgentParameters<f64>) -> Episode<f64> {
        replay_episode(
            &self.graph,
            params,
            self.agent,
            self.start,
            &self.actions,
            self.policy,
        )
        .unwrap()
    }

    pub fn truth(&self) -> bool {
        self.graph.has_label(self.start, self.agent)
    }

    fn agent_tensor_count(&self) -> usize {
        self.params.agents[self.agent].tensors().len()
    }

    fn check_agent_tensors(
        &self,
        analytic: &mlgw::learn::LabelAgent<f64>,
        loss: impl Fn(&AgentParameters<f64>) -> f64,
    ) -> f64 {
        let i = self.agent;
        (0..self.agent_tensor_count())
            .map(|j| {
                let fd = numeric_gradient(
                    &self.params,
                    |p| p.agents[i].tensors_mut().remove(j),
                    &loss,
                    FD_STEP,
                );
                rel_err(&analytic.tensors()[j].grad, &fd)
            })
            .fold(0.0, f64::max)
    }

    /// Worst relative error of the supervised chain gradient over the
    /// agent's tensors.
    pub fn supervised_error(&self) -> f64 {
        let truth = self.truth();
        let mut agent = self.params.agents[self.agent].clone();
        supervised_gradient(&self.graph, &self.hp, &mut agent, &self.episode, truth).unwrap();
        self.check_agent_tensors(&agent, |p| {
            mlgw::learn::binary_cross_entropy(self.replay(p).probability, truth)
        })
    }

    /// Worst relative error of the local policy gradient, whose loss is
    /// `-sum_t G(t) ln pi(a_t)` with the coefficients held fixed.
    pub fn policy_error(&self) -> f64 {
        let returns = discounted_returns(&self.episode, &self.hp, 0.0).unwrap();
        let mut agent = self.params.agents[self.agent].clone();
        local_policy_gradient(
            &self.graph,
            &self.hp,
            &mut agent,
            self.params.distilled.as_ref(),
            std::slice::from_ref(&self.episode),
        )
        .unwrap();
        self.check_agent_tensors(&agent, |p| {
            let ep = self.replay(p);
            -ep.steps
                .iter()
                .zip(&returns)
                .map(|(s, g)| g * s.sampling_prob.ln())
                .sum::<f64>()
        })
    }

    /// Worst relative error of the distilled gradient. Its loss is the
    /// negated acting-policy term (joint walks only) plus the matching term,
    /// all coefficients held fixed.
    pub fn distilled_error(&self) -> f64 {
        let returns = discounted_returns(&self.episode, &self.hp, 0.0).unwrap();
        let t_len = self.episode.len();
        let matching: Vec<f64> = self
            .episode
            .steps
            .iter()
            .enumerate()
            .map(|(s, st)| {
                self.hp.alpha
                    * self.hp.gamma.powi((t_len - s - 1) as i32)
                    * (st.sampling_prob - st.distilled_prob.unwrap())
            })
            .collect();
        let joint = self.policy == WalkPolicy::Joint;
        let mut distilled = self.params.distilled.clone().unwrap();
        distilled_policy_gradient(
            &self.graph,
            &self.hp,
            &mut distilled,
            std::slice::from_ref(&self.episode),
        )
        .unwrap();
        let loss = |p: &AgentParameters<f64>| {
            let ep = self.replay(p);
            let mut l = 0.0;
            for (s, st) in ep.steps.iter().enumerate() {
                if joint {
                    l -= returns[s] * st.sampling_prob.ln();
                }
                l -= matching[s] * st.distilled_prob.unwrap().ln();
            }
            l
        };
        (0..2)
            .map(|j| {
                let fd = numeric_gradient(
                    &self.params,
                    |p| p.distilled.as_mut().unwrap().tensors_mut().remove(j),
                    loss,
                    FD_STEP,
                );
                rel_err(&distilled.tensors()[j].grad, &fd)
            })
            .fold(0.0, f64::max)
    }
}

/// Standalone GRU cell check for `L = c . h'`, covering parameters, the
/// previous history and the input. `saturated` pushes the update gate
/// towards one.
pub fn gru_error(seed: u64, saturated: bool) -> f64 {
    let (input, hidden) = (6, 4);
    let mut rng = stream(seed, &[4]);
    let mut gru = Gru::<f64>::new("g", input, hidden, &mut rng);
    for t in gru.tensors_mut() {
        for v in t.value.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    if saturated {
        gru.b_z.value.iter_mut().for_each(|b| *b = 8.0);
    }
    let h_prev = uniform(&mut rng, hidden, 1.0);
    let x = uniform(&mut rng, input, 1.0);
    let c = uniform(&mut rng, hidden, 1.0);
    let (xv, cn) = x.split_at(input / 2);
    let loss = |g: &Gru<f64>, h: &[f64], x: &[f64]| {
        let (xv, cn) = x.split_at(input / 2);
        let out = g.forward(h, xv, cn).unwrap();
        out.h.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>()
    };
    let state = gru.forward(&h_prev, xv, cn).unwrap();
    let mut analytic = gru.clone();
    let grads = analytic.backward(&state, &c, true).unwrap();
    let mut worst = 0.0_f64;
    for j in 0..9 {
        let fd = numeric_gradient(
            &gru,
            |g| g.tensors_mut().remove(j),
            |g| loss(g, &h_prev, &x),
            FD_STEP,
        );
        worst = worst.max(rel_err(&analytic.tensors()[j].grad, &fd));
    }
    let fd_h: Vec<f64> = vector_gradient(&h_prev, |h| loss(&gru, h, &x));
    let fd_x: Vec<f64> = vector_gradient(&x, |x| loss(&gru, &h_prev, x));
    worst = worst.max(rel_err(&grads.h_prev, &fd_h));
    worst.max(rel_err(grads.input.as_ref().unwrap(), &fd_x))
}

/// Standalone multi-output sigmoid layer check for `L = c . y`.
pub fn affine_error(seed: u64) -> f64 {
    let (inputs, outputs) = (7, 3);
    let mut rng = stream(seed, &[5]);
    let mut layer = AffineSigmoid::<f64>::new("a", inputs, outputs, &mut rng);
    for v in layer.bias.value.iter_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    let x = uniform(&mut rng, inputs, 1.5);
    let c = uniform(&mut rng, outputs, 1.0);
    let loss = |l: &AffineSigmoid<f64>, x: &[f64]| {
        l.forward(x)
            .unwrap()
            .iter()
            .zip(&c)
            .map(|(a, b)| a * b)
            .sum::<f64>()
    };
    let y = layer.forward(&x).unwrap();
    let mut analytic = layer.clone();
    let dx = analytic.backward(&x, &y, &c);
    let mut worst = 0.0_f64;
    for j in 0..2 {
        let fd = numeric_gradient(
            &layer,
            |l| l.tensors_mut().remove(j),
            |l| loss(l, &x),
            FD_STEP,
        );
        worst = worst.max(rel_err(&analytic.tensors()[j].grad, &fd));
    }
    worst.max(rel_err(&dx, &vector_gradient(&x, |x| loss(&layer, x))))
}

fn vector_gradient(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + FD_STEP;
            let up = f(&p);
            p[i] = x[i] - FD_STEP;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// A layered directed graph in which every non-terminal node has exactly
/// two successors: `s -> {a, b}` for `depth = 1`, and additionally
/// `a, b -> {c, d}` for `depth = 2`.
pub fn micro_mdp(seed: u64, depth: usize) -> Graph {
    let mut rng = stream(seed, &[6]);
    let layers: Vec<Vec<&str>> = match depth {
        1 => vec![vec!["s"], vec!["a", "b"]],
        2 => vec![vec!["s"], vec!["a", "b"], vec!["c", "d"]],
        _ => panic!("depth must be 1 or 2"),
    };
    let mut b = GraphBuilder::<f64>::new()
        .edge_dim(2)
        .vocabulary(vec!["x".into(), "y".into()]);
    for name in layers.iter().flatten() {
        let label = if rng.gen_bool(0.5) { "x" } else { "y" };
        b.add_node(name, &uniform(&mut rng, 3, 1.0), &[label.to_string()], None)
            .unwrap();
    }
    for w in layers.windows(2) {
        for src in &w[0] {
            for dst in &w[1] {
                b.add_edge(src, dst, Some(&uniform(&mut rng, 2, 1.0)))
                    .unwrap();
            }
        }
    }
    b.build(false, false).unwrap()
}

/// Every trajectory of a micro MDP with its probability under the acting
/// policy and a designed reward in place of the classifier's.
pub fn enumerate(
    graph: &Graph,
    params: &AgentParameters<f64>,
    depth: usize,
    policy: WalkPolicy,
) -> Vec<(f64, Episode<f64>)> {
    let start = graph.node_by_name("s").unwrap();
    (0..1usize << depth)
        .map(|code| {
            let actions: Vec<usize> = (0..depth).map(|t| (code >> t) & 1).collect();
            let mut ep = replay_episode(graph, params, 0, start, &actions, policy).unwrap();
            ep.reward = Some(if code.count_ones() % 2 == 0 { 1 } else { -1 });
            let p = ep.steps.iter().map(|s| s.sampling_prob).product();
            (p, ep)
        })
        .collect()
}

/// Score-net input `[h_prev | x_v | x_e | x_k | 1]` of each candidate.
fn score_inputs(graph: &Graph, ep: &Episode<f64>, s: usize) -> Vec<Vec<f64>> {
    let step = &ep.steps[s];
    let h_prev = if s == 0 {
        vec![0.0; step.history.len()]
    } else {
        ep.steps[s - 1].history.clone()
    };
    (0..step.neighbors.len())
        .map(|k| {
            let mut z = h_prev.clone();
            z.extend_from_slice(graph.node_features(step.node));
            z.extend_from_slice(graph.edge_features(step.edges[k]));
            z.extend_from_slice(graph.node_features(step.neighbors[k]));
            z.push(1.0);
            z
        })
        .collect()
}

/// `d ln p(a) / d theta` for a net with sigmoid scores `own`, where the
/// action distribution is `probs` (either `own` normalized, or a product
/// with another net's scores renormalized). Weights first, bias last.
fn log_prob_gradient(z: &[Vec<f64>], own: &[f64], probs: &[f64], a: usize) -> Vec<f64> {
    let mut g: Vec<f64> = z[a].iter().map(|v| (1.0 - own[a]) * v).collect();
    for k in 0..own.len() {
        for (gi, zi) in g.iter_mut().zip(&z[k]) {
            *gi -= probs[k] * (1.0 - own[k]) * zi;
        }
    }
    g
}

fn sampling_probs(step: &StepRecord<f64>, policy: WalkPolicy) -> Vec<f64> {
    let w: Vec<f64> = match policy {
        WalkPolicy::Local => step.scores.clone(),
        WalkPolicy::Joint => step
            .scores
            .iter()
            .zip(step.distilled_scores.as_ref().unwrap())
            .map(|(a, b)| a * b)
            .collect(),
    };
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

fn distilled_probs(step: &StepRecord<f64>) -> Vec<f64> {
    let psi = step.distilled_scores.as_ref().unwrap();
    let total: f64 = psi.iter().sum();
    psi.iter().map(|x| x / total).collect()
}

fn flat_grad(net: &AffineSigmoid<f64>) -> Vec<f64> {
    let mut g = net.weight.grad.clone();
    g.extend_from_slice(&net.bias.grad);
    g
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Maximum absolute gap between the probability-weighted local policy
/// gradient over all trajectories and the score-net gradient of the
/// regularized objective `J = E[sum_u gamma^(T-u) R(u)]`, derived in closed
/// form.
pub fn local_oracle_gap(seed: u64, depth: usize, variant: Variant) -> f64 {
    let graph = micro_mdp(seed, depth);
    let params = random_params(&graph, 3, variant.uses_distilled(), seed, 1.0);
    let hp = hyper(variant, depth);
    let policy = variant.walk_policy();
    let width = params.dims.score_input() + 1;
    let mut expected = vec![0.0; width];
    let mut analytic = vec![0.0; width];
    for (p, ep) in enumerate(&graph, &params, depth, policy) {
        let mut agent = params.agents[0].clone();
        local_policy_gradient(
            &graph,
            &hp,
            &mut agent,
            params.distilled.as_ref(),
            std::slice::from_ref(&ep),
        )
        .unwrap();
        axpy(-p, &flat_grad(&agent.score), &mut expected);

        let r = ep.reward.unwrap() as f64;
        let mut total = 0.0;
        let mut score_sum = vec![0.0; width];
        let mut entropy_part = vec![0.0; width];
        for (s, step) in ep.steps.iter().enumerate() {
            let z = score_inputs(&graph, &ep, s);
            let g = log_prob_gradient(&z, &step.scores, &sampling_probs(step, policy), step.action);
            let discount = hp.gamma.powi((depth - s - 1) as i32);
            let r = if s + 1 == depth { r } else { 0.0 };
            let r_hat = match variant {
                Variant::Independent => r,
                _ => {
                    r + hp.alpha * step.distilled_prob.unwrap().ln()
                        - (hp.alpha + hp.beta) * step.sampling_prob.ln()
                }
            };
            total += discount * r_hat;
            axpy(1.0, &g, &mut score_sum);
            if variant != Variant::Independent {
                axpy(-discount * (hp.alpha + hp.beta), &g, &mut entropy_part);
            }
        }
        // grad (P W) = P (grad ln P) W + P grad W
        axpy(p * total, &score_sum, &mut analytic);
        axpy(p, &entropy_part, &mut analytic);
    }
    max_abs_diff(&expected, &analytic)
}

/// Maximum absolute gap between the enumerated local policy gradient with
/// respect to the history network and a fourth-order finite difference of
/// the exactly enumerated objective. Valid for variant I, where the reward
/// does not depend on the parameters.
pub fn history_oracle_gap(seed: u64) -> f64 {
    let depth = 2;
    let graph = micro_mdp(seed, depth);
    let params = random_params(&graph, 3, false, seed, 1.0);
    let hp = hyper(Variant::Independent, depth);
    let mut agent = params.agents[0].clone();
    let episodes = enumerate(&graph, &params, depth, WalkPolicy::Local);
    for (p, ep) in &episodes {
        let mut one = params.agents[0].clone();
        local_policy_gradient(&graph, &hp, &mut one, None, std::slice::from_ref(ep)).unwrap();
        for (dst, src) in agent
            .history
            .tensors_mut()
            .into_iter()
            .zip(one.history.tensors())
        {
            axpy(-p, &src.grad, &mut dst.grad);
        }
    }
    let objective = |q: &AgentParameters<f64>| {
        enumerate(&graph, q, depth, WalkPolicy::Local)
            .iter()
            .map(|(p, ep)| p * ep.reward.unwrap() as f64)
            .sum::<f64>()
    };
    let h = 1e-3;
    let mut worst = 0.0_f64;
    for j in 0..9 {
        let mut q = params.clone();
        let n = q.agents[0].history.tensors()[j].value.len();
        for i in 0..n {
            let orig = q.agents[0].history.tensors()[j].value[i];
            let mut at = |x: f64| {
                q.agents[0].history.tensors_mut()[j].value[i] = orig + x;
                objective(&q)
            };
            let fd = (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
            q.agents[0].history.tensors_mut()[j].value[i] = orig;
            worst = worst.max((agent.history.tensors()[j].grad[i] - fd).abs());
        }
    }
    worst
}

/// Maximum absolute gap between the probability-weighted distilled gradient
/// over all trajectories and its closed-form expectation: the matching term
/// `alpha sum_t gamma^(T-t) (pi(a_t) - pi_d(a_t)) grad ln pi_d(a_t)` plus,
/// for joint walks, the acting-policy term `sum_t G(t) grad ln pi(a_t)`.
pub fn distilled_oracle_gap(seed: u64, depth: usize, variant: Variant) -> f64 {
    let graph = micro_mdp(seed, depth);
    let params = random_params(&graph, 3, true, seed, 1.0);
    let hp = hyper(variant, depth);
    let policy = variant.walk_policy();
    let width = params.dims.score_input() + 1;
    let mut expected = vec![0.0; width];
    let mut analytic = vec![0.0; width];
    for (p, ep) in enumerate(&graph, &params, depth, policy) {
        let mut net = params.distilled.clone().unwrap();
        distilled_policy_gradient(&graph, &hp, &mut net, std::slice::from_ref(&ep)).unwrap();
        axpy(-p, &flat_grad(&net), &mut expected);

        let returns = discounted_returns(&ep, &hp, 0.0).unwrap();
        for (s, step) in ep.steps.iter().enumerate() {
            let z = score_inputs(&graph, &ep, s);
            let psi = step.distilled_scores.as_ref().unwrap();
            let a = step.action;
            let coef = hp.alpha
                * hp.gamma.powi((depth - s - 1) as i32)
                * (step.sampling_prob - step.distilled_prob.unwrap());
            axpy(
                p * coef,
                &log_prob_gradient(&z, psi, &distilled_probs(step), a),
                &mut analytic,
            );
            if policy == WalkPolicy::Joint {
                let g = log_prob_gradient(&z, psi, &sampling_probs(step, policy), a);
                axpy(p * returns[s], &g, &mut analytic);
            }
        }
    }
    max_abs_diff(&expected, &analytic)
}

/// Exact `KL(pi || pi_d)` at the start node of a one-step micro MDP.
pub fn bandit_kl(graph: &Graph, params: &AgentParameters<f64>) -> f64 {
    let ep = &enumerate(graph, params, 1, WalkPolicy::Local)[0].1;
    let step = &ep.steps[0];
    let pi = sampling_probs(step, WalkPolicy::Local);
    let pd = distilled_probs(step);
    pi.iter().zip(&pd).map(|(p, q)| p * (p / q).ln()).sum()
}

/// Runs gradient descent on the distilled net alone with the exact expected
/// matching gradient (variant REG, agent frozen) and returns the KL at the
/// start and at the end.
pub fn matching_descent(seed: u64, iterations: usize, learning_rate: f64) -> (f64, f64) {
    let graph = micro_mdp(seed, 1);
    let mut params = random_params(&graph, 3, true, seed, 1.0);
    for v in params.agents[0].score.weight.value.iter_mut() {
        *v *= 3.0;
    }
    let hp = hyper(Variant::Regularized, 1);
    let before = bandit_kl(&graph, &params);
    for _ in 0..iterations {
        let mut net = params.distilled.clone().unwrap();
        for (p, ep) in enumerate(&graph, &params, 1, WalkPolicy::Local) {
            let mut one = params.distilled.clone().unwrap();
            distilled_policy_gradient(&graph, &hp, &mut one, std::slice::from_ref(&ep)).unwrap();
            axpy(p, &one.weight.grad, &mut net.weight.grad);
            axpy(p, &one.bias.grad, &mut net.bias.grad);
        }
        let d = params.distilled.as_mut().unwrap();
        axpy(-learning_rate, &net.weight.grad, &mut d.weight.value);
        axpy(-learning_rate, &net.bias.grad, &mut d.bias.value);
    }
    (before, bandit_kl(&graph, &params))
}

pub fn dims() -> ModelDims {
    ModelDims {
        node_dim: 4,
        edge_dim: 2,
        hidden: 3,
    }
}

/// Whether variant REG with `alpha = beta = 0` produces bit-identical local
/// gradients and optimizer updates to variant I on the same episodes.
pub fn reduction_is_exact(seed: u64) -> bool {
    let graph = random_graph(seed, 7, seed.is_multiple_of(2));
    let params = random_params(&graph, 3, true, seed, 0.8);
    let mut rng = stream(seed, &[7]);
    let episodes: Vec<Episode<f64>> = (0..6)
        .map(|m| {
            run_episode(
                &graph,
                &params,
                0,
                m % graph.node_count(),
                4,
                WalkPolicy::Local,
                &mut rng,
            )
            .unwrap()
        })
        .collect();
    let update = |variant: Variant| {
        let hp = HyperParams {
            alpha: 0.0,
            beta: 0.0,
            ..hyper(variant, 4)
        };
        let mut agent = params.agents[0].clone();
        local_policy_gradient(
            &graph,
            &hp,
            &mut agent,
            params.distilled.as_ref(),
            &episodes,
        )
        .unwrap();
        let grads: Vec<Vec<f64>> = agent.tensors().iter().map(|t| t.grad.clone()).collect();
        let mut opt = mlgw::nn::Optimizer::adam(1e-2);
        opt.step(&mut agent.tensors_mut()).unwrap();
        (grads, agent)
    };
    let (gi, ai) = update(Variant::Independent);
    let (gr, ar) = update(Variant::Regularized);
    let bits = |g: &[Vec<f64>]| -> Vec<u64> { g.iter().flatten().map(|x| x.to_bits()).collect() };
    bits(&gi) == bits(&gr) && ai == ar && gi.iter().flatten().any(|&x| x != 0.0)
}

/// Random multi-label prediction problem: `(predictions, truth, names)`.
pub fn random_labelings(seed: u64) -> (Vec<Vec<bool>>, Vec<Vec<bool>>, Vec<String>) {
    let mut rng = stream(seed, &[8]);
    let n = rng.gen_range(1..40);
    let l = rng.gen_range(1..7);
    let density = rng.gen_range(0.05..0.9);
    let draw = |rng: &mut mlgw::seed::StreamRng| -> Vec<Vec<bool>> {
        (0..n)
            .map(|_| (0..l).map(|_| rng.gen_bool(density)).collect())
            .collect()
    };
    let pred = draw(&mut rng);
    let truth = draw(&mut rng);
    (pred, truth, (0..l).map(|i| format!("l{i}")).collect())
}

/// Metrics recomputed from sets of `(node, label)` pairs:
/// `[macro P, macro R, macro F1, micro P, micro R, micro F1]`.
pub fn brute_force_metrics(pred: &[Vec<bool>], truth: &[Vec<bool>], labels: usize) -> [f64; 6] {
    use std::collections::BTreeSet;
    let pairs = |m: &[Vec<bool>]| -> BTreeSet<(usize, usize)> {
        m.iter()
            .enumerate()
            .flat_map(|(v, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &b)| b)
                    .map(move |(l, _)| (v, l))
            })
            .collect()
    };
    let (p, t) = (pairs(pred), pairs(truth));
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let f1 = |p: f64, r: f64| {
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    };
    let mut macro_sums = [0.0; 3];
    for l in 0..labels {
        let pl: BTreeSet<_> = p.iter().filter(|x| x.1 == l).collect();
        let tl: BTreeSet<_> = t.iter().filter(|x| x.1 == l).collect();
        let tp = pl.intersection(&tl).count();
        let (pr, rc) = (ratio(tp, pl.len()), ratio(tp, tl.len()));
        macro_sums[0] += pr;
        macro_sums[1] += rc;
        macro_sums[2] += f1(pr, rc);
    }
    let tp = p.intersection(&t).count();
    let (pr, rc) = (ratio(tp, p.len()), ratio(tp, t.len()));
    let k = labels as f64;
    [
        macro_sums[0] / k,
        macro_sums[1] / k,
        macro_sums[2] / k,
        pr,
        rc,
        f1(pr, rc),
    ]
}

pub fn summary_array(s: &mlgw::eval::Summary) -> [f64; 6] {
    [
        s.macro_precision,
        s.macro_recall,
        s.macro_f1,
        s.micro_precision,
        s.micro_recall,
        s.micro_f1,
    ]
}
