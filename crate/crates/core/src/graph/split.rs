//! Iterative stratification for multi-label k-fold splits.
//!
//! Labels are processed rarest first. Each positive example of the current
//! label goes to the fold that still wants the most examples of that label;
//! ties fall back to the fold with the most remaining total capacity, then to
//! a seeded random pick. Demands are kept as integers scaled by `k` so tie
//! detection is exact.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{AttributedGraph, GraphError, NodeId};
use crate::scalar::Scalar;
use crate::seed::{stream, TAG_FOLDS};

/// Train/test regime over a k-fold assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// Train on one fold, test on the remaining `k - 1`.
    #[serde(rename = "tr1")]
    TrainOne,
    /// Train on `k - 1` folds, test on the held-out one.
    #[serde(rename = "tr4")]
    TrainRest,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::TrainOne => "tr1",
            Regime::TrainRest => "tr4",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tr1" | "tr-1" => Ok(Regime::TrainOne),
            "tr4" | "tr-4" => Ok(Regime::TrainRest),
            other => Err(format!("unknown regime `{other}` (expected tr1 or tr4)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    k: usize,
    fold: Vec<Option<usize>>,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fold_of(&self, v: NodeId) -> Option<usize> {
        self.fold.get(v).copied().flatten()
    }

    pub fn members(&self, f: usize) -> Vec<NodeId> {
        (0..self.fold.len())
            .filter(|&v| self.fold[v] == Some(f))
            .collect()
    }

    /// `(train, test)` node lists for configuration `f` of `regime`.
    pub fn split(&self, regime: Regime, f: usize) -> (Vec<NodeId>, Vec<NodeId>) {
        let (inside, outside): (Vec<NodeId>, Vec<NodeId>) = (0..self.fold.len())
            .filter(|&v| self.fold[v].is_some())
            .partition(|&v| self.fold[v] == Some(f));
        match regime {
            Regime::TrainOne => (inside, outside),
            Regime::TrainRest => (outside, inside),
        }
    }
}

fn pick(candidates: &[usize], key: impl Fn(usize) -> i64) -> Vec<usize> {
    let best = candidates.iter().map(|&j| key(j)).max().unwrap();
    candidates
        .iter()
        .copied()
        .filter(|&j| key(j) == best)
        .collect()
}

struct Stratifier {
    k: i64,
    label_demand: Vec<Vec<i64>>,
    total_demand: Vec<i64>,
    remaining: Vec<i64>,
    fold: Vec<Option<usize>>,
    assigned: Vec<bool>,
}

impl Stratifier {
    fn place(
        &mut self,
        pos: usize,
        node: NodeId,
        labels: &[usize],
        candidates: &[usize],
        rng: &mut crate::seed::StreamRng,
    ) {
        let j = if candidates.len() == 1 {
            candidates[0]
        } else {
            *candidates.choose(rng).unwrap()
        };
        self.fold[node] = Some(j);
        self.assigned[pos] = true;
        for &l in labels {
            self.label_demand[l][j] -= self.k;
            self.remaining[l] -= 1;
        }
        self.total_demand[j] -= self.k;
    }
}

/// Assigns every labeled node of `graph` to one of `k` folds.
pub fn stratified_kfold<S: Scalar>(
    graph: &AttributedGraph<S>,
    k: usize,
    seed: u64,
) -> Result<FoldAssignment, GraphError> {
    let mut nodes = graph.labeled_nodes();
    if k < 2 {
        return Err(GraphError::Split(format!("need k >= 2, got {k}")));
    }
    if k > nodes.len() {
        return Err(GraphError::Split(format!(
            "k = {k} exceeds the {} labeled nodes",
            nodes.len()
        )));
    }
    let mut rng = stream(seed, &[TAG_FOLDS]);
    nodes.shuffle(&mut rng);

    let n_labels = graph.label_count();
    let label_sets: Vec<Vec<usize>> = nodes.iter().map(|&v| graph.visible_labels(v)).collect();
    let mut remaining = vec![0i64; n_labels];
    for set in &label_sets {
        for &l in set {
            remaining[l] += 1;
        }
    }
    let mut st = Stratifier {
        k: k as i64,
        // demand * k: desired count minus k times what each fold already holds.
        label_demand: remaining.iter().map(|&c| vec![c; k]).collect(),
        total_demand: vec![nodes.len() as i64; k],
        remaining,
        fold: vec![None; graph.node_count()],
        assigned: vec![false; nodes.len()],
    };
    let folds: Vec<usize> = (0..k).collect();

    loop {
        let next = (0..n_labels)
            .filter(|&l| st.remaining[l] > 0)
            .min_by_key(|&l| (st.remaining[l], l));
        let Some(l) = next else { break };
        for pos in 0..nodes.len() {
            if st.assigned[pos] || !label_sets[pos].contains(&l) {
                continue;
            }
            let by_label = pick(&folds, |j| st.label_demand[l][j]);
            let by_total = pick(&by_label, |j| st.total_demand[j]);
            st.place(pos, nodes[pos], &label_sets[pos], &by_total, &mut rng);
        }
    }
    // Labeled nodes always carry a label, but keep the assignment total anyway.
    for pos in 0..nodes.len() {
        if !st.assigned[pos] {
            let by_total = pick(&folds, |j| st.total_demand[j]);
            st.place(pos, nodes[pos], &label_sets[pos], &by_total, &mut rng);
        }
    }
    let fold = st.fold;
    Ok(FoldAssignment { k, fold })
}
