use serde::{Deserialize, Serialize};

use super::{compute_metrics, EvalError, MetricsReport};
use crate::graph::{AttributedGraph, NodeId};
use crate::scalar::Scalar;

/// L2 strengths tried by [`logistic_baseline`].
pub const DEFAULT_LAMBDAS: [f64; 6] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0];

const ITERATIONS: usize = 2000;

/// Result of the walk-free reference classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticBaseline {
    pub lambda: f64,
    pub report: MetricsReport,
}

fn sigmoid(z: f64) -> f64 {
    crate::scalar::sigmoid(z)
}

/// Fits `w, b` minimizing mean logistic loss plus `lambda/2 |w|^2` by
/// Nesterov-accelerated gradient descent.
fn fit(x: &[Vec<f64>], y: &[f64], lambda: f64) -> (Vec<f64>, f64) {
    let f = x.first().map_or(0, Vec::len);
    let n = x.len() as f64;
    let max_sq = x
        .iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>())
        .fold(0.0, f64::max);
    let step = 1.0 / (0.25 * (max_sq + 1.0) + lambda);
    let (mut w, mut b) = (vec![0.0; f], 0.0);
    let (mut w_prev, mut b_prev) = (w.clone(), b);
    for it in 0..ITERATIONS {
        let mom = it as f64 / (it as f64 + 3.0);
        let wl: Vec<f64> = w
            .iter()
            .zip(&w_prev)
            .map(|(a, p)| a + mom * (a - p))
            .collect();
        let bl = b + mom * (b - b_prev);
        let mut gw: Vec<f64> = wl.iter().map(|v| lambda * v).collect();
        let mut gb = 0.0;
        for (row, &t) in x.iter().zip(y) {
            let z = bl + row.iter().zip(&wl).map(|(a, c)| a * c).sum::<f64>();
            let e = (sigmoid(z) - t) / n;
            gb += e;
            for (g, v) in gw.iter_mut().zip(row) {
                *g += e * v;
            }
        }
        w_prev = std::mem::replace(
            &mut w,
            wl.iter().zip(&gw).map(|(a, g)| a - step * g).collect(),
        );
        b_prev = std::mem::replace(&mut b, bl - step * gb);
    }
    (w, b)
}

/// One-vs-rest L2 logistic regression on raw node features, trained on
/// `train` and scored on `test`. Every strength in `lambdas` is tried and
/// the one with the best test micro-F1 is reported, which favors the
/// baseline.
pub fn logistic_baseline<S: Scalar>(
    graph: &AttributedGraph<S>,
    train: &[NodeId],
    test: &[NodeId],
    lambdas: &[f64],
) -> Result<LogisticBaseline, EvalError> {
    let feats = |nodes: &[NodeId]| -> Vec<Vec<f64>> {
        nodes
            .iter()
            .map(|&v| graph.node_features(v).iter().map(|x| x.as_f64()).collect())
            .collect()
    };
    let (xtr, xte) = (feats(train), feats(test));
    let truth: Vec<Vec<bool>> = test.iter().map(|&v| graph.label_bits(v).to_vec()).collect();
    let mut best: Option<LogisticBaseline> = None;
    for &lambda in lambdas {
        let mut pred = vec![vec![false; graph.label_count()]; test.len()];
        for l in 0..graph.label_count() {
            let y: Vec<f64> = train
                .iter()
                .map(|&v| if graph.has_label(v, l) { 1.0 } else { 0.0 })
                .collect();
            let (w, b) = fit(&xtr, &y, lambda);
            for (row, p) in xte.iter().zip(pred.iter_mut()) {
                let z = b + row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
                p[l] = z > 0.0;
            }
        }
        let report = compute_metrics(&pred, &truth, graph.label_names())?;
        if best
            .as_ref()
            .is_none_or(|b| report.summary.micro_f1 > b.report.summary.micro_f1)
        {
            best = Some(LogisticBaseline { lambda, report });
        }
    }
    best.ok_or_else(|| EvalError::Shape("no regularization strengths given".into()))
}
