use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{compute_metrics, EvalError, MetricsReport, Summary};
use crate::graph::{stratified_kfold, AttributedGraph, NodeId, Regime};
use crate::learn::{train, AgentParameters, HyperParams, Variant};
use crate::scalar::Scalar;
use crate::walk::predict_nodes;

/// Whether test nodes stay in the graph during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Test nodes remain as unlabeled walk terrain.
    #[serde(rename = "trans")]
    Transductive,
    /// Test nodes and their edges are removed for training and re-inserted
    /// for inference.
    #[serde(rename = "ind")]
    Inductive,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Transductive => "trans",
            Mode::Inductive => "ind",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "trans" | "transductive" => Ok(Mode::Transductive),
            "ind" | "inductive" => Ok(Mode::Inductive),
            other => Err(format!("unknown mode `{other}` (expected trans or ind)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub mode: Mode,
    pub regime: Regime,
    pub folds: usize,
    /// Seed of the fold assignment.
    pub fold_seed: u64,
    /// Run only the first this-many train/test configurations.
    pub max_configurations: Option<usize>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Transductive,
            regime: Regime::TrainOne,
            folds: 5,
            fold_seed: 0,
            max_configurations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub configuration: usize,
    pub train_nodes: usize,
    pub test_nodes: usize,
    pub report: MetricsReport,
    pub train_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub mode: Mode,
    pub regime: Regime,
    pub variant: Variant,
    pub folds: Vec<FoldResult>,
    pub mean: Summary,
}

/// Predicts `nodes` of `graph` with `params` and scores them against the
/// graph's label bits (hidden ones included).
pub fn evaluate_nodes<S: Scalar>(
    graph: &AttributedGraph<S>,
    params: &AgentParameters<S>,
    hp: &HyperParams,
    nodes: &[NodeId],
) -> Result<MetricsReport, EvalError> {
    let preds = predict_nodes(
        graph,
        params,
        nodes,
        hp.walk_length,
        hp.walks_per_node,
        hp.variant.walk_policy(),
        hp.seed,
    )?;
    let predicted: Vec<Vec<bool>> = preds.into_iter().map(|p| p.labels).collect();
    let truth: Vec<Vec<bool>> = nodes
        .iter()
        .map(|&v| graph.label_bits(v).to_vec())
        .collect();
    compute_metrics(&predicted, &truth, graph.label_names())
}

/// Cross-validates MLGW on `graph` under `config`.
pub fn run_protocol<S: Scalar>(
    graph: &AttributedGraph<S>,
    hp: &HyperParams,
    config: &ProtocolConfig,
) -> Result<ProtocolReport, EvalError> {
    let folds = stratified_kfold(graph, config.folds, config.fold_seed)?;
    let count = config
        .max_configurations
        .map_or(folds.k(), |m| m.min(folds.k()));
    let mut results = Vec::with_capacity(count);
    for f in 0..count {
        let (train_nodes, test_nodes) = folds.split(config.regime, f);
        let started = Instant::now();
        let report = match config.mode {
            Mode::Transductive => {
                let visible = graph.with_labeled_subset(&train_nodes)?;
                let (params, _) = train(&visible, hp, &train_nodes)?;
                let seconds = started.elapsed().as_secs_f64();
                (evaluate_nodes(&visible, &params, hp, &test_nodes)?, seconds)
            }
            Mode::Inductive => {
                let (reduced, removal) = graph.remove_nodes(&test_nodes)?;
                let train_new: Vec<NodeId> = train_nodes
                    .iter()
                    .map(|&v| removal.to_new(v).expect("train nodes survive removal"))
                    .collect();
                let visible = reduced.with_labeled_subset(&train_new)?;
                let (params, _) = train(&visible, hp, &train_new)?;
                let seconds = started.elapsed().as_secs_f64();
                let (rebuilt, map) = visible.reinsert(graph, &removal)?;
                let test_new: Vec<NodeId> = test_nodes
                    .iter()
                    .map(|&v| map.to_new(v).expect("reinserted nodes are mapped"))
                    .collect();
                let train_rebuilt: Vec<NodeId> = train_nodes
                    .iter()
                    .map(|&v| map.to_new(v).expect("train nodes are mapped"))
                    .collect();
                let rebuilt = rebuilt.with_labeled_subset(&train_rebuilt)?;
                (evaluate_nodes(&rebuilt, &params, hp, &test_new)?, seconds)
            }
        };
        log::info!(
            "{} {} configuration {f}: micro-F1 {:.4}",
            config.mode,
            config.regime,
            report.0.summary.micro_f1
        );
        results.push(FoldResult {
            configuration: f,
            train_nodes: train_nodes.len(),
            test_nodes: test_nodes.len(),
            report: report.0,
            train_seconds: report.1,
        });
    }
    let mean = Summary::mean(&results.iter().map(|r| r.report.summary).collect::<Vec<_>>());
    Ok(ProtocolReport {
        mode: config.mode,
        regime: config.regime,
        variant: hp.variant,
        folds: results,
        mean,
    })
}

pub const REPORT_CSV_HEADER: &str =
    "regime,mode,variant,configuration,macro_P,macro_R,macro_F1,micro_P,micro_R,micro_F1";

/// CSV with one row per configuration plus a `mean` row per report.
pub fn write_reports_csv(reports: &[ProtocolReport]) -> String {
    let mut out = String::from(REPORT_CSV_HEADER);
    out.push('\n');
    let mut row = |r: &ProtocolReport, conf: &str, s: &Summary| {
        let _ = writeln!(
            out,
            "{},{},{},{conf},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.regime,
            r.mode,
            r.variant,
            s.macro_precision,
            s.macro_recall,
            s.macro_f1,
            s.micro_precision,
            s.micro_recall,
            s.micro_f1
        );
    };
    for r in reports {
        for f in &r.folds {
            row(r, &f.configuration.to_string(), &f.report.summary);
        }
        row(r, "mean", &r.mean);
    }
    out
}
