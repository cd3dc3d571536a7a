//! Multi-label metrics, the cross-validation protocols and a walk-free
//! reference classifier.

mod baseline;
mod metrics;
mod protocol;

use thiserror::Error;

use crate::graph::GraphError;
use crate::learn::LearnError;
use crate::walk::WalkError;

pub use baseline::{logistic_baseline, LogisticBaseline, DEFAULT_LAMBDAS};
pub use metrics::{compute_metrics, LabelCounts, MetricsReport, Summary};
pub use protocol::{
    evaluate_nodes, run_protocol, write_reports_csv, FoldResult, Mode, ProtocolConfig,
    ProtocolReport, REPORT_CSV_HEADER,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Walk(#[from] WalkError),
}
