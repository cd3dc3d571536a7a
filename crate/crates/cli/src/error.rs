use mlgw::analysis::AnalysisError;
use mlgw::eval::EvalError;
use mlgw::graph::GraphError;
use mlgw::learn::LearnError;
use mlgw::nn::NnError;
use mlgw::walk::{TraceError, WalkError};
use thiserror::Error;

/// Failure of a subcommand, classified by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Missing or malformed input: files, configuration, node ids.
    #[error("{0}")]
    Input(String),
    /// Inputs that are individually valid but do not fit together.
    #[error("{0}")]
    Consistency(String),
    #[error("{0}")]
    Divergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Consistency(_) => 3,
            CliError::Divergence(_) => 4,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Input(format!("{}: {e}", path.display()))
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<TraceError> for CliError {
    fn from(e: TraceError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::NonFinite { .. } => CliError::Divergence(e.to_string()),
            NnError::Checkpoint(_) => CliError::Input(e.to_string()),
            _ => CliError::Consistency(e.to_string()),
        }
    }
}

impl From<WalkError> for CliError {
    fn from(e: WalkError) -> Self {
        match e {
            WalkError::InvalidStart(_) | WalkError::ZeroLength | WalkError::ZeroWalks => {
                CliError::Input(e.to_string())
            }
            WalkError::Nn(e) => e.into(),
            _ => CliError::Consistency(e.to_string()),
        }
    }
}

impl From<LearnError> for CliError {
    fn from(e: LearnError) -> Self {
        match e {
            LearnError::Divergence(_) => CliError::Divergence(e.to_string()),
            LearnError::InvalidHyperParams(_) | LearnError::EmptyBatch => {
                CliError::Input(e.to_string())
            }
            LearnError::Walk(e) => e.into(),
            LearnError::Nn(e) => e.into(),
            LearnError::Graph(e) => e.into(),
            _ => CliError::Consistency(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Graph(e) => e.into(),
            EvalError::Learn(e) => e.into(),
            EvalError::Walk(e) => e.into(),
            EvalError::Shape(_) => CliError::Consistency(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Empty => CliError::Input(e.to_string()),
            AnalysisError::LabelMismatch(_) => CliError::Consistency(e.to_string()),
        }
    }
}
