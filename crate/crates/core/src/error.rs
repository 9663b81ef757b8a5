use std::path::PathBuf;

use crate::optim::LossRecord;

/// Errors raised anywhere in the matching pipeline.
///
/// Every variant maps onto a stable, machine-parsable category through
/// [`Error::category`], which the command-line front end prints as a prefix.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("mesh has no {0}")]
    EmptyMesh(&'static str),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("{unreachable} vertices unreachable from source {source_vertex}")]
    DisconnectedMesh {
        source_vertex: usize,
        unreachable: usize,
    },

    #[error("eigensolver did not converge: {converged}/{requested} pairs after {restarts} restarts")]
    ConvergenceFailure {
        converged: usize,
        requested: usize,
        restarts: usize,
    },

    #[error("requested basis size {requested} exceeds the available {available}")]
    KTooLarge { requested: usize, available: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite input: {0}")]
    NonFiniteInput(String),

    #[error("singular system in row {row} (condition {condition:.3e})")]
    SingularSystem { row: usize, condition: f64 },

    #[error("spectrum has {nonzero} nonzero eigenvalues, need at least 2")]
    InsufficientSpectrum { nonzero: usize },

    #[error("descriptor column {0} is identically zero")]
    ZeroColumn(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("loss became non-finite at step {step}")]
    NonFiniteLoss {
        step: usize,
        history: Vec<LossRecord>,
    },

    #[error("benchmark cell for size {size} exceeded its {budget_secs} s budget")]
    OutOfBudget { size: usize, budget_secs: f64 },

    #[error("invalid cache file: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short error category used as the CLI exit-line prefix.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parse { .. } | Error::Cache(_) => "E_PARSE",
            Error::EmptyMesh(_) => "E_EMPTY",
            Error::DegenerateGeometry(_) => "E_GEOMETRY",
            Error::DisconnectedMesh { .. } => "E_DISCONNECTED",
            Error::ConvergenceFailure { .. } => "E_CONVERGE",
            Error::KTooLarge { .. } => "E_KSIZE",
            Error::DimensionMismatch(_) => "E_DIM",
            Error::NonFiniteInput(_) => "E_NONFINITE",
            Error::SingularSystem { .. } => "E_SINGULAR",
            Error::InsufficientSpectrum { .. } => "E_SPECTRUM",
            Error::ZeroColumn(_) => "E_ZEROCOL",
            Error::Config(_) => "E_CONFIG",
            Error::NonFiniteLoss { .. } => "E_DIVERGE",
            Error::OutOfBudget { .. } => "E_BUDGET",
            Error::Io(_) => "E_IO",
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn dim(message: impl Into<String>) -> Self {
        Error::DimensionMismatch(message.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
