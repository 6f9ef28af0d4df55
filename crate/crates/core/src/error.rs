use thiserror::Error;

/// Errors raised anywhere in the allocation engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("unstable model: {0}")]
    Unstable(String),

    #[error("node {0} has no neighbors")]
    IsolatedNode(usize),

    #[error("unsupported metric for gradient-based policies: {0}")]
    UnsupportedMetric(String),

    #[error("infeasible budget set: {0}")]
    Infeasible(String),

    #[error("no data: {0}")]
    NoData(String),

    #[error("step size too large: {0}")]
    StepSize(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("population generation failed: {0}")]
    Generation(String),

    #[error("realization {realization} (seed {seed}) failed: {source}")]
    Realization {
        realization: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("ingestion error at row {row}: {msg}")]
    Ingest { row: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
