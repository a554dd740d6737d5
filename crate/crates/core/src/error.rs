use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("self-loop at node {0}")]
    SelfLoop(usize),

    #[error("node index {index} out of range for graph with {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A pairwise multiplier product reached 1, so a geometric series diverges.
    #[error("convergence violation at dyad ({i}, {j}): product {product} >= 1")]
    ConvergenceViolation { i: usize, j: usize, product: f64 },

    #[error("infeasible constraints: {0}")]
    Infeasible(String),

    #[error("model mismatch: expected {expected}, got {found}")]
    ModelMismatch { expected: String, found: String },

    #[error("empty sample")]
    EmptySample,

    #[error("error score undefined for a graph without links")]
    NoLinks,

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("sampled weight exceeds 2^63 - 1")]
    WeightOverflow,

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("schema: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGraph(_) => "invalid_graph",
            Error::SelfLoop(_) => "self_loop",
            Error::NodeOutOfRange { .. } => "node_out_of_range",
            Error::InvalidParams(_) => "invalid_params",
            Error::ConvergenceViolation { .. } => "convergence_violation",
            Error::Infeasible(_) => "infeasible",
            Error::ModelMismatch { .. } => "model_mismatch",
            Error::EmptySample => "empty_sample",
            Error::NoLinks => "no_links",
            Error::InvalidPartition(_) => "invalid_partition",
            Error::WeightOverflow => "weight_overflow",
            Error::Parse { .. } => "parse",
            Error::Schema(_) => "schema",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
