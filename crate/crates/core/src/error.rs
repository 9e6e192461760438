use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("network graph is disconnected")]
    DisconnectedGraph,
    #[error("induced subgraph on load buses is disconnected")]
    DisconnectedLoadSubgraph,
    #[error("parameter `{field}` at index {index} must be positive (got {value})")]
    NonPositiveParameter {
        field: &'static str,
        index: usize,
        value: f64,
    },
    #[error("tap ratio at load {index} must be positive (got {value})")]
    NonPositiveTap { index: usize, value: f64 },
    #[error("linear system is numerically singular (reciprocal condition {rcond:e})")]
    SingularSystem { rcond: f64 },
    #[error("invalid network description: {0}")]
    InvalidNetwork(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid two-bus parameters: {0}")]
    InvalidTwoBus(String),
    #[error("no feasible load level in the family")]
    NoFeasiblePoint,
    #[error("load family stays feasible for arbitrarily large susceptance")]
    UnboundedFamily,
    #[error("brute-force search too large ({cells} cells, limit {limit})")]
    BoxTooLarge { cells: u64, limit: u64 },
    #[error("no equilibrium exists (set P is empty)")]
    Infeasible,
    #[error("conic solver stopped: {0}")]
    Solver(String),
    #[error("tap position is already certified stable; no support needed")]
    AlreadyStable,
    #[error("support recovery violates bounds at load {index} (d = {value}, b_s = {bound})")]
    SupportInfeasible { index: usize, value: f64, bound: f64 },
    #[error("local solve failed: {0}")]
    LocalSolveFailed(String),
    #[error("agent {agent} owns buses that do not form a connected subgraph")]
    DisconnectedAgent { agent: usize },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("consensus update for bus {bus} is missing contributions")]
    MissingContribution { bus: usize },
    #[error("agent {agent}: {source}")]
    Agent {
        agent: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
