use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("network schema violation: {0}")]
    Schema(String),
    #[error("cannot read network file: {0}")]
    Io(String),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("edge {edge:?} references unknown node {node:?}")]
    UnknownNode { edge: String, node: String },
    #[error("{entity}: {message}")]
    InvalidParameter { entity: String, message: String },
    #[error("node {0:?} has both demand and supply positive (or both optimized)")]
    ConflictingFlows(String),
    #[error("network has no slack node")]
    NoSlack,
    #[error("network has more than one slack node: {0:?}")]
    MultipleSlack(Vec<String>),
    #[error("network is disconnected: node {0:?} is unreachable")]
    Disconnected(String),
    #[error("pipe {pipe:?}: resistance {given} differs from computed value {computed}")]
    InconsistentResistance {
        pipe: String,
        given: f64,
        computed: f64,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("stochastic grid needs at least 4 cells, got {0}")]
    TooFewCells(usize),
    #[error("degenerate uncertainty interval [{lo}, {hi}]")]
    DegenerateInterval { lo: f64, hi: f64 },
    #[error("truncated normal standard deviation must be positive, got {0}")]
    InvalidStd(f64),
    #[error("non-finite uncertainty parameter")]
    NonFinite,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SteadyError {
    #[error(
        "steady solve did not converge after {iterations} iterations (residual {residual:.3e})"
    )]
    NotConverged { iterations: usize, residual: f64 },
    #[error("line search stalled at iteration {iteration} (residual {residual:.3e})")]
    LineSearchStalled { iteration: usize, residual: f64 },
    #[error("negative squared pressure {value:.6e} at node {node:?}: infeasible operating point")]
    NegativePressure { node: String, value: f64 },
    #[error("compressor {compressor:?}: ratio {alpha} outside [1, {alpha_max}]")]
    RatioOutOfRange {
        compressor: String,
        alpha: f64,
        alpha_max: f64,
    },
    #[error("input length mismatch: {0}")]
    Dimension(String),
    #[error("singular Jacobian at iteration {0}")]
    Singular(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NlpError {
    #[error("non-finite {what} at index {index}")]
    Evaluation { what: &'static str, index: usize },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("KKT factorization failed: {0}")]
    Factorization(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OgfError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Nlp(#[from] NlpError),
    #[error("node {node:?}: infeasible pressure box [{min}, {max}]")]
    InfeasibleBox { node: String, min: f64, max: f64 },
    #[error("chance-constrained assembly supports exactly one uncertain node, found {0:?}")]
    UnsupportedUncertainty(Vec<String>),
    #[error("node {0:?} has a relaxed minimum pressure but no epsilon")]
    MissingEpsilon(String),
    #[error("node {0:?} is flagged for a chance constraint but carries no stochastic grid")]
    MissingGrid(String),
    #[error("invalid penalty configuration: {0}")]
    Penalty(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PricingError {
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("unknown edge {0:?}")]
    UnknownEdge(String),
    #[error("node {0:?} has no optimized flow")]
    NotOptimized(String),
    #[error("solution has no chance-constrained node")]
    NoChanceNode,
}
