use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(&'static str),

    #[error("point is not admissible (smallest pencil eigenvalue {margin:e})")]
    NotAdmissible { margin: f64 },

    #[error("{what} is not admissible at node {node} (multi-index {index:?}, margin {margin:e})")]
    InadmissibleNode {
        what: &'static str,
        node: usize,
        index: Vec<usize>,
        margin: f64,
    },

    #[error("unknown {kind} '{name}' (supported: {supported})")]
    UnknownName {
        kind: &'static str,
        name: String,
        supported: &'static str,
    },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("node {node} is not strictly interior")]
    BoundaryIndex { node: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("linear solver did not reach tolerance after {iterations} iterations (relative residual {relative_residual:e})")]
    LinearSolver {
        iterations: usize,
        relative_residual: f64,
    },

    #[error("line search failed: no admissible step with residual decrease down to step {min_step:e}")]
    LineSearchFailed { min_step: f64 },

    #[error("continuation failed at t = {last_t} (target step {attempted_t})")]
    ContinuationFailed {
        last_t: f64,
        attempted_t: f64,
        state: Box<crate::solver::SolveState>,
    },

    #[error("malformed field header: {0}")]
    MalformedHeader(String),

    #[error("unsupported field format: {0}")]
    UnsupportedFormat(String),

    #[error("truncated field payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("configuration is invalid:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
