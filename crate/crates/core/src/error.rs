use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can report.
///
/// Variants map one-to-one onto the error conditions of the public
/// operations so that callers (and the CLI exit-code logic) can match on
/// them directly.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    // graph
    #[error("graph contains a cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(String, String),
    #[error("node `{0}` appears in more than one of the X, Y, Z sets")]
    Overlap(String),
    #[error("path enumeration exceeded the limit of {0} paths")]
    PathExplosion(usize),

    // models
    #[error("exogenous configuration count {count} exceeds the enumeration budget {budget}")]
    BudgetExceeded { count: u128, budget: u128 },
    #[error("value `{value}` is not in the domain of `{node}`")]
    Domain { node: String, value: String },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),
    #[error("invalid path selection: {0}")]
    InvalidPathSelection(String),
    #[error("observation has zero probability under the model")]
    ImpossibleObservation,

    // estimation
    #[error("stratum {0} is empty")]
    EmptyStratum(String),
    #[error("not identifiable: {0}")]
    NotIdentifiable(String),
    #[error("positivity violated: {0}")]
    Positivity(String),
    #[error("{discarded} of {total} bootstrap replicates were degenerate (limit 20%)")]
    TooManyDegenerateReplicates { discarded: usize, total: usize },
    #[error("invalid query: {0}")]
    InvalidQuery(String),

    // checks
    #[error("conditional independence test needs all-categorical or all-numeric columns: {0}")]
    MixedType(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("dataset columns do not match the graph: {0}")]
    ColumnGraphMismatch(String),
    #[error("no numeric child with parents to test")]
    NoNumericChild,

    // scenarios
    #[error("parameter `{name}` = {value} is out of range: {reason}")]
    ParameterRange {
        name: String,
        value: f64,
        reason: String,
    },

    // input
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("semantic error at {line}:{col}: {message}")]
    Semantic {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("dataset schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("row {row}, column `{column}`: value `{value}` is outside the declared domain")]
    DataDomain {
        row: usize,
        column: String,
        value: String,
    },
    #[error("dataset has no rows")]
    EmptyFile,
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn invalid_model(msg: impl Into<String>) -> Self {
        Error::InvalidModel(msg.into())
    }
}
