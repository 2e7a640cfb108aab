use thiserror::Error;

use crate::network::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. Validation findings are carried as data
/// (see [`ValidationReport`]); variants here are hard failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("json syntax error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("unknown state `{state}` for variable `{variable}`")]
    UnknownState { variable: String, state: String },

    #[error("malformed CPT for `{child}`: {detail}")]
    MalformedCpt { child: String, detail: String },

    #[error("network failed validation:\n{0}")]
    Invalid(ValidationReport),

    #[error("distributions live on different spaces ({left} vs {right} states)")]
    MismatchedSpaces { left: usize, right: usize },

    #[error("empty CDF family")]
    EmptyFamily,

    #[error("probabilities sum to {sum}, not 1")]
    NonNormalized { sum: f64 },

    #[error("`{variable}` is not a parent in this CPT")]
    NotAParent { variable: String },

    #[error("evidence has zero probability")]
    ZeroProbabilityEvidence,

    #[error("query variable `{0}` is assigned in the evidence")]
    QueryAssigned(String),

    #[error("joint state space has {size} entries, over the cap of {cap}")]
    JointTooLarge { size: usize, cap: usize },

    #[error("ambiguous sign has no strengthen/weaken direction")]
    AmbiguousSign,

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid abstraction plan: {0}")]
    InvalidPlan(String),

    #[error("lower/upper CDFs do not bracket (lower must lie pointwise below upper)")]
    NonBracketing,

    #[error("value assignment must be nondecreasing in state order")]
    DecreasingValues,

    #[error("utility is not supermodular: u(d{d1},x{x2}) + u(d{d2},x{x1}) > u(d{d1},x{x1}) + u(d{d2},x{x2})")]
    NotSupermodular {
        d1: usize,
        d2: usize,
        x1: usize,
        x2: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
