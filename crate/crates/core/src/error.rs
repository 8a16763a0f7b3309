use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },

    #[error("line {line}: malformed clause: {reason}")]
    MalformedClause { line: usize, reason: String },

    #[error("variable index {index} outside 1..={n_vars}")]
    IndexOutOfRange { index: usize, n_vars: usize },

    #[error("clause {clause:?} repeats a variable index")]
    RepeatedIndex { clause: [usize; 3] },

    #[error("header declares {declared} clauses but {found} were found")]
    ClauseCountMismatch { declared: usize, found: usize },

    #[error("malformed assignment: {0}")]
    MalformedAssignment(String),

    #[error("cannot draw {n_clauses} distinct clauses over {n_vars} variables ({available} triples exist)")]
    InfeasibleGeneration {
        n_vars: usize,
        n_clauses: usize,
        available: u64,
    },

    #[error("instance has {n_vars} variables; the exhaustive oracle is capped at {cap}")]
    OracleCapExceeded { n_vars: usize, cap: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("start point must lie strictly inside the unit hypercube (coordinate {index} = {value})")]
    StartOutsideHypercube { index: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("trajectory: {0}")]
    Trajectory(String),
}
