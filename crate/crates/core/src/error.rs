use thiserror::Error;

use crate::model::ModelReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty query")]
    EmptyInput,

    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown atom `{name}` at byte {offset}")]
    UnknownAtom { name: String, offset: usize },

    #[error("ambiguous atom `{name}` at byte {offset}: matches {candidates:?}")]
    AmbiguousAtom {
        name: String,
        offset: usize,
        candidates: Vec<String>,
    },

    #[error("atom #{0} is not assigned by the world")]
    UnassignedAtom(usize),

    #[error("{what} cap exceeded: {requested} > {cap}")]
    CapExceeded {
        what: &'static str,
        requested: u128,
        cap: u128,
    },

    #[error("invalid model: {0}")]
    InvalidModel(ModelReport),

    #[error("model cannot host the requested query: {0}")]
    UnsupportedQuery(String),

    #[error("formula is unsatisfiable under the model")]
    Unsatisfiable,

    #[error("circuit cannot represent {0}")]
    NotRepresentable(&'static str),

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("negation of a subformula with posterior 1 (singular score weight)")]
    SingularNegation,

    #[error("OR-ME children have total posterior {total} > 1")]
    InconsistentExclusive { total: f64 },

    #[error("disjunction of two zero-probability subformulas")]
    ZeroDisjunction,

    #[error("AND-CI kernel undefined: unconditional kernel is zero at state {state} where children are positive")]
    KernelDivision { state: usize },

    #[error("transition row has negative mass {mass} at state {state}")]
    NegativeMass { state: usize, mass: f64 },

    #[error("transition row sums to zero")]
    ZeroRow,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("time {0} outside the admissible range")]
    InvalidTime(f64),

    #[error("event is empty under the model")]
    EmptyEvent,

    #[error("group of atom #{0} has a single value; no competitor exists")]
    SingletonGroup(usize),

    #[error("class weights sum to {0}, expected 1")]
    WeightSum(f64),

    #[error("non-finite state at step {step}")]
    Divergence { step: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable identifier used in machine-readable CLI output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyInput => "empty_input",
            Error::Syntax { .. } => "syntax",
            Error::UnknownAtom { .. } => "unknown_atom",
            Error::AmbiguousAtom { .. } => "ambiguous_atom",
            Error::UnassignedAtom(_) => "unassigned_atom",
            Error::CapExceeded { .. } => "cap_exceeded",
            Error::InvalidModel(_) => "invalid_model",
            Error::UnsupportedQuery(_) => "unsupported_query",
            Error::Unsatisfiable => "unsatisfiable",
            Error::NotRepresentable(_) => "not_representable",
            Error::InvalidCircuit(_) => "invalid_circuit",
            Error::SingularNegation => "singular_negation",
            Error::InconsistentExclusive { .. } => "inconsistent_exclusive",
            Error::ZeroDisjunction => "zero_disjunction",
            Error::KernelDivision { .. } => "kernel_division",
            Error::NegativeMass { .. } => "negative_mass",
            Error::ZeroRow => "zero_row",
            Error::InvalidInput(_) => "invalid_input",
            Error::InvalidTime(_) => "invalid_time",
            Error::EmptyEvent => "empty_event",
            Error::SingletonGroup(_) => "singleton_group",
            Error::WeightSum(_) => "weight_sum",
            Error::Divergence { .. } => "divergence",
            Error::EmptyBatch => "empty_batch",
            Error::VerificationFailed(_) => "verification_failed",
            Error::Csv(_) => "csv",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
