//! Error type shared by every module in the crate.
//!
//! Display strings are prefixed with a stable error name so callers (and the
//! CLI, which forwards them to stderr) can match on them without downcasting.

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input document violates the JSON schema or a declared field invariant.
    #[error("SchemaError: {0}")]
    Schema(String),

    /// The operator dependency relation contains a cycle.
    #[error("CycleError: {0}")]
    Cycle(String),

    /// Block structure is invalid (back-edge between blocks, size cap,
    /// missing or duplicated membership).
    #[error("BlockError: {0}")]
    Block(String),

    /// A referenced id does not exist.
    #[error("DanglingRefError: {0}")]
    DanglingRef(String),

    /// Table cost model has no entry for an operator and no fallback.
    #[error("MissingEntryError: {0}")]
    MissingEntry(String),

    /// Merge constructed on operators that fail the legality check.
    #[error("IllegalMergeError: {0}")]
    IllegalMerge(String),

    /// Pruning left some state with no admissible ending.
    #[error("InfeasibleError: {0}")]
    Infeasible(String),

    /// Instance exceeds a hard enumeration guard.
    #[error("TooLargeError: {0}")]
    TooLarge(String),

    /// A schedule does not match the graph it is evaluated against.
    #[error("MismatchError: {0}")]
    Mismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
