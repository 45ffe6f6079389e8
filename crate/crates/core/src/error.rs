use thiserror::Error;

/// Everything that can go wrong inside the crate.
///
/// Variants are grouped by the stage that raises them: expression handling,
/// data validation, model fitting, the samplers, and simulation. The CLI
/// decides which of these are usage errors and which are runtime failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {input:?} at byte {position}: {reason}")]
    Parse {
        input: String,
        position: usize,
        reason: String,
    },

    #[error("leaf index X{index} out of range for data with {columns} columns")]
    LeafOutOfRange { index: usize, columns: usize },

    #[error("truth-table comparison over {got} distinct leaves exceeds the limit of {max}")]
    TooManyLeaves { got: usize, max: usize },

    #[error("matrix entries must be 0 or 1, found {value} at row {row}, column {column}")]
    NotBinary {
        row: usize,
        column: usize,
        value: f64,
    },

    #[error("shape mismatch: {what}")]
    ShapeMismatch { what: String },

    #[error("invalid configuration: {what}")]
    Config { what: String },

    #[error("population invariant violated: {what}")]
    Population { what: String },

    #[error("cannot fit {parameters} parameters to {observations} observations")]
    Underdetermined {
        parameters: usize,
        observations: usize,
    },

    #[error("unknown column {name:?}")]
    UnknownColumn { name: String },

    #[error("no admissible candidate tree found after {attempts} attempts")]
    NoCandidate { attempts: usize },

    #[error("registry is empty; nothing to normalize")]
    EmptyRegistry,

    #[error("chain trace is empty")]
    EmptyTrace,

    #[error("no chain results to aggregate")]
    NoChains,

    #[error(
        "model record for {key} carries no coefficients; rerun with coefficient retention enabled"
    )]
    MissingCoefficients { key: String },

    #[error(
        "correlation matrix is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})"
    )]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("scenario needs at least {required} covariate columns, data has {got}")]
    InsufficientColumns { required: usize, got: usize },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
