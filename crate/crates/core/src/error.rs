//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Coarse classification used by callers that need to map errors onto
/// process exit codes (config vs numeric vs i/o).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numeric,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },

    #[error("row {row}: cell {column:?} = {value:?} is not a finite number")]
    BadCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("no usable records after load")]
    NoUsableRecords,

    #[error("unknown attribute {name:?}")]
    UnknownAttribute { name: String },

    #[error("invalid template: {reason}")]
    TemplateInvalid { reason: String },

    #[error("invalid configuration: {reason}")]
    ConfigInvalid { reason: String },

    #[error("template excluded every row of the dataset")]
    AllRowsExcluded,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{what} is empty")]
    EmptyInput { what: &'static str },

    #[error("all records treated as outliers at iteration {iteration}; model degenerate")]
    AllOutlierDegenerate { iteration: usize },

    #[error("non-finite parameter at iteration {iteration}: {detail}")]
    NonFiniteParameter { iteration: usize, detail: String },

    #[error("design has {got} rows but needs at least {needed}")]
    InsufficientRows { needed: usize, got: usize },

    #[error("normal matrix is singular and ridge fallback failed")]
    SingularSystem,

    #[error("ratio statistic has zero variance")]
    ZeroVariance,

    #[error("column {name:?} is constant; cannot standardize")]
    ConstantColumn { name: String },

    #[error("no usable contextual attribute (all candidates constant)")]
    NoUsableContext,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("kappa {kappa} out of range 1..={n}")]
    KappaOutOfRange { kappa: usize, n: usize },

    #[error("truth labels contain no positives; AUC-PR undefined")]
    NoPositives,

    #[error("invalid labeled set: {reason}")]
    InvalidSet { reason: String },

    #[error("score/truth id mismatch: {detail}")]
    IdMismatch { detail: String },

    #[error("filter {name:?}: {source}")]
    InFilter { name: String, source: Box<Error> },
}

impl Error {
    /// Map the error onto the exit-code classes used by the CLI.
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            Io { .. } | Csv { .. } => ErrorClass::Io,
            BadCell { .. }
            | NoUsableRecords
            | UnknownAttribute { .. }
            | TemplateInvalid { .. }
            | ConfigInvalid { .. }
            | KappaOutOfRange { .. }
            | InvalidSet { .. }
            | IdMismatch { .. }
            | EmptyInput { .. } => ErrorClass::Config,
            AllRowsExcluded
            | DimensionMismatch { .. }
            | AllOutlierDegenerate { .. }
            | NonFiniteParameter { .. }
            | InsufficientRows { .. }
            | SingularSystem
            | ZeroVariance
            | ConstantColumn { .. }
            | NoUsableContext
            | LengthMismatch { .. }
            | NoPositives => ErrorClass::Numeric,
            InFilter { source, .. } => source.class(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
