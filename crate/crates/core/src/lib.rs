//! Contextual outlier detection over correlated measures.
//!
//! Domain experts declare correlation templates — "this behavioral attribute
//! should be predictable from these contextual attributes" — and each
//! template becomes a filter: a linear model whose noise is an explicit
//! Gaussian/Cauchy mixture, fitted by EM so that coefficients and per-record
//! outlier probabilities are learned simultaneously. Filters flag their
//! top-`⌊Σ t_i⌋` records; a detector combines several filters by OR-ing
//! flags and averaging scores. Classical baselines (OLS with Cook's
//! distance, a Gaussian ratio statistic), a synthetic-outlier injection
//! scheme, and ranking metrics (precision@κ, AUC of the precision-recall
//! curve) round out an evaluation pipeline.

pub mod baselines;
pub mod dataset;
pub mod detector;
pub mod em;
pub mod error;
pub mod inject;
pub mod metrics;
pub mod scores;
pub mod templates;

pub use dataset::{load_csv, Dataset, LoadOptions, NaPolicy, Record};
pub use em::{EMSettings, FilterFit, FilterParams};
pub use error::{Error, ErrorClass, Result};
pub use templates::{
    compile, describe, CorrelationTemplate, DesignMatrix, TemplateEntry, Transform,
};
