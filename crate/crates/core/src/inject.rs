//! Synthetic outlier injection.
//!
//! To plant `⌊qN⌋` labeled outliers in an `N`-row dataset, the target
//! attribute is first rescaled to a fixed range (default `(18, 30)`), then
//! `⌊qN⌋` source rows are drawn uniformly without replacement and a copy of
//! each is appended with `U(0, α)` added to its target value. Originals are
//! never mutated and carry truth label 0; appended rows carry 1. The whole
//! procedure is reproducible from the seed.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Which side of the correlation the perturbation targets. The mechanics are
/// identical; the mode records whether the perturbed attribute plays the
/// behavior or the context role downstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbMode {
    Behavioral,
    Contextual,
}

/// Injection parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionSpec {
    /// Outlier fraction of the original row count.
    pub q: f64,
    /// Noise upper bound; added noise is strictly inside `(0, alpha)`.
    pub alpha: f64,
    /// Attribute to perturb.
    pub target: String,
    pub mode: PerturbMode,
    /// Rescale the target to this range before injection; `None` skips it.
    pub standardize_range: Option<(f64, f64)>,
    pub seed: u64,
}

impl InjectionSpec {
    /// Standard defaults: `α = 50`, behavioral mode, standardize to (18, 30).
    pub fn behavioral(target: &str, q: f64, seed: u64) -> Self {
        Self {
            q,
            alpha: 50.0,
            target: target.to_string(),
            mode: PerturbMode::Behavioral,
            standardize_range: Some((18.0, 30.0)),
            seed,
        }
    }

    pub fn contextual(target: &str, q: f64, seed: u64) -> Self {
        Self {
            mode: PerturbMode::Contextual,
            ..Self::behavioral(target, q, seed)
        }
    }

    fn validate(&self) -> Result<()> {
        let range_ok = match self.standardize_range {
            Some((lo, hi)) => lo < hi,
            None => true,
        };
        let alpha_ok = self.alpha.is_finite() && self.alpha > 0.0;
        if !(0.0..=1.0).contains(&self.q) || !alpha_ok || !range_ok {
            return Err(Error::ConfigInvalid {
                reason: format!(
                    "injection spec: q={}, alpha={}, range={:?}",
                    self.q, self.alpha, self.standardize_range
                ),
            });
        }
        Ok(())
    }
}

/// An injected dataset with its ground-truth labels and the source row of
/// every appended outlier.
#[derive(Debug, Clone)]
pub struct InjectedDataset {
    pub dataset: Dataset,
    /// One label per row: originals 0, appended outliers 1.
    pub truth: Vec<bool>,
    /// Injected record id → source record id.
    pub provenance: BTreeMap<usize, usize>,
}

/// Affine rescale: min → `lo`, max → `hi`.
pub fn standardize(column: &[f64], lo: f64, hi: f64) -> Result<Vec<f64>> {
    let min = column.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = column.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if column.is_empty() || min == max {
        return Err(Error::ConstantColumn {
            name: String::new(),
        });
    }
    let scale = (hi - lo) / (max - min);
    Ok(column.iter().map(|v| lo + (v - min) * scale).collect())
}

// Strictly inside (0, alpha): half-open sampling with rejection of the
// closed endpoint.
fn open_uniform(rng: &mut impl Rng, alpha: f64) -> f64 {
    loop {
        let u: f64 = rng.gen_range(0.0..alpha);
        if u > 0.0 {
            return u;
        }
    }
}

/// Append `⌊qN⌋` perturbed copies of uniformly chosen source rows.
pub fn inject(dataset: &Dataset, spec: &InjectionSpec) -> Result<InjectedDataset> {
    spec.validate()?;
    let target_idx = dataset.attr_index(&spec.target)?;
    let n = dataset.len();
    let n_inject = (spec.q * n as f64).floor() as usize;

    if n_inject == 0 {
        if spec.q > 0.0 {
            log::warn!(
                "q = {} over {n} rows injects no outliers; returning the dataset unchanged",
                spec.q
            );
        }
        return Ok(InjectedDataset {
            dataset: dataset.clone(),
            truth: vec![false; n],
            provenance: BTreeMap::new(),
        });
    }

    let mut rows: Vec<Vec<f64>> = dataset.records().iter().map(|r| r.values.clone()).collect();
    if let Some((lo, hi)) = spec.standardize_range {
        let rescaled = standardize(&dataset.column(&spec.target)?, lo, hi).map_err(|_| {
            Error::ConstantColumn {
                name: spec.target.clone(),
            }
        })?;
        for (row, v) in rows.iter_mut().zip(rescaled) {
            row[target_idx] = v;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut chosen = rand::seq::index::sample(&mut rng, n, n_inject).into_vec();
    chosen.sort_unstable();

    let mut truth = vec![false; n];
    let mut provenance = BTreeMap::new();
    for (j, &src) in chosen.iter().enumerate() {
        let mut copy = rows[src].clone();
        copy[target_idx] += open_uniform(&mut rng, spec.alpha);
        rows.push(copy);
        truth.push(true);
        provenance.insert(n + j, src);
    }

    let schema = dataset.schema().to_vec();
    Ok(InjectedDataset {
        dataset: Dataset::from_rows(schema, rows)?,
        truth,
        provenance,
    })
}

/// Contextual attribute with the highest absolute Pearson correlation to the
/// behavior column; ties break toward the lower schema index. Constant
/// candidates are skipped.
pub fn pick_contextual_target(dataset: &Dataset, behavior: &str) -> Result<String> {
    let y = dataset.column(behavior)?;
    let n = y.len() as f64;
    if dataset.width() < 2 {
        return Err(Error::NoUsableContext);
    }
    let y_mean = y.iter().sum::<f64>() / n;
    let y_var: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();

    let mut best: Option<(f64, String)> = None;
    for name in dataset.schema() {
        if name == behavior {
            continue;
        }
        let x = dataset.column(name)?;
        let x_mean = x.iter().sum::<f64>() / n;
        let x_var: f64 = x.iter().map(|v| (v - x_mean).powi(2)).sum();
        if x_var == 0.0 || y_var == 0.0 {
            continue;
        }
        let cov: f64 = x
            .iter()
            .zip(&y)
            .map(|(xi, yi)| (xi - x_mean) * (yi - y_mean))
            .sum();
        let rho = (cov / (x_var * y_var).sqrt()).abs();
        if best.as_ref().is_none_or(|(b, _)| rho > *b) {
            best = Some((rho, name.clone()));
        }
    }
    best.map(|(_, name)| name).ok_or(Error::NoUsableContext)
}
