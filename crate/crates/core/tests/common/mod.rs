//! Shared fixtures for integration and acceptance tests.
#![allow(dead_code)] // each test binary uses a different subset

use corrfilter::dataset::Dataset;
use corrfilter::inject::InjectedDataset;
use corrfilter::metrics::{auc_pr, RankedScores};
use corrfilter::templates::{compile, CorrelationTemplate, TemplateEntry};
use corrfilter::{baselines, em, EMSettings};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

/// Linear benchmark data: `x1 ~ U(18,30)`, `x2 ~ U(-2,2)`,
/// `y = 1.0·x1 + 0.5·x2 + N(0, noise_sd²)`. The contexts sit on scales
/// comparable to the target so the default first-coefficient-one
/// initialization starts with moderate residuals.
pub fn gen_linear(n: usize, noise_sd: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sd).unwrap();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let x1 = rng.gen_range(18.0..30.0);
            let x2 = rng.gen_range(-2.0..2.0);
            let y = 1.0 * x1 + 0.5 * x2 + noise.sample(&mut rng);
            vec![x1, x2, y]
        })
        .collect();
    Dataset::from_rows(
        vec!["x1".to_string(), "x2".to_string(), "y".to_string()],
        rows,
    )
    .unwrap()
}

/// The benchmark template: y ~ x1 + x2 + intercept.
pub fn linear_template() -> CorrelationTemplate {
    CorrelationTemplate::new(
        TemplateEntry::identity("y"),
        vec![TemplateEntry::identity("x1"), TemplateEntry::identity("x2")],
    )
}

fn ranked(injected: &InjectedDataset, ids: &[usize], scores: &[f64]) -> RankedScores {
    let entries: Vec<(usize, f64, bool)> = ids
        .iter()
        .zip(scores)
        .map(|(&id, &s)| (id, s, injected.truth[id]))
        .collect();
    assert_eq!(
        entries.len(),
        injected.dataset.len(),
        "detector must score every record"
    );
    RankedScores::new(entries)
}

/// AUC-PR of the EM filter's scores on an injected dataset.
pub fn em_auc(injected: &InjectedDataset, settings: &EMSettings) -> f64 {
    let (design, excluded) = compile(&linear_template(), &injected.dataset).unwrap();
    assert!(excluded.is_empty());
    let fit = em::fit(&design, settings).unwrap();
    auc_pr(&ranked(injected, design.row_ids(), &fit.t)).unwrap()
}

/// AUC-PR of the OLS/Cook's-distance baseline on an injected dataset.
pub fn ols_auc(injected: &InjectedDataset) -> f64 {
    let (design, excluded) = compile(&linear_template(), &injected.dataset).unwrap();
    assert!(excluded.is_empty());
    let res = baselines::cooks_distance(&design).unwrap();
    auc_pr(&ranked(injected, design.row_ids(), &res.d)).unwrap()
}
