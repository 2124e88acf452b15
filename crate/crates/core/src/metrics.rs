//! Ranking and confusion-matrix metrics over detector scores.
//!
//! Detectors rank records by score; with ground-truth labels this module
//! computes the confusion ratios (DR, FPR, Precision, TNR), precision@κ,
//! the precision-recall curve, and its area in average-precision form. A
//! separate estimator extrapolates population-level confusion ratios from
//! partially labeled partitions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scores joined with truth labels, in ranking order: descending score,
/// ties by ascending id, so the order is a strict total order.
#[derive(Debug, Clone)]
pub struct RankedScores {
    ids: Vec<usize>,
    scores: Vec<f64>,
    truth: Vec<bool>,
}

impl RankedScores {
    /// Rank `(id, score, truth)` triples.
    pub fn new(mut entries: Vec<(usize, f64, bool)>) -> Self {
        entries.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        Self {
            ids: entries.iter().map(|e| e.0).collect(),
            scores: entries.iter().map(|e| e.1).collect(),
            truth: entries.iter().map(|e| e.2).collect(),
        }
    }

    /// Join scores against truth labels by id; both sides must cover exactly
    /// the same ids.
    pub fn join(scores: &[(usize, f64)], truth: &[(usize, bool)]) -> Result<Self> {
        let lookup: std::collections::HashMap<usize, bool> = truth.iter().cloned().collect();
        if lookup.len() != truth.len() {
            return Err(Error::IdMismatch {
                detail: "duplicate ids in truth".to_string(),
            });
        }
        if scores.len() != lookup.len() {
            return Err(Error::IdMismatch {
                detail: format!(
                    "{} scored records vs {} truth labels",
                    scores.len(),
                    lookup.len()
                ),
            });
        }
        let mut entries = Vec::with_capacity(scores.len());
        let mut seen = std::collections::HashSet::with_capacity(scores.len());
        for &(id, score) in scores {
            if !seen.insert(id) {
                return Err(Error::IdMismatch {
                    detail: format!("duplicate id {id} in scores"),
                });
            }
            match lookup.get(&id) {
                Some(&t) => entries.push((id, score, t)),
                None => {
                    return Err(Error::IdMismatch {
                        detail: format!("id {id} has a score but no truth label"),
                    })
                }
            }
        }
        Ok(Self::new(entries))
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn truth(&self) -> &[bool] {
        &self.truth
    }

    pub fn positives(&self) -> usize {
        self.truth.iter().filter(|t| **t).count()
    }
}

/// Confusion-matrix cell counts. Serialized with the conventional short
/// names (`tp`, `fp`, `fn`, `tn`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    #[serde(rename = "tp")]
    pub true_pos: u64,
    #[serde(rename = "fp")]
    pub false_pos: u64,
    #[serde(rename = "fn")]
    pub false_neg: u64,
    #[serde(rename = "tn")]
    pub true_neg: u64,
}

/// The four confusion ratios; a ratio with a zero denominator is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionRates {
    /// Detection rate TP/(TP+FN).
    pub dr: Option<f64>,
    /// False positive rate FP/(FP+TN).
    pub fpr: Option<f64>,
    /// Precision TP/(TP+FP).
    pub precision: Option<f64>,
    /// True negative rate TN/(TN+FP).
    pub tnr: Option<f64>,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

fn rates_from(tp: f64, fp: f64, fn_: f64, tn: f64) -> ConfusionRates {
    ConfusionRates {
        dr: ratio(tp, tp + fn_),
        fpr: ratio(fp, fp + tn),
        precision: ratio(tp, tp + fp),
        tnr: ratio(tn, tn + fp),
    }
}

/// Count the confusion cells of binary flags against truth and derive the
/// four ratios.
pub fn confusion(flags: &[bool], truth: &[bool]) -> Result<(ConfusionCounts, ConfusionRates)> {
    if flags.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: flags.len(),
            right: truth.len(),
        });
    }
    let mut c = ConfusionCounts {
        true_pos: 0,
        false_pos: 0,
        false_neg: 0,
        true_neg: 0,
    };
    for (&f, &t) in flags.iter().zip(truth) {
        match (f, t) {
            (true, true) => c.true_pos += 1,
            (true, false) => c.false_pos += 1,
            (false, true) => c.false_neg += 1,
            (false, false) => c.true_neg += 1,
        }
    }
    let rates = rates_from(
        c.true_pos as f64,
        c.false_pos as f64,
        c.false_neg as f64,
        c.true_neg as f64,
    );
    Ok((c, rates))
}

/// Fraction of true outliers among the κ top-ranked records.
pub fn precision_at_k(ranked: &RankedScores, kappa: usize) -> Result<f64> {
    if kappa == 0 || kappa > ranked.len() {
        return Err(Error::KappaOutOfRange {
            kappa,
            n: ranked.len(),
        });
    }
    let hits = ranked.truth[..kappa].iter().filter(|t| **t).count();
    Ok(hits as f64 / kappa as f64)
}

/// Area under the precision-recall curve in average-precision form: the
/// mean, over positives, of the precision at each positive's rank.
pub fn auc_pr(ranked: &RankedScores) -> Result<f64> {
    let positives = ranked.positives();
    if positives == 0 {
        return Err(Error::NoPositives);
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank0, &t) in ranked.truth.iter().enumerate() {
        if t {
            hits += 1;
            sum += hits as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(sum / positives as f64)
}

/// One point of the precision-recall curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub kappa: usize,
    pub precision: f64,
    pub recall: f64,
}

/// The full curve at κ = 1..n.
pub fn pr_curve(ranked: &RankedScores) -> Result<Vec<PrPoint>> {
    let positives = ranked.positives();
    if positives == 0 {
        return Err(Error::NoPositives);
    }
    let mut hits = 0usize;
    Ok(ranked
        .truth
        .iter()
        .enumerate()
        .map(|(rank0, &t)| {
            if t {
                hits += 1;
            }
            PrPoint {
                kappa: rank0 + 1,
                precision: hits as f64 / (rank0 + 1) as f64,
                recall: hits as f64 / positives as f64,
            }
        })
        .collect())
}

/// One partially labeled partition of a dataset: `size` records of which
/// `labeled` were human-labeled and a fraction `outlier_fraction` of those
/// turned out to be outliers. `flagged` records whether the detector under
/// evaluation marks this partition's records as outliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledSet {
    pub size: f64,
    pub labeled: u64,
    pub outlier_fraction: f64,
    pub flagged: bool,
}

/// Population-level extrapolation from labeled samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationEstimate {
    /// `size × outlier_fraction` per set.
    pub per_set_outliers: Vec<f64>,
    pub true_pos: f64,
    pub false_pos: f64,
    pub false_neg: f64,
    pub true_neg: f64,
    pub rates: ConfusionRates,
}

/// Extrapolate confusion ratios for a detector from labeled partitions.
pub fn estimate_population(sets: &[LabeledSet]) -> Result<PopulationEstimate> {
    if sets.is_empty() {
        return Err(Error::EmptyInput {
            what: "labeled sets",
        });
    }
    for (i, s) in sets.iter().enumerate() {
        if !(0.0..=1.0).contains(&s.outlier_fraction) || s.size < 0.0 {
            return Err(Error::InvalidSet {
                reason: format!("set {i}: size={}, phi={}", s.size, s.outlier_fraction),
            });
        }
        if s.labeled as f64 > s.size {
            return Err(Error::InvalidSet {
                reason: format!("set {i}: labeled {} exceeds size {}", s.labeled, s.size),
            });
        }
        if s.size > 0.0 && s.labeled == 0 {
            return Err(Error::InvalidSet {
                reason: format!("set {i}: nonempty but has no labeled records"),
            });
        }
    }

    let per_set_outliers: Vec<f64> = sets.iter().map(|s| s.size * s.outlier_fraction).collect();
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut fn_ = 0.0;
    let mut tn = 0.0;
    for (s, &outliers) in sets.iter().zip(&per_set_outliers) {
        let normals = s.size - outliers;
        if s.flagged {
            tp += outliers;
            fp += normals;
        } else {
            fn_ += outliers;
            tn += normals;
        }
    }
    Ok(PopulationEstimate {
        per_set_outliers,
        true_pos: tp,
        false_pos: fp,
        false_neg: fn_,
        true_neg: tn,
        rates: rates_from(tp, fp, fn_, tn),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ranked(scores: Vec<f64>, truth: Vec<bool>) -> RankedScores {
        let entries = scores
            .into_iter()
            .zip(truth)
            .enumerate()
            .map(|(id, (s, t))| (id, s, t))
            .collect();
        RankedScores::new(entries)
    }

    #[test]
    fn confusion_hand_counts() {
        let (c, r) = confusion(&[true, true, false, false], &[true, false, true, false]).unwrap();
        assert_eq!(
            (c.true_pos, c.false_pos, c.false_neg, c.true_neg),
            (1, 1, 1, 1)
        );
        assert_eq!(r.dr, Some(0.5));
        assert_eq!(r.fpr, Some(0.5));
        assert_eq!(r.precision, Some(0.5));
        assert_eq!(r.tnr, Some(0.5));
    }

    #[test]
    fn perfect_detector_rates() {
        let truth = [true, false, true, false];
        let (_, r) = confusion(&truth, &truth).unwrap();
        assert_eq!(r.dr, Some(1.0));
        assert_eq!(r.fpr, Some(0.0));
        assert_eq!(r.precision, Some(1.0));
        assert_eq!(r.tnr, Some(1.0));
    }

    #[test]
    fn all_negative_detector_has_undefined_precision() {
        let (_, r) = confusion(&[false, false], &[true, false]).unwrap();
        assert_eq!(r.dr, Some(0.0));
        assert_eq!(r.precision, None);
    }

    #[test]
    fn precision_at_k_examples() {
        let r = ranked(vec![0.9, 0.8, 0.7, 0.6], vec![true, true, true, false]);
        assert_eq!(precision_at_k(&r, 3).unwrap(), 1.0);
        assert_eq!(precision_at_k(&r, 4).unwrap(), 0.75);
        assert!(matches!(
            precision_at_k(&r, 0),
            Err(Error::KappaOutOfRange { .. })
        ));
        assert!(matches!(
            precision_at_k(&r, 5),
            Err(Error::KappaOutOfRange { .. })
        ));
    }

    #[test]
    fn precision_curve_matches_quadratic_rescan() {
        let scores = vec![0.1, 0.9, 0.5, 0.7, 0.3, 0.9, 0.2, 0.8];
        let truth = vec![false, true, false, true, true, false, false, true];
        let r = ranked(scores, truth);
        for kappa in 1..=r.len() {
            // brute-force rescan: sort a fresh copy, count hits in the prefix
            let mut order: Vec<usize> = (0..r.len()).collect();
            order.sort_by(|&a, &b| {
                r.scores()[a]
                    .partial_cmp(&r.scores()[b])
                    .unwrap()
                    .reverse()
                    .then(r.ids()[a].cmp(&r.ids()[b]))
            });
            let hits = order[..kappa].iter().filter(|&&i| r.truth()[i]).count();
            assert_eq!(
                precision_at_k(&r, kappa).unwrap(),
                hits as f64 / kappa as f64
            );
        }
    }

    #[test]
    fn auc_examples() {
        // All positives ranked first.
        let r = ranked(vec![0.9, 0.8, 0.1, 0.0], vec![true, true, false, false]);
        assert_eq!(auc_pr(&r).unwrap(), 1.0);

        // Single positive ranked last among n.
        let n = 10;
        let mut scores: Vec<f64> = (0..n).map(|i| 1.0 - i as f64 / n as f64).collect();
        let mut truth = vec![false; n];
        truth[n - 1] = true;
        scores[n - 1] = -1.0;
        let r = ranked(scores, truth);
        assert!((auc_pr(&r).unwrap() - 1.0 / n as f64).abs() < 1e-15);

        let no_pos = ranked(vec![0.4, 0.2], vec![false, false]);
        assert!(matches!(auc_pr(&no_pos), Err(Error::NoPositives)));
    }

    #[test]
    fn random_scores_auc_near_prevalence() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let n = 1000;
        let mut aucs = Vec::new();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scores: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let truth: Vec<bool> = (0..n).map(|_| rng.gen::<f64>() < 0.05).collect();
            if truth.iter().any(|t| *t) {
                aucs.push(auc_pr(&ranked(scores, truth)).unwrap());
            }
        }
        let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
        assert!((mean - 0.05).abs() < 0.03, "mean AUC = {mean}");
    }

    #[test]
    fn ties_break_by_ascending_id() {
        let r = ranked(vec![0.5, 0.5, 0.9], vec![false, true, false]);
        assert_eq!(r.ids(), &[2, 0, 1]);
    }

    #[test]
    fn join_rejects_id_mismatch() {
        let scores = vec![(0, 0.5), (1, 0.2)];
        let truth = vec![(0, true)];
        assert!(matches!(
            RankedScores::join(&scores, &truth),
            Err(Error::IdMismatch { .. })
        ));
        let truth = vec![(0, true), (2, false)];
        assert!(matches!(
            RankedScores::join(&scores, &truth),
            Err(Error::IdMismatch { .. })
        ));
    }

    #[test]
    fn population_estimate_reproduces_partition_arithmetic() {
        // Four partitions in the style of a two-detector comparison (set
        // fractions 6.6%, 0.093%, 0.416%, 90.27% of a million records), with
        // the detector under evaluation flagging the first and third sets.
        let sets = [
            LabeledSet {
                size: 66_000.0,
                labeled: 1739,
                outlier_fraction: 0.92,
                flagged: true,
            },
            LabeledSet {
                size: 930.0,
                labeled: 930,
                outlier_fraction: 0.16,
                flagged: false,
            },
            LabeledSet {
                size: 4_160.0,
                labeled: 1570,
                outlier_fraction: 0.98,
                flagged: true,
            },
            LabeledSet {
                size: 902_700.0,
                labeled: 1510,
                outlier_fraction: 0.06,
                flagged: false,
            },
        ];
        let est = estimate_population(&sets).unwrap();
        assert!((est.per_set_outliers[0] - 66_000.0 * 0.92).abs() < 1e-9);
        let rates = est.rates;
        assert!((rates.dr.unwrap() - 0.55).abs() < 0.01);
        assert!((rates.precision.unwrap() - 0.924).abs() < 0.001);
        assert!((rates.fpr.unwrap() - 0.006).abs() < 0.001);
        assert!((rates.tnr.unwrap() - 0.99).abs() < 0.005);
    }

    #[test]
    fn population_estimate_examples_and_errors() {
        let one = [LabeledSet {
            size: 100.0,
            labeled: 50,
            outlier_fraction: 0.92,
            flagged: true,
        }];
        let est = estimate_population(&one).unwrap();
        assert!((est.per_set_outliers[0] - 92.0).abs() < 1e-12);

        let zero_phi = [LabeledSet {
            size: 100.0,
            labeled: 50,
            outlier_fraction: 0.0,
            flagged: true,
        }];
        assert_eq!(
            estimate_population(&zero_phi).unwrap().per_set_outliers[0],
            0.0
        );

        let unlabeled = [LabeledSet {
            size: 10.0,
            labeled: 0,
            outlier_fraction: 0.5,
            flagged: true,
        }];
        assert!(matches!(
            estimate_population(&unlabeled),
            Err(Error::InvalidSet { .. })
        ));
    }

    proptest! {
        // precision@n equals overall positive prevalence.
        #[test]
        fn precision_at_n_is_prevalence(truth in proptest::collection::vec(any::<bool>(), 1..100)) {
            let scores: Vec<f64> = (0..truth.len()).map(|i| i as f64).collect();
            let n = truth.len();
            let positives = truth.iter().filter(|t| **t).count();
            let r = ranked(scores, truth);
            prop_assert!((precision_at_k(&r, n).unwrap() - positives as f64 / n as f64).abs() < 1e-15);
        }

        // AUC-PR is invariant under strictly monotone score transforms.
        #[test]
        fn auc_invariant_under_monotone_transform(
            pairs in proptest::collection::vec((0.0f64..1.0, any::<bool>()), 2..80)
        ) {
            prop_assume!(pairs.iter().any(|p| p.1));
            let (scores, truth): (Vec<f64>, Vec<bool>) = pairs.into_iter().unzip();
            let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s + 1.0).exp()).collect();
            let a = auc_pr(&ranked(scores, truth.clone())).unwrap();
            let b = auc_pr(&ranked(transformed, truth)).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        // The curve's last point has recall 1 and precision = prevalence.
        #[test]
        fn pr_curve_terminates_at_prevalence(
            pairs in proptest::collection::vec((0.0f64..1.0, any::<bool>()), 2..80)
        ) {
            prop_assume!(pairs.iter().any(|p| p.1));
            let (scores, truth): (Vec<f64>, Vec<bool>) = pairs.into_iter().unzip();
            let positives = truth.iter().filter(|t| **t).count();
            let n = truth.len();
            let curve = pr_curve(&ranked(scores, truth)).unwrap();
            let last = curve.last().unwrap();
            prop_assert_eq!(last.kappa, n);
            prop_assert!((last.recall - 1.0).abs() < 1e-15);
            prop_assert!((last.precision - positives as f64 / n as f64).abs() < 1e-15);
        }
    }
}
