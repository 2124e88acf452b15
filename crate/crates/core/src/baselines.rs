//! Comparison detectors: OLS with Cook's distance, and the Gaussian
//! statistical-ratio detector.
//!
//! Both emit scores in the same higher-is-more-outlying convention as the
//! EM filter so the evaluation pipeline is detector-agnostic.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::templates::DesignMatrix;

/// OLS influence diagnostics over one design matrix.
#[derive(Debug, Clone)]
pub struct CooksResult {
    /// Cook's distance per row: `D_i = e_i²/(s²·p) · h_i/(1−h_i)²`.
    pub d: Vec<f64>,
    /// Hat-matrix diagonal `h_i = x_i (XᵀX)⁻¹ x_iᵀ`.
    pub leverage: Vec<f64>,
    /// `D_i > 4/n` rule.
    pub flags: Vec<bool>,
    /// Residual mean square of the OLS fit, RSS/(n − p).
    pub s2: f64,
    /// Feature dimension used as the `p` in the denominator.
    pub dim: usize,
}

/// OLS fit with Cook's distance per record.
///
/// Requires `n > d`. A singular `XᵀX` falls back to the same small ridge as
/// the EM weight update, with a warning.
pub fn cooks_distance(design: &DesignMatrix) -> Result<CooksResult> {
    let n = design.nrows();
    let d = design.ncols();
    if n <= d {
        return Err(Error::InsufficientRows {
            needed: d + 1,
            got: n,
        });
    }

    let x = DMatrix::from_fn(n, d, |i, j| design.row(i)[j]);
    let y = DVector::from_row_slice(design.y());
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * &y;

    let xtx_inv = match xtx.clone().cholesky() {
        Some(chol) => chol.inverse(),
        None => {
            let ridge = 1e-8 * xtx.trace() / d as f64;
            log::warn!("singular XᵀX in OLS baseline; applying ridge λ = {ridge:e}");
            let mut ridged = xtx;
            for j in 0..d {
                ridged[(j, j)] += ridge;
            }
            ridged
                .clone()
                .cholesky()
                .map(|c| c.inverse())
                .or_else(|| ridged.try_inverse())
                .ok_or(Error::SingularSystem)?
        }
    };

    let beta = &xtx_inv * xty;
    let fitted = &x * &beta;
    let residual: Vec<f64> = (0..n).map(|i| y[i] - fitted[i]).collect();
    let rss: f64 = residual.iter().map(|e| e * e).sum();
    let s2 = rss / (n - d) as f64;

    let mut leverage = Vec::with_capacity(n);
    for i in 0..n {
        let xi = x.row(i);
        let h = (xi * &xtx_inv * xi.transpose())[(0, 0)];
        leverage.push(h);
    }

    let dist: Vec<f64> = (0..n)
        .map(|i| {
            let e = residual[i];
            let h = leverage[i];
            let one_minus_h = 1.0 - h;
            e * e / (s2 * d as f64) * (h / (one_minus_h * one_minus_h))
        })
        .collect();

    let cutoff = 4.0 / n as f64;
    let flags = dist.iter().map(|&di| di > cutoff).collect();

    Ok(CooksResult {
        d: dist,
        leverage,
        flags,
        s2,
        dim: d,
    })
}

/// Gaussian fit of a ratio statistic with per-record ranking scores.
#[derive(Debug, Clone)]
pub struct RatioResult {
    /// Sample mean of the ratio over usable (nonzero-denominator) records.
    pub mu: f64,
    /// Sample variance (n−1 denominator) of the ratio.
    pub var: f64,
    /// Ranking scores, higher is more outlying: `1 − density`, with
    /// zero-denominator records pinned above every finite score.
    pub scores: Vec<f64>,
    /// Raw Gaussian density of each record's ratio; NaN where the ratio is
    /// undefined (zero denominator).
    pub density: Vec<f64>,
}

/// Fit `numerator/denominator` to a Gaussian and score each record by
/// `1 − density` of its ratio. Zero-denominator records are excluded from
/// the fit and assigned the maximum score directly.
pub fn ratio_detector(numerator: &[f64], denominator: &[f64]) -> Result<RatioResult> {
    if numerator.len() != denominator.len() {
        return Err(Error::LengthMismatch {
            left: numerator.len(),
            right: denominator.len(),
        });
    }
    let n = numerator.len();
    if n == 0 {
        return Err(Error::EmptyInput {
            what: "ratio input",
        });
    }

    let ratios: Vec<Option<f64>> = numerator
        .iter()
        .zip(denominator)
        .map(|(&a, &b)| if b == 0.0 { None } else { Some(a / b) })
        .collect();
    let usable: Vec<f64> = ratios.iter().flatten().cloned().collect();
    if usable.len() < 2 {
        return Err(Error::ZeroVariance);
    }

    let mu = usable.iter().sum::<f64>() / usable.len() as f64;
    let var = usable.iter().map(|r| (r - mu).powi(2)).sum::<f64>() / (usable.len() - 1) as f64;
    if var == 0.0 {
        return Err(Error::ZeroVariance);
    }

    let norm = 1.0 / (2.0 * std::f64::consts::PI * var).sqrt();
    let mut density = Vec::with_capacity(n);
    let mut scores = Vec::with_capacity(n);
    let mut max_score = f64::NEG_INFINITY;
    for r in &ratios {
        match r {
            Some(r) => {
                let dens = norm * (-(r - mu).powi(2) / (2.0 * var)).exp();
                density.push(dens);
                let score = 1.0 - dens;
                max_score = max_score.max(score);
                scores.push(score);
            }
            None => {
                density.push(f64::NAN);
                scores.push(f64::NAN); // placeholder, pinned below
            }
        }
    }
    for (s, r) in scores.iter_mut().zip(&ratios) {
        if r.is_none() {
            *s = max_score + 1.0;
        }
    }

    Ok(RatioResult {
        mu,
        var,
        scores,
        density,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn design(rows: Vec<Vec<f64>>, y: Vec<f64>) -> DesignMatrix {
        let ids = (0..y.len()).collect();
        DesignMatrix::from_rows(rows, y, ids).unwrap()
    }

    #[test]
    fn off_line_point_has_max_cooks_distance() {
        // Balanced straight-line design with one point pulled far off.
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 1.0]).collect();
        let mut y: Vec<f64> = (0..10).map(|i| 2.0 * i as f64 + 1.0).collect();
        y[7] += 40.0;
        let res = cooks_distance(&design(rows, y)).unwrap();
        let argmax = res
            .d
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 7);
        assert!(res.flags[7]);
    }

    #[test]
    fn leverage_sums_to_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..10 {
            let n = 30;
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), 1.0])
                .collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let res = cooks_distance(&design(rows, y)).unwrap();
            let trace: f64 = res.leverage.iter().sum();
            assert!((trace - res.dim as f64).abs() < 1e-8);
            assert!(res
                .leverage
                .iter()
                .all(|&h| (-1e-12..=1.0 + 1e-12).contains(&h)));
        }
    }

    #[test]
    fn flag_count_matches_rule_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let n = 200;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(0.0..5.0), 1.0]).collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| 1.5 * r[0] + rng.gen_range(-1.0..1.0))
            .collect();
        let res = cooks_distance(&design(rows, y)).unwrap();
        let cutoff = 4.0 / n as f64;
        let expected = res.d.iter().filter(|&&d| d > cutoff).count();
        assert_eq!(res.flags.iter().filter(|f| **f).count(), expected);
    }

    #[test]
    fn underdetermined_design_rejected() {
        let d = design(vec![vec![1.0, 1.0]], vec![1.0]);
        assert!(matches!(
            cooks_distance(&d),
            Err(Error::InsufficientRows { .. })
        ));
    }

    #[test]
    fn equal_ratios_are_zero_variance() {
        let num = vec![2.0, 4.0, 6.0];
        let den = vec![1.0, 2.0, 3.0];
        assert!(matches!(
            ratio_detector(&num, &den),
            Err(Error::ZeroVariance)
        ));
    }

    #[test]
    fn farthest_ratio_ranks_first() {
        let num = vec![1.0, 1.0, 1.0, 10.0];
        let den = vec![1.0; 4];
        let res = ratio_detector(&num, &den).unwrap();
        let argmax = res
            .scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 3);
    }

    #[test]
    fn zero_denominator_gets_maximum_score() {
        let num = vec![1.0, 2.0, 3.0, 5.0];
        let den = vec![1.0, 1.0, 0.0, 1.0];
        let res = ratio_detector(&num, &den).unwrap();
        let max = res.scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(res.scores[2], max);
        assert!(res.density[2].is_nan());
    }

    #[test]
    fn planted_far_ratios_fill_the_top_ranks() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let mut num: Vec<f64> = (0..1000)
            .map(|_| 5.0 + rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        // Ten planted at mean + 8σ.
        for _ in 0..10 {
            num.push(5.0 + 8.0);
        }
        let den = vec![1.0; num.len()];
        let res = ratio_detector(&num, &den).unwrap();
        let mut order: Vec<usize> = (0..num.len()).collect();
        order.sort_by(|&a, &b| {
            res.scores[b]
                .partial_cmp(&res.scores[a])
                .unwrap()
                .then(a.cmp(&b))
        });
        let top10: Vec<usize> = order[..10].to_vec();
        for planted in 1000..1010 {
            assert!(top10.contains(&planted), "top10 = {top10:?}");
        }
    }

    #[test]
    fn ranking_invariant_under_affine_rescaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let ratios: Vec<f64> = (0..200).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let den = vec![1.0; ratios.len()];
        let scaled: Vec<f64> = ratios.iter().map(|r| 3.5 * r - 11.0).collect();
        let a = ratio_detector(&ratios, &den).unwrap();
        let b = ratio_detector(&scaled, &den).unwrap();
        let order = |scores: &[f64]| {
            let mut idx: Vec<usize> = (0..scores.len()).collect();
            idx.sort_by(|&i, &j| scores[j].partial_cmp(&scores[i]).unwrap().then(i.cmp(&j)));
            idx
        };
        assert_eq!(order(&a.scores), order(&b.scores));
    }
}
