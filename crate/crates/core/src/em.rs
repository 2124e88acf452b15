//! The robust-regression EM filter.
//!
//! One filter fits a linear model `y_i = w · x_i + ε_i` whose noise is an
//! explicit two-component mixture: with probability `1 − p` a zero-mean
//! Gaussian with variance `σ²`, with probability `p` a Cauchy with scale
//! `b` (represented as a Gamma-scale mixture of Gaussians). An EM loop
//! learns `(w, σ², p, b)` together with per-record posterior outlier
//! probabilities `t_i`; the filter then flags the records with the top
//! `K = ⌊Σ t_i⌋` scores.
//!
//! Update equations, applied in this order each iteration (`t` comes from
//! the previous iteration's parameters; residuals `r_i` from the previous
//! `w` throughout):
//!
//! ```text
//! t_i  = sigmoid( ln(p/(1−p)) + ½·ln(b·σ²/(π·e²)) + r_i²/(2σ²) )
//! b    = 1 / median(|r_i| over the K records with highest t_i)
//! p    = (1/n) Σ t_i
//! σ²   = Σ (1−t_i)·r_i² / (n − Σ t_i)
//! w    = argmin Σ (1−t_i)·(y_i − w·x_i)²       (weighted least squares)
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::templates::DesignMatrix;

/// π·e²: with `b` initialized here and `σ² = 1`, the calibration term of the
/// `t` update vanishes, so initial scores are driven by the residuals alone.
pub const PI_E_SQUARED: f64 = std::f64::consts::PI * std::f64::consts::E * std::f64::consts::E;

/// Floor applied to σ² so perfect interpolation on clean subsets cannot
/// zero the Gaussian variance and blow up the scores.
pub const SIGMA2_FLOOR: f64 = 1e-12;

/// `p` is clamped to this margin inside the `t` update; the logit is
/// undefined at the endpoints.
pub const P_CLAMP: f64 = 1e-9;

/// Learned parameters of one filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    /// Coefficients, one per design column; the intercept (when the template
    /// has one) is the last entry.
    pub w: Vec<f64>,
    /// Non-outlier noise variance, > 0.
    pub sigma2: f64,
    /// Outlier mixing probability in [0, 1].
    pub p: f64,
    /// Cauchy scale parameter, > 0.
    pub b: f64,
}

impl FilterParams {
    fn check_finite(&self, iteration: usize) -> Result<()> {
        let bad = !self.sigma2.is_finite()
            || !self.p.is_finite()
            || !self.b.is_finite()
            || self.w.iter().any(|v| !v.is_finite());
        if bad {
            return Err(Error::NonFiniteParameter {
                iteration,
                detail: format!(
                    "sigma2={}, p={}, b={}, w={:?}",
                    self.sigma2, self.p, self.b, self.w
                ),
            });
        }
        Ok(())
    }
}

/// EM initialization and stopping settings. The defaults are the standard
/// initialization: `p = 0.05`, `σ² = 1`, `b = π·e²`, `w = (1, 0, …, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EMSettings {
    pub init_p: f64,
    pub init_sigma2: f64,
    pub init_b: f64,
    /// Explicit initial coefficients; `None` uses first-coefficient-one.
    pub init_w: Option<Vec<f64>>,
    pub max_iterations: usize,
    /// Maximum relative parameter change accepted as converged.
    pub tolerance: f64,
}

impl Default for EMSettings {
    fn default() -> Self {
        Self {
            init_p: 0.05,
            init_sigma2: 1.0,
            init_b: PI_E_SQUARED,
            init_w: None,
            max_iterations: 100,
            tolerance: 1e-6,
        }
    }
}

/// The result of fitting one filter: parameters, per-record scores, the
/// expected outlier count, and top-K flags.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterFit {
    pub params: FilterParams,
    /// Posterior outlier probability per design row, in row order.
    pub t: Vec<f64>,
    /// Expected outlier count `⌊Σ t_i⌋`.
    pub k: usize,
    /// Top-K flags per design row.
    pub flags: Vec<bool>,
    pub iterations: usize,
    pub converged: bool,
}

/// Serialization view of a fit: `{"w":…,"sigma2":…,"p":…,"b":…,"iterations":…,"converged":…}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterParamsExport {
    pub w: Vec<f64>,
    pub sigma2: f64,
    pub p: f64,
    pub b: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FilterFit {
    pub fn export(&self) -> FilterParamsExport {
        FilterParamsExport {
            w: self.params.w.clone(),
            sigma2: self.params.sigma2,
            p: self.params.p,
            b: self.params.b,
            iterations: self.iterations,
            converged: self.converged,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Residuals `r_i = y_i − w · x_i`.
pub fn residuals(params: &FilterParams, design: &DesignMatrix) -> Result<Vec<f64>> {
    if params.w.len() != design.ncols() {
        return Err(Error::DimensionMismatch {
            expected: design.ncols(),
            got: params.w.len(),
        });
    }
    let w = &params.w;
    Ok((0..design.nrows())
        .map(|i| {
            let x = design.row(i);
            let mut dot = 0.0;
            for j in 0..w.len() {
                dot += w[j] * x[j];
            }
            design.y()[i] - dot
        })
        .collect())
}

fn t_from_residuals(params: &FilterParams, r: &[f64]) -> Vec<f64> {
    let p = params.p.clamp(P_CLAMP, 1.0 - P_CLAMP);
    let base = (p / (1.0 - p)).ln() + 0.5 * (params.b * params.sigma2 / PI_E_SQUARED).ln();
    let two_sigma2 = 2.0 * params.sigma2;
    r.iter()
        .map(|ri| sigmoid(base + ri * ri / two_sigma2))
        .collect()
}

/// Posterior outlier probability per record (the E-step `t` update).
pub fn update_t(params: &FilterParams, design: &DesignMatrix) -> Result<Vec<f64>> {
    let r = residuals(params, design)?;
    Ok(t_from_residuals(params, &r))
}

// Median as the mean of the central order statistics; even length averages
// the two central elements.
fn median(mut v: Vec<f64>) -> f64 {
    let n = v.len();
    debug_assert!(n > 0);
    let mid = n / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).unwrap());
    let hi = *m;
    if n % 2 == 1 {
        hi
    } else {
        let lo = v[..mid].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo + hi) / 2.0
    }
}

// Indices of the K highest-t rows, ties broken by lower row index.
fn top_k_indices(t: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..t.len()).collect();
    if k == 0 {
        return Vec::new();
    }
    if k < t.len() {
        idx.select_nth_unstable_by(k - 1, |&a, &b| {
            t[b].partial_cmp(&t[a]).unwrap().then(a.cmp(&b))
        });
        idx.truncate(k);
    }
    idx
}

fn b_from_residuals(prev_b: f64, t: &[f64], r: &[f64]) -> f64 {
    let sum_t: f64 = t.iter().sum();
    let k = (sum_t.floor() as usize).min(t.len());
    if k == 0 {
        return prev_b;
    }
    let abs_err: Vec<f64> = top_k_indices(t, k).iter().map(|&i| r[i].abs()).collect();
    let med = median(abs_err);
    if med == 0.0 {
        prev_b
    } else {
        1.0 / med
    }
}

/// The E-step `b` update: reciprocal median absolute residual of the
/// `K = ⌊Σ t⌋` most suspicious records. With `K == 0` or a zero median the
/// previous `b` is retained.
pub fn update_b(params: &FilterParams, t: &[f64], design: &DesignMatrix) -> Result<f64> {
    let r = residuals(params, design)?;
    Ok(b_from_residuals(params.b, t, &r))
}

/// M-step `p` update: the mean score.
pub fn update_p(t: &[f64]) -> Result<f64> {
    if t.is_empty() {
        return Err(Error::EmptyInput { what: "t" });
    }
    Ok(t.iter().sum::<f64>() / t.len() as f64)
}

fn sigma2_from_residuals(t: &[f64], r: &[f64], iteration: usize) -> Result<f64> {
    let sum_t: f64 = t.iter().sum();
    let denom = t.len() as f64 - sum_t;
    if denom <= 0.0 {
        return Err(Error::AllOutlierDegenerate { iteration });
    }
    let num: f64 = t.iter().zip(r).map(|(ti, ri)| (1.0 - ti) * ri * ri).sum();
    Ok((num / denom).max(SIGMA2_FLOOR))
}

/// M-step `σ²` update: score-weighted residual variance of the non-outlier
/// component.
pub fn update_sigma2(t: &[f64], params: &FilterParams, design: &DesignMatrix) -> Result<f64> {
    let r = residuals(params, design)?;
    sigma2_from_residuals(t, &r, 0)
}

/// M-step `w` update: solve the weighted least-squares normal equations with
/// row weights `1 − t_i`. A singular normal matrix falls back to a small
/// ridge (`λ = 1e-8 · trace/d`) with a warning.
pub fn update_w(t: &[f64], design: &DesignMatrix) -> Result<Vec<f64>> {
    let n = design.nrows();
    let d = design.ncols();
    if t.len() != n {
        return Err(Error::LengthMismatch {
            left: t.len(),
            right: n,
        });
    }

    // Accumulate A = XᵀWX (upper triangle) and c = XᵀWy.
    let mut a = vec![0.0f64; d * d];
    let mut c = vec![0.0f64; d];
    for (i, ti) in t.iter().enumerate() {
        let wgt = 1.0 - ti;
        let x = design.row(i);
        let yi = design.y()[i];
        for j in 0..d {
            let wxj = wgt * x[j];
            c[j] += wxj * yi;
            for k in j..d {
                a[j * d + k] += wxj * x[k];
            }
        }
    }
    for j in 0..d {
        for k in 0..j {
            a[j * d + k] = a[k * d + j];
        }
    }

    let a_mat = DMatrix::from_row_slice(d, d, &a);
    let c_vec = DVector::from_row_slice(&c);

    if let Some(chol) = a_mat.clone().cholesky() {
        return Ok(chol.solve(&c_vec).iter().cloned().collect());
    }

    let ridge = 1e-8 * a_mat.trace() / d as f64;
    log::warn!("singular normal matrix; applying ridge λ = {ridge:e}");
    let mut ridged = a_mat;
    for j in 0..d {
        ridged[(j, j)] += ridge;
    }
    if let Some(chol) = ridged.clone().cholesky() {
        return Ok(chol.solve(&c_vec).iter().cloned().collect());
    }
    ridged
        .lu()
        .solve(&c_vec)
        .map(|v| v.iter().cloned().collect())
        .ok_or(Error::SingularSystem)
}

/// Expected outlier count and top-K flags.
///
/// `K = ⌊Σ t_i⌋` (sequential sum, so the floor is deterministic); exactly
/// `min(K, n)` flags are set, ties broken by lower record index.
pub fn flag_top_k(t: &[f64]) -> (usize, Vec<bool>) {
    let sum_t: f64 = t.iter().sum();
    let k = (sum_t.floor().max(0.0) as usize).min(t.len());
    let mut flags = vec![false; t.len()];
    for i in top_k_indices(t, k) {
        flags[i] = true;
    }
    (k, flags)
}

fn relative_change(new: f64, old: f64) -> f64 {
    (new - old).abs() / old.abs().max(1e-12)
}

/// Run the EM loop on one design matrix.
///
/// Each iteration refreshes `t` and `b` from the previous iteration's
/// parameters, then updates `p`, `σ²` (residuals still from the previous
/// `w`), and finally `w`. Stops when the largest relative parameter change
/// drops below the tolerance, or after `max_iterations`.
pub fn fit(design: &DesignMatrix, settings: &EMSettings) -> Result<FilterFit> {
    let n = design.nrows();
    let d = design.ncols();
    if n < d {
        return Err(Error::InsufficientRows { needed: d, got: n });
    }
    if !(0.0..=1.0).contains(&settings.init_p)
        || settings.init_sigma2 <= 0.0
        || settings.init_b <= 0.0
    {
        return Err(Error::ConfigInvalid {
            reason: format!(
                "invalid EM initialization: p={}, sigma2={}, b={}",
                settings.init_p, settings.init_sigma2, settings.init_b
            ),
        });
    }
    let init_w = match &settings.init_w {
        Some(w) if w.len() != d => {
            return Err(Error::ConfigInvalid {
                reason: format!("init_w has {} entries, design has {d} columns", w.len()),
            })
        }
        Some(w) => w.clone(),
        None => {
            let mut w = vec![0.0; d];
            w[0] = 1.0;
            w
        }
    };

    let mut params = FilterParams {
        w: init_w,
        sigma2: settings.init_sigma2,
        p: settings.init_p,
        b: settings.init_b,
    };
    params.check_finite(0)?;

    let mut t = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;

    for iter in 0..settings.max_iterations {
        let r = residuals(&params, design)?;
        t = t_from_residuals(&params, &r);

        let b_new = b_from_residuals(params.b, &t, &r);
        let p_new = update_p(&t)?;
        let sigma2_new = sigma2_from_residuals(&t, &r, iter)?;
        let w_new = update_w(&t, design)?;

        let mut change = relative_change(sigma2_new, params.sigma2)
            .max(relative_change(p_new, params.p))
            .max(relative_change(b_new, params.b));
        for (new, old) in w_new.iter().zip(&params.w) {
            change = change.max((new - old).abs() / old.abs().max(1.0));
        }

        params = FilterParams {
            w: w_new,
            sigma2: sigma2_new,
            p: p_new,
            b: b_new,
        };
        params.check_finite(iter)?;
        iterations = iter + 1;

        if change < settings.tolerance {
            converged = true;
            break;
        }
    }

    let (k, flags) = flag_top_k(&t);
    Ok(FilterFit {
        params,
        t,
        k,
        flags,
        iterations,
        converged,
    })
}
