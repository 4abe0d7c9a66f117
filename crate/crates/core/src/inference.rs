//! Posterior summaries: coefficient bands, contrasts, survival curves and
//! check-loss cross-validation.
//!
//! Coefficients are reported in raw predictor coordinates; the intercept is
//! shifted by the centering offset.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{solve_tau, Dataset};
use crate::par::{self, Execution};
use crate::quantile_model::{check_noncrossing, CoefficientTables};
use crate::sampler::{self, FitSettings, Posterior, PosteriorDraws};

/// Pointwise posterior mean and equal-tailed band per coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandTable {
    pub taus: Vec<f64>,
    pub level: f64,
    /// Indexed `[coef][tau]`, coef 0 being the intercept.
    pub mean: Vec<Vec<f64>>,
    pub lo: Vec<Vec<f64>>,
    pub hi: Vec<Vec<f64>>,
}

impl BandTable {
    pub fn n_coef(&self) -> usize {
        self.mean.len()
    }

    /// Point estimates `[tau][coef]`.
    pub fn estimates(&self) -> Vec<Vec<f64>> {
        (0..self.taus.len())
            .map(|t| self.mean.iter().map(|c| c[t]).collect())
            .collect()
    }
}

/// Linear-interpolation sample quantile of sorted data.
pub fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn band(values: &mut [f64], level: f64) -> (f64, f64, f64) {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - level);
    (mean, sorted_quantile(values, tail), sorted_quantile(values, 1.0 - tail))
}

/// Coefficient tables for every retained draw.
pub fn draw_tables(post: &Posterior, draws: &PosteriorDraws, exec: Execution) -> Result<Vec<CoefficientTables>> {
    if draws.is_empty() {
        return Err(Error::InvalidInput("no posterior draws to summarize".into()));
    }
    par::map_slice(exec, &draws.draws, |d| post.tables(&d.theta)).into_iter().collect()
}

/// Raw-coordinate coefficients at `taus` for each table: `[draw][tau][coef]`.
pub fn raw_coefficients(post: &Posterior, tables: &[CoefficientTables], taus: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
    let offset = post.data.domain.offset();
    tables
        .iter()
        .map(|t| {
            taus.iter()
                .map(|&tau| {
                    let mut c = t.coefficients_at(tau).ok_or_else(|| {
                        Error::InvalidInput(format!(
                            "tau = {tau} lies outside the grid [{}, {}]",
                            t.grid.first(),
                            t.grid.last()
                        ))
                    })?;
                    let shift: f64 = offset.iter().zip(&c[1..]).map(|(o, b)| o * b).sum();
                    c[0] -= shift;
                    Ok(c)
                })
                .collect()
        })
        .collect()
}

pub fn summarize(post: &Posterior, draws: &PosteriorDraws, taus: &[f64], level: f64) -> Result<BandTable> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::InvalidParameter(format!("credible level must lie in [0, 1), got {level}")));
    }
    let tables = draw_tables(post, draws, post.exec)?;
    let coefs = raw_coefficients(post, &tables, taus)?;
    let k = post.p() + 1;
    let mut out = BandTable {
        taus: taus.to_vec(),
        level,
        mean: vec![Vec::with_capacity(taus.len()); k],
        lo: vec![Vec::with_capacity(taus.len()); k],
        hi: vec![Vec::with_capacity(taus.len()); k],
    };
    for j in 0..k {
        for t in 0..taus.len() {
            let mut v: Vec<f64> = coefs.iter().map(|d| d[t][j]).collect();
            let (m, lo, hi) = band(&mut v, level);
            out.mean[j].push(m);
            out.lo[j].push(lo);
            out.hi[j].push(hi);
        }
    }
    Ok(out)
}

/// Posterior mean and equal-tailed interval of one scalar functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

/// β_j(τa) − β_j(τb) across draws.
pub fn contrast(post: &Posterior, draws: &PosteriorDraws, j: usize, tau_a: f64, tau_b: f64, level: f64) -> Result<Interval> {
    if j > post.p() {
        return Err(Error::InvalidParameter(format!("coefficient index {j} exceeds p = {}", post.p())));
    }
    let tables = draw_tables(post, draws, post.exec)?;
    let coefs = raw_coefficients(post, &tables, &[tau_a, tau_b])?;
    let mut v: Vec<f64> = coefs.iter().map(|d| d[0][j] - d[1][j]).collect();
    let (mean, lo, hi) = band(&mut v, level);
    Ok(Interval { mean, lo, hi })
}

/// Per-draw survival curves S(y|x) = 1 − τ̂(x, y) at raw covariates `x_raw`.
pub fn survival_curves(post: &Posterior, draws: &PosteriorDraws, x_raw: &[f64], ys: &[f64]) -> Result<Vec<Vec<f64>>> {
    if x_raw.len() != post.p() {
        return Err(Error::DimensionMismatch(format!(
            "covariate row has {} entries, expected {}",
            x_raw.len(),
            post.p()
        )));
    }
    let x = post.data.domain.center(x_raw);
    let tables = draw_tables(post, draws, post.exec)?;
    Ok(tables
        .iter()
        .map(|t| ys.iter().map(|&y| 1.0 - solve_tau(&x, y, t).clamped(&t.grid)).collect())
        .collect())
}

/// Minimum non-crossing slack over all draws.
pub fn min_draw_slack(post: &Posterior, draws: &PosteriorDraws) -> Result<f64> {
    let tables = draw_tables(post, draws, post.exec)?;
    Ok(tables
        .iter()
        .map(|t| check_noncrossing(t, &post.data.domain))
        .fold(f64::INFINITY, f64::min))
}

/// ρ_τ(r) = r(τ − 1{r < 0}).
#[inline]
pub fn check_function(r: f64, tau: f64) -> f64 {
    r * (tau - if r < 0.0 { 1.0 } else { 0.0 })
}

/// Average check loss of predictions `pred[i]` for responses `y[i]`.
pub fn check_loss_predictions(pred: &[f64], y: &[f64], tau: f64) -> f64 {
    let total: f64 = pred.iter().zip(y).map(|(q, y)| check_function(y - q, tau)).sum();
    total / y.len().max(1) as f64
}

/// Average ρ_τ(y − β₀ − x·β) over rows of raw predictors.
pub fn check_loss(coefs: &[f64], x: &[Vec<f64>], y: &[f64], tau: f64) -> f64 {
    let pred: Vec<f64> = x
        .iter()
        .map(|row| coefs[0] + row.iter().zip(&coefs[1..]).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    check_loss_predictions(&pred, y, tau)
}

/// Least-squares plane shifted by the τ-quantile of its residuals, for each τ:
/// `[tau][coef]` in raw coordinates.
pub fn least_squares_quantiles(x: &[Vec<f64>], y: &[f64], taus: &[f64]) -> Result<Vec<Vec<f64>>> {
    let p = x.first().map_or(0, |r| r.len());
    let zero = vec![0.0; p];
    let domain = crate::geometry::PredictorDomain::with_offset(x, zero)?;
    let data = Dataset::new(domain, y.to_vec(), None)?;
    let (coef, _) = sampler::least_squares(&data)?;
    let mut resid: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(row, y)| y - coef[0] - row.iter().zip(&coef[1..]).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    resid.sort_by(f64::total_cmp);
    Ok(taus
        .iter()
        .map(|&t| {
            let mut c = coef.clone();
            c[0] += sorted_quantile(&resid, t);
            c
        })
        .collect())
}

/// Train/test check losses for one method, averaged over folds: `[tau]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodLoss {
    pub name: String,
    pub train: Vec<f64>,
    pub test: Vec<f64>,
    /// Baseline test loss divided by this method's test loss.
    pub relative: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckLossReport {
    pub taus: Vec<f64>,
    pub folds: usize,
    pub methods: Vec<MethodLoss>,
}

/// Random partition of 0..n into `k` folds whose sizes differ by at most one.
pub fn fold_partition(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(format!("need 2 <= folds <= n, got {k} folds for n = {n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (i, v) in idx.into_iter().enumerate() {
        folds[i % k].push(v);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Held-out predictions from another method: one row per observation, one
/// column per τ.
#[derive(Debug, Clone)]
pub struct ExternalPredictions {
    pub name: String,
    pub values: Vec<Vec<f64>>,
}

/// K-fold check-loss comparison of the joint model against the shifted
/// least-squares baseline (and any external predictions).
pub fn cross_validate(
    x: &[Vec<f64>],
    y: &[f64],
    censored: Option<&[bool]>,
    folds: usize,
    seed: u64,
    taus: &[f64],
    settings: &FitSettings,
    external: &[ExternalPredictions],
) -> Result<CheckLossReport> {
    let n = y.len();
    if x.len() != n {
        return Err(Error::DimensionMismatch("predictor rows and responses differ in length".into()));
    }
    for e in external {
        if e.values.len() != n || e.values.iter().any(|r| r.len() != taus.len()) {
            return Err(Error::DimensionMismatch(format!(
                "external predictions '{}' must have {n} rows of {} values",
                e.name,
                taus.len()
            )));
        }
    }
    let parts = fold_partition(n, folds, seed)?;
    let n_methods = 2 + external.len();
    let mut train = vec![vec![0.0; taus.len()]; n_methods];
    let mut test = vec![vec![0.0; taus.len()]; n_methods];
    for (f, test_idx) in parts.iter().enumerate() {
        let train_idx: Vec<usize> = (0..n).filter(|i| test_idx.binary_search(i).is_err()).collect();
        let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>) {
            (idx.iter().map(|&i| x[i].clone()).collect(), idx.iter().map(|&i| y[i]).collect())
        };
        let (xtr, ytr) = pick(&train_idx);
        let (xte, yte) = pick(test_idx);
        let ctr = censored.map(|c| train_idx.iter().map(|&i| c[i]).collect());

        let mut fold_settings = settings.clone();
        fold_settings.sampler.seed = settings.sampler.seed.wrapping_add(f as u64);
        let (post, draws) = sampler::fit(&xtr, ytr.clone(), ctr, &fold_settings)?;
        let joint = summarize(&post, &draws, taus, 0.95)?.estimates();
        let ls = least_squares_quantiles(&xtr, &ytr, taus)?;
        for (t, &tau) in taus.iter().enumerate() {
            for (m, coefs) in [&joint, &ls].into_iter().enumerate() {
                train[m][t] += check_loss(&coefs[t], &xtr, &ytr, tau) / folds as f64;
                test[m][t] += check_loss(&coefs[t], &xte, &yte, tau) / folds as f64;
            }
            for (e, ext) in external.iter().enumerate() {
                let ptr: Vec<f64> = train_idx.iter().map(|&i| ext.values[i][t]).collect();
                let pte: Vec<f64> = test_idx.iter().map(|&i| ext.values[i][t]).collect();
                train[2 + e][t] += check_loss_predictions(&ptr, &ytr, tau) / folds as f64;
                test[2 + e][t] += check_loss_predictions(&pte, &yte, tau) / folds as f64;
            }
        }
    }
    let mut names = vec!["joint".to_string(), "least_squares".to_string()];
    names.extend(external.iter().map(|e| e.name.clone()));
    let methods = names
        .into_iter()
        .enumerate()
        .map(|(m, name)| MethodLoss {
            name,
            relative: test[1].iter().zip(&test[m]).map(|(b, v)| b / v).collect(),
            train: train[m].clone(),
            test: test[m].clone(),
        })
        .collect();
    Ok(CheckLossReport { taus: taus.to_vec(), folds, methods })
}

/// τ = 0.1, 0.2, …, 0.9.
pub fn decile_taus() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_function_values() {
        assert!((check_function(-1.0, 0.9) - 0.1).abs() < 1e-15);
        assert_eq!(check_function(2.0, 0.9), 2.0 * 0.9);
        for r in [-3.0, -0.5, 0.0, 1.2] {
            assert_eq!(check_function(r, 0.5), r.abs() / 2.0);
        }
        assert_eq!(check_loss(&[1.0, 2.0], &[vec![1.0], vec![2.0]], &[3.0, 5.0], 0.3), 0.0);
    }

    #[test]
    fn quantile_helper() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(sorted_quantile(&v, 0.0), 1.0);
        assert_eq!(sorted_quantile(&v, 1.0), 4.0);
        assert_eq!(sorted_quantile(&v, 0.5), 2.5);
        assert_eq!(sorted_quantile(&[7.0], 0.3), 7.0);
        let (m, lo, hi) = band(&mut [3.0, 1.0, 2.0], 0.0);
        assert_eq!((m, lo, hi), (2.0, 2.0, 2.0));
    }

    #[test]
    fn folds_partition_the_data() {
        for (n, k) in [(10, 3), (100, 10), (7, 7)] {
            let f = fold_partition(n, k, 4).unwrap();
            let sizes: Vec<usize> = f.iter().map(|v| v.len()).collect();
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let mut all: Vec<usize> = f.into_iter().flatten().collect();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
        assert_eq!(fold_partition(50, 5, 1).unwrap(), fold_partition(50, 5, 1).unwrap());
        assert!(fold_partition(5, 1, 0).is_err());
    }

    #[test]
    fn least_squares_baseline_median_of_residuals() {
        let x: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let y = [1.0, 3.0, 5.0, 7.0, 9.0];
        let q = least_squares_quantiles(&x, &y, &[0.5]).unwrap();
        assert!((q[0][0] - 1.0).abs() < 1e-10 && (q[0][1] - 2.0).abs() < 1e-10);
    }
}
