//! Prediction metrics, estimation-error metrics and repeated k-fold
//! cross-validation over whole clusters.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data::{build_designs, ClusteredDataset, CorrFormula, DesignBundle, MeanFormula};
use crate::error::{GcrError, Result};
use crate::exp_family::{family_moments, Family};
use crate::fitter::{fit_designs, FitConfig};
use crate::par::Exec;

/// Probabilities are clipped to `[LOG_LOSS_CLIP, 1 - LOG_LOSS_CLIP]`.
pub const LOG_LOSS_CLIP: f64 = 1e-12;

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(GcrError::Validation(format!("length mismatch: {a} responses, {b} predictions")));
    }
    if a == 0 {
        return Err(GcrError::Validation("no observations to score".into()));
    }
    Ok(())
}

pub fn brier_score(y: &[f64], p: &[f64]) -> Result<f64> {
    check_lengths(y.len(), p.len())?;
    if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(GcrError::Validation("probabilities must lie in [0, 1]".into()));
    }
    Ok(y.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64)
}

pub fn log_loss(y: &[f64], p: &[f64]) -> Result<f64> {
    check_lengths(y.len(), p.len())?;
    let total: f64 = y
        .iter()
        .zip(p)
        .map(|(&yi, &pi)| {
            let q = pi.clamp(LOG_LOSS_CLIP, 1.0 - LOG_LOSS_CLIP);
            -(yi * q.ln() + (1.0 - yi) * (1.0 - q).ln())
        })
        .sum();
    Ok(total / y.len() as f64)
}

pub fn mae_counts(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_lengths(y.len(), yhat.len())?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

pub fn mean_squared_error(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_lengths(y.len(), yhat.len())?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64)
}

/// Estimated and true moments of one cluster.
#[derive(Debug, Clone)]
pub struct MomentPair<'a> {
    pub mu_hat: &'a DVector<f64>,
    pub mu_true: &'a [f64],
    pub sigma_hat: &'a DMatrix<f64>,
    pub sigma_true: &'a DMatrix<f64>,
}

/// Average l2 mean error and Frobenius covariance error over clusters.
pub fn mmd_mcd(pairs: &[MomentPair<'_>]) -> Result<(f64, f64)> {
    if pairs.is_empty() {
        return Err(GcrError::Validation("no clusters to compare".into()));
    }
    let (mut mmd, mut mcd) = (0.0, 0.0);
    for (i, p) in pairs.iter().enumerate() {
        let m = p.mu_hat.len();
        if p.mu_true.len() != m || p.sigma_hat.shape() != (m, m) || p.sigma_true.shape() != (m, m) {
            return Err(GcrError::Validation(format!("cluster {i}: estimated and true shapes differ")));
        }
        mmd += p.mu_hat.iter().zip(p.mu_true).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        mcd += (p.sigma_hat - p.sigma_true).norm();
    }
    let n = pairs.len() as f64;
    Ok((mmd / n, mcd / n))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvConfig {
    pub folds: usize,
    pub repeats: usize,
    /// Column whose value on a cluster's first observation defines its stratum.
    pub stratify_col: Option<String>,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig { folds: 5, repeats: 15, stratify_col: None, seed: 0 }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(GcrError::Validation("cross-validation needs at least 2 folds".into()));
        }
        if self.repeats < 1 {
            return Err(GcrError::Validation("cross-validation needs at least 1 repeat".into()));
        }
        Ok(())
    }
}

/// Fold label of every cluster for one repeat. Clusters are shuffled within
/// each stratum and dealt to folds in turn; the dealing position carries
/// over between strata so fold sizes stay balanced.
pub fn assign_folds(strata: &[String], folds: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in strata.iter().enumerate() {
        groups.entry(s.as_str()).or_default().push(i);
    }
    let mut label = vec![0; strata.len()];
    let mut next = 0;
    for members in groups.values_mut() {
        members.shuffle(rng);
        for &i in members.iter() {
            label[i] = next % folds;
            next += 1;
        }
    }
    label
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSeries {
    pub name: String,
    /// `fold_scores[r][k]`; `None` when fold `k` of repeat `r` failed to fit.
    pub fold_scores: Vec<Vec<Option<f64>>>,
    /// Mean over successful folds of each repeat.
    pub repeat_means: Vec<f64>,
    /// Mean of `repeat_means`.
    pub overall: f64,
}

impl MetricSeries {
    pub fn n_scores(&self) -> usize {
        self.fold_scores.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldFailure {
    pub repeat: usize,
    pub fold: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub family: Family,
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub metrics: Vec<MetricSeries>,
    pub failed_folds: Vec<FoldFailure>,
    /// Probability clipping applied in the log loss, if it was computed.
    pub log_loss_clip: Option<f64>,
}

impl MetricReport {
    pub fn metric(&self, name: &str) -> Option<&MetricSeries> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

/// Metric names reported for a family: Brier score and log loss for binary
/// responses, MAE and MSE otherwise.
pub fn metric_names(family: Family) -> [&'static str; 2] {
    match family {
        Family::Bernoulli => ["brier", "log_loss"],
        _ => ["mae", "mse"],
    }
}

fn score(family: Family, y: &[f64], mu: &[f64]) -> Result<[f64; 2]> {
    Ok(match family {
        Family::Bernoulli => [brier_score(y, mu)?, log_loss(y, mu)?],
        _ => [mae_counts(y, mu)?, mean_squared_error(y, mu)?],
    })
}

/// Marginal mean predictions `mu(x^T beta)` for the clusters in `designs`.
pub fn predict_means(designs: &DesignBundle, family: Family, beta: &DVector<f64>) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(designs.total_obs());
    for c in &designs.clusters {
        for eta in (&c.x * beta).iter() {
            out.push(family_moments(family, *eta, 1.0)?.mu);
        }
    }
    Ok(out)
}

fn strata(data: &ClusteredDataset, col: Option<&str>) -> Result<Vec<String>> {
    match col {
        None => Ok(vec![String::new(); data.n_clusters()]),
        Some(name) => {
            let idx = data.require_column(name)?;
            Ok(data.clusters().iter().map(|c| c.columns[idx].value(0).render()).collect())
        }
    }
}

/// Repeated k-fold cross-validation with whole clusters held out.
pub fn repeated_cv(
    data: &ClusteredDataset,
    mf: &MeanFormula,
    cf: &CorrFormula,
    family: Family,
    fit_config: &FitConfig,
    cv: &CvConfig,
) -> Result<MetricReport> {
    cv.validate()?;
    let designs = build_designs(data, mf, cf)?;
    repeated_cv_designs(data, &designs, family, fit_config, cv)
}

/// [`repeated_cv`] with prebuilt designs for `data`.
pub fn repeated_cv_designs(
    data: &ClusteredDataset,
    designs: &DesignBundle,
    family: Family,
    fit_config: &FitConfig,
    cv: &CvConfig,
) -> Result<MetricReport> {
    cv.validate()?;
    let n = designs.n_clusters();
    if n < cv.folds {
        return Err(GcrError::Validation(format!("{n} clusters cannot fill {} folds", cv.folds)));
    }
    let strata = strata(data, cv.stratify_col.as_deref())?;
    let labels: Vec<Vec<usize>> = (0..cv.repeats)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cv.seed);
            rng.set_stream(r as u64);
            assign_folds(&strata, cv.folds, &mut rng)
        })
        .collect();

    let exec: Exec = fit_config.exec;
    let inner = FitConfig { exec: Exec::Sequential, ..fit_config.clone() };
    let jobs = cv.repeats * cv.folds;
    let results: Vec<Result<[f64; 2]>> = exec.map_indexed(jobs, |job| {
        let (r, k) = (job / cv.folds, job % cv.folds);
        let train: Vec<usize> = (0..n).filter(|&i| labels[r][i] != k).collect();
        let test: Vec<usize> = (0..n).filter(|&i| labels[r][i] == k).collect();
        let fit = fit_designs(&designs.subset(&train), family, &inner)?;
        let test_designs = designs.subset(&test);
        let mu = predict_means(&test_designs, family, &fit.beta_hat)?;
        let y: Vec<f64> = test_designs.clusters.iter().flat_map(|c| c.y.iter().copied()).collect();
        score(family, &y, &mu)
    });

    let names = metric_names(family);
    let mut scores = vec![vec![vec![None; cv.folds]; cv.repeats]; 2];
    let mut failed_folds = Vec::new();
    for (job, res) in results.into_iter().enumerate() {
        let (r, k) = (job / cv.folds, job % cv.folds);
        match res {
            Ok(s) => {
                scores[0][r][k] = Some(s[0]);
                scores[1][r][k] = Some(s[1]);
            }
            Err(e) => {
                log::warn!("fold {k} of repeat {r} failed: {e}");
                failed_folds.push(FoldFailure { repeat: r, fold: k, message: e.to_string() });
            }
        }
    }
    if failed_folds.len() == jobs {
        return Err(GcrError::Estimation {
            message: format!("every cross-validation fit failed; first error: {}", failed_folds[0].message),
            condition: f64::NAN,
        });
    }
    let metrics = names
        .iter()
        .zip(scores)
        .map(|(name, fold_scores)| {
            let repeat_means: Vec<f64> = fold_scores
                .iter()
                .map(|row| {
                    let ok: Vec<f64> = row.iter().flatten().copied().collect();
                    if ok.is_empty() {
                        f64::NAN
                    } else {
                        ok.iter().sum::<f64>() / ok.len() as f64
                    }
                })
                .collect();
            let finite: Vec<f64> = repeat_means.iter().copied().filter(|v| v.is_finite()).collect();
            let overall = finite.iter().sum::<f64>() / finite.len() as f64;
            MetricSeries { name: name.to_string(), fold_scores, repeat_means, overall }
        })
        .collect();
    Ok(MetricReport {
        family,
        folds: cv.folds,
        repeats: cv.repeats,
        seed: cv.seed,
        metrics,
        failed_folds,
        log_loss_clip: (family == Family::Bernoulli).then_some(LOG_LOSS_CLIP),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedTest {
    pub mean_diff: f64,
    pub t_stat: f64,
    pub df: f64,
    pub p_value: f64,
}

/// Two-sided paired t-test of `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTest> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(GcrError::Validation("paired test needs two equal-length samples of size >= 2".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let df = n - 1.0;
    if var == 0.0 {
        let p = if mean == 0.0 { 1.0 } else { 0.0 };
        let t = if mean == 0.0 { 0.0 } else { mean.signum() * f64::INFINITY };
        return Ok(PairedTest { mean_diff: mean, t_stat: t, df, p_value: p });
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| GcrError::Validation(e.to_string()))?;
    Ok(PairedTest { mean_diff: mean, t_stat: t, df, p_value: (2.0 * dist.sf(t.abs())).min(1.0) })
}
