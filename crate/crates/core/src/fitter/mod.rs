//! Joint estimation of `(beta, alpha, phi)` by modified Fisher scoring.
//!
//! Each outer iteration updates `phi` from the current `beta`, runs damped
//! scoring steps `alpha += lambda H2^-1 S2` to convergence, and then takes
//! one GEE step for `beta`.

mod gee;
mod linalg;
mod pseudo;

pub use gee::{estimate_phi, gee_score_info, gee_step, independence_glm};
pub use pseudo::{
    cluster_scores, pl_info_h2, pl_objective, pl_score_s2, pseudo_expectation_j, H2Mode,
};

pub(crate) use gee::mean_parts;
pub(crate) use linalg::sym_inverse;
pub(crate) use pseudo::corr_parts;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::corr_manifold::CorrMatrix;
use crate::data::{build_designs, ClusteredDataset, CorrFormula, DesignBundle, MeanFormula};
use crate::error::{GcrError, Result};
use crate::exp_family::Family;
use crate::par::Exec;

/// Number of step halvings tried before an `alpha` step is abandoned.
pub const MAX_HALVINGS: u32 = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub step_lambda: f64,
    pub outer_max: usize,
    pub inner_max: usize,
    /// Outer stop rule on the max relative change of `(beta, alpha)`.
    pub tol_outer: f64,
    pub tol_inner: f64,
    pub backtracking: bool,
    /// Information used inside the scoring steps.
    pub h2_mode: H2Mode,
    /// Freeze `alpha` at this value (for instance zeros for an
    /// independence fit) and skip the pseudo-likelihood steps.
    pub fixed_alpha: Option<Vec<f64>>,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            step_lambda: 0.5,
            outer_max: 100,
            inner_max: 50,
            tol_outer: 1e-8,
            tol_inner: 1e-8,
            backtracking: true,
            h2_mode: H2Mode::PseudoExpectation,
            fixed_alpha: None,
            exec: Exec::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_lambda > 0.0 && self.step_lambda <= 1.0) {
            return Err(GcrError::Validation(format!(
                "step size {} must lie in (0, 1]",
                self.step_lambda
            )));
        }
        if !(self.tol_outer > 0.0) || !(self.tol_inner > 0.0) {
            return Err(GcrError::Validation("tolerances must be positive".into()));
        }
        if self.outer_max == 0 || self.inner_max == 0 {
            return Err(GcrError::Validation("iteration limits must be at least one".into()));
        }
        if let Some(a) = &self.fixed_alpha {
            if a.iter().any(|v| !v.is_finite()) {
                return Err(GcrError::Validation("fixed alpha must be finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub family: Family,
    pub mean_names: Vec<String>,
    pub corr_names: Vec<String>,
    pub beta_hat: DVector<f64>,
    pub alpha_hat: DVector<f64>,
    pub phi_hat: f64,
    pub converged: bool,
    pub outer_iters: usize,
    pub inner_iters: usize,
    /// Pseudo-log-likelihood after each accepted `alpha` step, one
    /// sequence per outer iteration (the first entry is the value at the
    /// start of that iteration).
    pub pl_trace: Vec<Vec<f64>>,
    /// Inner loops that stopped because no halving increased the objective.
    pub backtrack_failures: usize,
    pub per_cluster_r: Vec<CorrMatrix>,
}

impl FitResult {
    /// Rebuilds a result from stored estimates, recomputing `R_i`.
    pub fn from_estimates(
        designs: &DesignBundle,
        family: Family,
        beta: DVector<f64>,
        alpha: DVector<f64>,
        phi: f64,
    ) -> Result<FitResult> {
        if beta.len() != designs.p() || alpha.len() != designs.d() {
            return Err(GcrError::Validation(
                "stored estimates do not match the design dimensions".into(),
            ));
        }
        let corr = corr_parts(designs, &alpha, None, Exec::default())?;
        Ok(FitResult {
            family,
            mean_names: designs.mean_names.clone(),
            corr_names: designs.corr_names.clone(),
            beta_hat: beta,
            alpha_hat: alpha,
            phi_hat: phi,
            converged: true,
            outer_iters: 0,
            inner_iters: 0,
            pl_trace: Vec::new(),
            backtrack_failures: 0,
            per_cluster_r: corr.into_iter().map(|c| c.sol.corr).collect(),
        })
    }

    /// Fitted marginal means per cluster.
    pub fn fitted_means(&self, designs: &DesignBundle) -> Result<Vec<DVector<f64>>> {
        Ok(mean_parts(designs, self.family, &self.beta_hat, self.phi_hat, Exec::default())?
            .into_iter()
            .map(|m| m.mu)
            .collect())
    }

    /// Fitted covariances `A^1/2 R A^1/2` per cluster.
    pub fn fitted_covariances(&self, designs: &DesignBundle) -> Result<Vec<DMatrix<f64>>> {
        let mean = mean_parts(designs, self.family, &self.beta_hat, self.phi_hat, Exec::default())?;
        Ok(mean
            .iter()
            .zip(&self.per_cluster_r)
            .map(|(mp, r)| {
                let m = mp.sd.len();
                DMatrix::from_fn(m, m, |j, k| mp.sd[j] * r.as_matrix()[(j, k)] * mp.sd[k])
            })
            .collect())
    }

    pub fn final_pl(&self) -> Option<f64> {
        self.pl_trace.iter().rev().find_map(|t| t.last().copied())
    }
}

/// Max over coordinates of `|new - old| / max(|old|, 1)`.
pub(crate) fn max_rel_change(old: &DVector<f64>, new: &DVector<f64>) -> f64 {
    old.iter()
        .zip(new.iter())
        .map(|(o, n)| (n - o).abs() / o.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Builds the designs and fits the model.
pub fn fit_gcr(
    data: &ClusteredDataset,
    mf: &MeanFormula,
    cf: &CorrFormula,
    family: Family,
    config: &FitConfig,
) -> Result<FitResult> {
    let designs = build_designs(data, mf, cf)?;
    fit_designs(&designs, family, config)
}

/// Fits the model to prebuilt designs.
pub fn fit_designs(designs: &DesignBundle, family: Family, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    for c in &designs.clusters {
        for &y in c.y.iter() {
            family.validate_response(y)?;
        }
    }
    let n = designs.total_obs();
    if n <= designs.p() {
        return Err(GcrError::Validation(format!(
            "need more observations than mean parameters (N = {n}, p = {})",
            designs.p()
        )));
    }
    let exec = config.exec;
    let d = designs.d();
    let mut beta = independence_glm(designs, family, exec)?;
    let (mut alpha, frozen) = match &config.fixed_alpha {
        Some(a) if a.len() != d => {
            return Err(GcrError::Validation(format!(
                "fixed alpha has length {}, expected {d}",
                a.len()
            )))
        }
        Some(a) => (DVector::from_column_slice(a), true),
        None => (DVector::zeros(d), false),
    };

    let mut corr = corr_parts(designs, &alpha, None, exec)?;
    let mut pl_trace = Vec::new();
    let mut converged = false;
    let mut outer_iters = 0;
    let mut inner_iters = 0;
    let mut backtrack_failures = 0;

    for _ in 0..config.outer_max {
        outer_iters += 1;
        let phi = estimate_phi(designs, family, &beta)?;
        let mean = mean_parts(designs, family, &beta, phi, exec)?;
        let alpha_prev = alpha.clone();

        if !frozen {
            let mut state = pseudo::pl_state(designs, &mean, &alpha, Some(&corr), exec)?;
            let mut trace = vec![state.pl];
            for _ in 0..config.inner_max {
                inner_iters += 1;
                let (s2, h2) = pseudo::score_info(designs, &mean, &state.corr, phi, config.h2_mode, exec)?;
                let step = linalg::solve_spd(&h2, &s2).map_err(|condition| GcrError::Estimation {
                    message: "pseudo-likelihood information H2 is singular".into(),
                    condition,
                })?;
                let mut lambda = config.step_lambda;
                let mut accepted = None;
                let tries = if config.backtracking { MAX_HALVINGS + 1 } else { 1 };
                for _ in 0..tries {
                    let cand = &alpha + &step * lambda;
                    let next = pseudo::pl_state(designs, &mean, &cand, Some(&state.corr), exec)?;
                    if !config.backtracking || next.pl >= state.pl {
                        accepted = Some((cand, next));
                        break;
                    }
                    lambda *= 0.5;
                }
                let Some((cand, next)) = accepted else {
                    backtrack_failures += 1;
                    log::debug!("alpha step abandoned after {MAX_HALVINGS} halvings");
                    break;
                };
                let change = max_rel_change(&alpha, &cand);
                alpha = cand;
                state = next;
                trace.push(state.pl);
                if change < config.tol_inner {
                    break;
                }
            }
            corr = state.corr;
            pl_trace.push(trace);
        }

        let rinv: Vec<DMatrix<f64>> = corr.iter().map(|c| c.rinv.clone()).collect();
        let (s1, h1) = gee::gee_totals(designs, &mean, Some(&rinv), exec);
        let beta_new = gee::scoring_update(&beta, &s1, &h1)?;
        let change = max_rel_change(&beta, &beta_new).max(max_rel_change(&alpha_prev, &alpha));
        beta = beta_new;
        if !beta.iter().all(|b| b.is_finite()) {
            return Err(GcrError::Numerical("mean coefficients diverged".into()));
        }
        if change < config.tol_outer {
            converged = true;
            break;
        }
    }

    let phi_hat = estimate_phi(designs, family, &beta)?;
    Ok(FitResult {
        family,
        mean_names: designs.mean_names.clone(),
        corr_names: designs.corr_names.clone(),
        beta_hat: beta,
        alpha_hat: alpha,
        phi_hat,
        converged,
        outer_iters,
        inner_iters,
        pl_trace,
        backtrack_failures,
        per_cluster_r: corr.into_iter().map(|c| c.sol.corr).collect(),
    })
}
