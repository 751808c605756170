//! Standard errors and Wald tests for `beta` and `alpha`.
//!
//! `cov(beta) = H1^-1` at the estimate. For `alpha` the sandwich
//! `A^-1 M A^-1` is used, with `A` a symmetrized central-difference
//! Hessian of the pseudo-likelihood and `M` the empirical outer product
//! of per-cluster scores. When the dispersion is estimated, each score is
//! first augmented by the linearized effect of that cluster on `phi_hat`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::corr_manifold::condition_estimate;
use crate::data::DesignBundle;
use crate::error::{GcrError, Result};
use crate::exp_family::pearson_residual;
use crate::fitter::{cluster_scores, gee_score_info, pl_info_h2, pl_score_s2, sym_inverse, FitResult, H2Mode};
use crate::simgen::norm_cdf;

/// Relative step used by [`numerical_hessian`] when none is given.
pub const DEFAULT_HESSIAN_STEP: f64 = 1e-5;

/// Symmetrized central-difference Jacobian of a vector field `g` at `x`
/// with per-coordinate steps `h`.
pub fn symmetric_jacobian<F>(g: F, x: &DVector<f64>, h: &[f64]) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let d = x.len();
    if h.len() != d || h.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(GcrError::Validation("finite-difference steps must be positive".into()));
    }
    let mut a = DMatrix::zeros(d, d);
    for j in 0..d {
        let mut up = x.clone();
        let mut down = x.clone();
        up[j] += h[j];
        down[j] -= h[j];
        let col = (g(&up)? - g(&down)?) / (2.0 * h[j]);
        if col.len() != d {
            return Err(GcrError::Validation("gradient has the wrong length".into()));
        }
        a.set_column(j, &col);
    }
    let a = (&a + a.transpose()) * 0.5;
    if a.iter().any(|v| !v.is_finite()) {
        return Err(GcrError::Numerical(
            "finite-difference Hessian has non-finite entries; try a larger step".into(),
        ));
    }
    Ok(a)
}

/// Hessian of the pseudo-log-likelihood in `alpha` at the fitted values,
/// from central differences of `S2`. With `step = None` coordinate `j`
/// uses `1e-5 max(1, |alpha_j|)`; otherwise every coordinate uses `step`.
pub fn numerical_hessian(
    fit: &FitResult,
    designs: &DesignBundle,
    step: Option<f64>,
) -> Result<DMatrix<f64>> {
    let h: Vec<f64> = match step {
        Some(s) => vec![s; fit.alpha_hat.len()],
        None => fit.alpha_hat.iter().map(|a| DEFAULT_HESSIAN_STEP * a.abs().max(1.0)).collect(),
    };
    symmetric_jacobian(
        |alpha| pl_score_s2(designs, fit.family, &fit.beta_hat, alpha, fit.phi_hat),
        &fit.alpha_hat,
        &h,
    )
}

#[derive(Debug, Clone)]
pub struct ParamCovariances {
    pub cov_beta: DMatrix<f64>,
    pub cov_alpha: DMatrix<f64>,
    /// The Hessian used for the `alpha` sandwich.
    pub hessian: DMatrix<f64>,
}

fn invert(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    sym_inverse(a).map_err(|cond| {
        GcrError::Inference(format!("{what} is singular (condition estimate {cond:.3e})"))
    })
}

/// Middle matrix of the `alpha` sandwich.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMeat {
    /// Outer product of the scores with `beta` and `phi` treated as known.
    Conditional,
    /// Scores augmented by `(dS2/dphi) g_i`, where `g_i` is cluster `i`'s
    /// contribution to `phi_hat - phi`. Identical to `Conditional` for
    /// families with known dispersion.
    #[default]
    DispersionAdjusted,
}

/// Model-based `cov(beta)` and sandwich `cov(alpha)` at the fit.
pub fn param_covariances(fit: &FitResult, designs: &DesignBundle) -> Result<ParamCovariances> {
    param_covariances_with(fit, designs, AlphaMeat::default())
}

pub fn param_covariances_with(
    fit: &FitResult,
    designs: &DesignBundle,
    meat: AlphaMeat,
) -> Result<ParamCovariances> {
    let (_, h1) = gee_score_info(designs, fit.family, &fit.beta_hat, &fit.alpha_hat, fit.phi_hat)?;
    let cov_beta = invert(&h1, "mean information H1")?;
    let hessian = numerical_hessian(fit, designs, None)?;
    let a_inv = invert(&hessian, "pseudo-likelihood Hessian")?;
    let middle = if meat == AlphaMeat::DispersionAdjusted && !fit.family.dispersion_known() {
        dispersion_adjusted_meat(fit, designs)?
    } else {
        pl_info_h2(designs, fit.family, &fit.beta_hat, &fit.alpha_hat, fit.phi_hat, H2Mode::OuterProduct)?
    };
    let s = &a_inv * middle * &a_inv;
    let cov_alpha = (&s + s.transpose()) * 0.5;
    Ok(ParamCovariances { cov_beta, cov_alpha, hessian })
}

/// `sum_i (s_i + b g_i)(s_i + b g_i)^T` with `b = dS2/dphi` and
/// `g_i = (sum_j r_ij^2 - m_i phi (N - p) / N) / (N - p)`, so that the `g_i`
/// sum to zero at `phi_hat`.
fn dispersion_adjusted_meat(fit: &FitResult, designs: &DesignBundle) -> Result<DMatrix<f64>> {
    let (beta, alpha, phi) = (&fit.beta_hat, &fit.alpha_hat, fit.phi_hat);
    let h = DEFAULT_HESSIAN_STEP * phi;
    let b = (pl_score_s2(designs, fit.family, beta, alpha, phi + h)?
        - pl_score_s2(designs, fit.family, beta, alpha, phi - h)?)
        / (2.0 * h);
    let n = designs.total_obs() as f64;
    let dof = n - designs.p() as f64;
    let scores = cluster_scores(designs, fit.family, beta, alpha, phi)?;
    let mut meat = DMatrix::zeros(alpha.len(), alpha.len());
    for (c, s) in designs.clusters.iter().zip(scores) {
        let eta = &c.x * beta;
        let mut rss = 0.0;
        for (y, e) in c.y.iter().zip(eta.iter()) {
            rss += pearson_residual(fit.family, *y, *e, phi)?.powi(2);
        }
        let g = (rss - c.size() as f64 * phi * dof / n) / dof;
        let u = s + &b * g;
        meat += &u * u.transpose();
    }
    Ok(meat)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaldRow {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub z_stat: f64,
    pub p_value: f64,
    pub stars: &'static str,
}

impl WaldRow {
    /// Two-sided normal confidence interval.
    pub fn confidence_interval(&self, level: f64) -> (f64, f64) {
        let q = crate::simgen::norm_quantile(0.5 + level / 2.0);
        (self.estimate - q * self.std_error, self.estimate + q * self.std_error)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaldTable {
    pub rows: Vec<WaldRow>,
}

/// Two-sided normal p-value `2 (1 - Phi(|z|))`.
pub fn two_sided_p(z: f64) -> f64 {
    (2.0 * norm_cdf(-z.abs())).min(1.0)
}

pub fn significance_stars(p: f64) -> &'static str {
    match p {
        p if p < 0.001 => "***",
        p if p < 0.01 => "**",
        p if p < 0.05 => "*",
        p if p < 0.1 => ".",
        _ => "",
    }
}

impl WaldTable {
    pub fn new(names: &[String], estimates: &DVector<f64>, cov: &DMatrix<f64>) -> Result<WaldTable> {
        if names.len() != estimates.len() || cov.nrows() != estimates.len() || !cov.is_square() {
            return Err(GcrError::Validation("Wald table inputs have mismatched sizes".into()));
        }
        let rows = names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let var = cov[(j, j)];
                if !(var > 0.0) || !var.is_finite() {
                    return Err(GcrError::Inference(format!(
                        "variance of '{name}' is {var:.3e}; cannot form a Wald statistic (condition estimate {:.3e})",
                        condition_estimate(cov)
                    )));
                }
                let se = var.sqrt();
                let z = estimates[j] / se;
                let p = two_sided_p(z);
                Ok(WaldRow {
                    name: name.clone(),
                    estimate: estimates[j],
                    std_error: se,
                    z_stat: z,
                    p_value: p,
                    stars: significance_stars(p),
                })
            })
            .collect::<Result<_>>()?;
        Ok(WaldTable { rows })
    }

    pub fn get(&self, name: &str) -> Option<&WaldRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// Wald tables for `beta` and `alpha`.
pub fn wald_table(fit: &FitResult, covs: &ParamCovariances) -> Result<(WaldTable, WaldTable)> {
    Ok((
        WaldTable::new(&fit.mean_names, &fit.beta_hat, &covs.cov_beta)?,
        WaldTable::new(&fit.corr_names, &fit.alpha_hat, &covs.cov_alpha)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_designs, parse_corr_formula, parse_mean_formula};
    use crate::exp_family::Family;
    use crate::fitter::{fit_designs, pl_objective, FitConfig};
    use crate::simgen::{make_scenario, ScenarioSpec, Study};

    #[test]
    fn quadratic_hessian_is_exact() {
        // f(x) = -|x|^2, gradient -2x.
        let x = DVector::from_column_slice(&[0.3, -1.2, 2.0]);
        let a = symmetric_jacobian(|v| Ok(v * -2.0), &x, &[1e-5; 3]).unwrap();
        assert!((a + DMatrix::identity(3, 3) * 2.0).amax() < 1e-6);
    }

    #[test]
    fn p_values() {
        assert_eq!(two_sided_p(0.0), 1.0);
        assert!((two_sided_p(1.959964) - 0.05).abs() < 1e-6);
        assert!((two_sided_p(-0.6745) - 0.5).abs() < 1e-3);
        assert_eq!(significance_stars(0.0005), "***");
        assert_eq!(significance_stars(0.07), ".");
        assert_eq!(significance_stars(0.2), "");
    }

    #[test]
    fn nonpositive_variance_is_rejected() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let names = vec!["a".to_string(), "b".to_string()];
        let err = WaldTable::new(&names, &DVector::from_column_slice(&[1.0, 2.0]), &cov).unwrap_err();
        assert!(matches!(err, GcrError::Inference(_)));
    }

    fn small_fit(n: usize) -> (DesignBundle, FitResult) {
        let g = make_scenario(ScenarioSpec::new(Study::Study1Gaussian, n, 4)).unwrap();
        let designs = build_designs(
            &g.dataset,
            &parse_mean_formula(&g.mean_formula).unwrap(),
            &parse_corr_formula(&g.corr_formula).unwrap(),
        )
        .unwrap();
        let fit = fit_designs(&designs, g.family, &FitConfig::default()).unwrap();
        (designs, fit)
    }

    #[test]
    fn hessian_matches_second_differences_of_objective() {
        let (designs, fit) = small_fit(60);
        let a = numerical_hessian(&fit, &designs, None).unwrap();
        let f = |al: &DVector<f64>| pl_objective(&designs, fit.family, &fit.beta_hat, al, fit.phi_hat).unwrap();
        let h = 1e-3;
        let d = fit.alpha_hat.len();
        for j in 0..d {
            for k in 0..d {
                let e = |i: usize, s: f64| {
                    let mut v = DVector::zeros(d);
                    v[i] = s;
                    v
                };
                let x = &fit.alpha_hat;
                let fd = (f(&(x + e(j, h) + e(k, h))) - f(&(x + e(j, h) - e(k, h)))
                    - f(&(x - e(j, h) + e(k, h)))
                    + f(&(x - e(j, h) - e(k, h))))
                    / (4.0 * h * h);
                assert!((a[(j, k)] - fd).abs() < 1e-3 * a[(j, k)].abs().max(1.0), "{j},{k}");
            }
        }
        let a1 = numerical_hessian(&fit, &designs, Some(1e-4)).unwrap();
        let a2 = numerical_hessian(&fit, &designs, Some(5e-5)).unwrap();
        assert!((&a1 - &a2).amax() < 1e-6 * a1.amax());
    }

    #[test]
    fn hessian_is_step_robust() {
        let (designs, fit) = small_fit(20);
        let a1 = numerical_hessian(&fit, &designs, Some(1e-4)).unwrap();
        let a2 = numerical_hessian(&fit, &designs, Some(5e-5)).unwrap();
        assert!((&a1 - &a2).amax() < 1e-4);
    }

    #[test]
    fn sandwich_is_symmetric_psd() {
        let (designs, fit) = small_fit(60);
        let covs = param_covariances(&fit, &designs).unwrap();
        assert_eq!(covs.cov_alpha, covs.cov_alpha.transpose());
        let eig = covs.cov_alpha.clone().symmetric_eigen().eigenvalues;
        assert!(eig.min() > -1e-10);
        let (bt, at) = wald_table(&fit, &covs).unwrap();
        assert_eq!(bt.rows.len(), 3);
        assert_eq!(at.rows.len(), 3);
        for r in bt.rows.iter().chain(&at.rows) {
            assert!((r.z_stat - r.estimate / r.std_error).abs() < 1e-12);
        }
    }

    #[test]
    fn ols_covariance_under_independence() {
        let g = make_scenario(ScenarioSpec::new(Study::Study1Gaussian, 40, 9)).unwrap();
        let designs = build_designs(
            &g.dataset,
            &parse_mean_formula("x1 + x2").unwrap(),
            &parse_corr_formula("intercept").unwrap(),
        )
        .unwrap();
        let cfg = FitConfig { fixed_alpha: Some(vec![0.0]), ..FitConfig::default() };
        let fit = fit_designs(&designs, Family::Gaussian, &cfg).unwrap();
        let (_, h1) = gee_score_info(&designs, fit.family, &fit.beta_hat, &fit.alpha_hat, fit.phi_hat).unwrap();
        let cov = sym_inverse(&h1).unwrap();
        let mut xtx = DMatrix::zeros(3, 3);
        for c in &designs.clusters {
            xtx += c.x.transpose() * &c.x;
        }
        let want = xtx.try_inverse().unwrap() * fit.phi_hat;
        assert!((cov - want).amax() < 1e-8);
    }

    #[test]
    fn dispersion_adjustment_only_touches_estimated_phi() {
        let g = make_scenario(ScenarioSpec::new(Study::Study1Bernoulli, 60, 2)).unwrap();
        let designs = build_designs(
            &g.dataset,
            &parse_mean_formula(&g.mean_formula).unwrap(),
            &parse_corr_formula(&g.corr_formula).unwrap(),
        )
        .unwrap();
        let fit = fit_designs(&designs, g.family, &FitConfig::default()).unwrap();
        let a = param_covariances_with(&fit, &designs, AlphaMeat::Conditional).unwrap();
        let b = param_covariances_with(&fit, &designs, AlphaMeat::DispersionAdjusted).unwrap();
        assert_eq!(a.cov_alpha, b.cov_alpha);

        let (designs, fit) = small_fit(60);
        let a = param_covariances_with(&fit, &designs, AlphaMeat::Conditional).unwrap();
        let b = param_covariances_with(&fit, &designs, AlphaMeat::DispersionAdjusted).unwrap();
        assert_eq!(a.cov_beta, b.cov_beta);
        assert!((&a.cov_alpha - &b.cov_alpha).amax() > 1e-8 * a.cov_alpha.amax());
        assert!(b.cov_alpha.clone().symmetric_eigen().eigenvalues.min() > -1e-10);
    }

    #[test]
    fn dispersion_contributions_sum_to_zero() {
        let (designs, fit) = small_fit(40);
        let n = designs.total_obs() as f64;
        let dof = n - designs.p() as f64;
        let total: f64 = designs
            .clusters
            .iter()
            .map(|c| {
                let eta = &c.x * &fit.beta_hat;
                let rss: f64 = c
                    .y
                    .iter()
                    .zip(eta.iter())
                    .map(|(y, e)| pearson_residual(fit.family, *y, *e, fit.phi_hat).unwrap().powi(2))
                    .sum();
                (rss - c.size() as f64 * fit.phi_hat * dof / n) / dof
            })
            .sum();
        assert!(total.abs() < 1e-10 * fit.phi_hat);
    }
}
