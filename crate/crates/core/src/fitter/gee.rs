//! Mean-model pieces: marginal moments, the dispersion estimate and the
//! GEE scoring step for `beta`.

use nalgebra::{DMatrix, DVector};

use super::linalg::solve_spd;
use crate::corr_manifold::{gz_inverse, GammaVector};
use crate::data::{ClusterDesign, DesignBundle};
use crate::error::{GcrError, Result};
use crate::exp_family::{moments_unchecked, Family};
use crate::par::Exec;

/// Per-cluster marginal quantities at fixed `(beta, phi)`.
#[derive(Debug, Clone)]
pub(crate) struct MeanPart {
    pub mu: DVector<f64>,
    pub dmu: DVector<f64>,
    /// `sqrt(phi a''(theta))`.
    pub sd: DVector<f64>,
    pub theta: DVector<f64>,
    pub kurt: DVector<f64>,
    /// `A^{-1/2} (y - mu)`.
    pub eps: DVector<f64>,
}

pub(crate) fn mean_part(
    c: &ClusterDesign,
    family: Family,
    beta: &DVector<f64>,
    phi: f64,
) -> Result<MeanPart> {
    let eta = &c.x * beta;
    let m = c.size();
    let mut mp = MeanPart {
        mu: DVector::zeros(m),
        dmu: DVector::zeros(m),
        sd: DVector::zeros(m),
        theta: DVector::zeros(m),
        kurt: DVector::zeros(m),
        eps: DVector::zeros(m),
    };
    for j in 0..m {
        if !eta[j].is_finite() {
            return Err(GcrError::Numerical(format!("linear predictor {} is not finite", eta[j])));
        }
        let mb = moments_unchecked(family, eta[j]);
        let var = phi * mb.var_unit;
        if !(var > 1e-300) || !var.is_finite() || !mb.mu.is_finite() {
            return Err(GcrError::Numerical(format!(
                "variance function degenerate at eta = {}",
                eta[j]
            )));
        }
        mp.mu[j] = mb.mu;
        mp.dmu[j] = mb.dmu_deta;
        mp.sd[j] = var.sqrt();
        mp.theta[j] = mb.theta;
        mp.kurt[j] = mb.kurt_ratio;
        mp.eps[j] = (c.y[j] - mb.mu) / mp.sd[j];
    }
    Ok(mp)
}

pub(crate) fn mean_parts(
    designs: &DesignBundle,
    family: Family,
    beta: &DVector<f64>,
    phi: f64,
    exec: Exec,
) -> Result<Vec<MeanPart>> {
    check_beta(designs, beta)?;
    exec.try_map_indexed(designs.n_clusters(), |i| mean_part(&designs.clusters[i], family, beta, phi))
}

fn check_beta(designs: &DesignBundle, beta: &DVector<f64>) -> Result<()> {
    if beta.len() != designs.p() {
        return Err(GcrError::Validation(format!(
            "beta has length {}, design has {} columns",
            beta.len(),
            designs.p()
        )));
    }
    Ok(())
}

/// Moment estimator `sum r^2 / (N - p)` from Pearson residuals; exactly one
/// for families with known dispersion.
pub fn estimate_phi(designs: &DesignBundle, family: Family, beta: &DVector<f64>) -> Result<f64> {
    let n = designs.total_obs();
    let p = designs.p();
    if n <= p {
        return Err(GcrError::Validation(format!(
            "need more observations than mean parameters (N = {n}, p = {p})"
        )));
    }
    if family.dispersion_known() {
        return Ok(1.0);
    }
    check_beta(designs, beta)?;
    let mut ss = 0.0;
    for c in &designs.clusters {
        let mp = mean_part(c, family, beta, 1.0)?;
        ss += mp.eps.norm_squared();
    }
    let phi = ss / (n - p) as f64;
    if !(phi > 0.0) || !phi.is_finite() {
        return Err(GcrError::Numerical(format!("dispersion estimate {phi} is not positive")));
    }
    Ok(phi)
}

/// One cluster's `(D^T V^-1 (y - mu), D^T V^-1 D)`; `rinv = None` means `R = I`.
pub(crate) fn gee_contribution(
    c: &ClusterDesign,
    mp: &MeanPart,
    rinv: Option<&DMatrix<f64>>,
) -> (DVector<f64>, DMatrix<f64>) {
    // A^{-1/2} D
    let mut dt = c.x.clone();
    for j in 0..c.size() {
        let s = mp.dmu[j] / mp.sd[j];
        dt.row_mut(j).scale_mut(s);
    }
    match rinv {
        Some(ri) => {
            let rd = ri * &dt;
            (rd.tr_mul(&mp.eps), dt.tr_mul(&rd))
        }
        None => (dt.tr_mul(&mp.eps), dt.tr_mul(&dt)),
    }
}

/// Sums of the GEE score `S1` and information `H1`.
pub(crate) fn gee_totals(
    designs: &DesignBundle,
    mean: &[MeanPart],
    rinv: Option<&[DMatrix<f64>]>,
    exec: Exec,
) -> (DVector<f64>, DMatrix<f64>) {
    let p = designs.p();
    let parts = exec.map_indexed(designs.n_clusters(), |i| {
        gee_contribution(&designs.clusters[i], &mean[i], rinv.map(|r| &r[i]))
    });
    let mut s1 = DVector::zeros(p);
    let mut h1 = DMatrix::zeros(p, p);
    for (s, h) in parts {
        s1 += s;
        h1 += h;
    }
    (s1, h1)
}

/// `beta + H1^-1 S1` given the score and information sums.
pub(crate) fn scoring_update(
    beta: &DVector<f64>,
    s1: &DVector<f64>,
    h1: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let step = solve_spd(h1, s1).map_err(|condition| GcrError::Estimation {
        message: "GEE information H1 is singular".into(),
        condition,
    })?;
    Ok(beta + step)
}

pub(crate) fn correlation_inverses(
    designs: &DesignBundle,
    alpha: &DVector<f64>,
    exec: Exec,
) -> Result<Vec<DMatrix<f64>>> {
    exec.try_map_indexed(designs.n_clusters(), |i| {
        let c = &designs.clusters[i];
        let gamma = GammaVector::new(c.size(), (&c.w * alpha).iter().copied().collect())?;
        let r = gz_inverse(&gamma)?;
        r.as_matrix()
            .clone()
            .cholesky()
            .map(|ch| ch.inverse())
            .ok_or_else(|| GcrError::Numerical("fitted correlation matrix lost definiteness".into()))
    })
}

/// One Fisher-scoring step `beta + H1^-1 S1` with working correlation
/// `R_i = gz_inverse(W_i alpha)`.
pub fn gee_step(
    designs: &DesignBundle,
    family: Family,
    beta: &DVector<f64>,
    alpha: &DVector<f64>,
    phi: f64,
) -> Result<DVector<f64>> {
    let (s1, h1) = gee_score_info(designs, family, beta, alpha, phi)?;
    scoring_update(beta, &s1, &h1)
}

/// The GEE score `S1` and information `H1` at `(beta, alpha, phi)`.
pub fn gee_score_info(
    designs: &DesignBundle,
    family: Family,
    beta: &DVector<f64>,
    alpha: &DVector<f64>,
    phi: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_alpha(designs, alpha)?;
    let exec = Exec::default();
    let mean = mean_parts(designs, family, beta, phi, exec)?;
    let rinv = correlation_inverses(designs, alpha, exec)?;
    Ok(gee_totals(designs, &mean, Some(&rinv), exec))
}

pub(crate) fn check_alpha(designs: &DesignBundle, alpha: &DVector<f64>) -> Result<()> {
    if alpha.len() != designs.d() {
        return Err(GcrError::Validation(format!(
            "alpha has length {}, correlation design has {} columns",
            alpha.len(),
            designs.d()
        )));
    }
    Ok(())
}

/// Starting linear predictor from the responses, nudged off the boundary.
fn initial_eta(family: Family, y: f64) -> f64 {
    match family {
        Family::Gaussian => y,
        Family::Poisson => (y + 0.1).ln(),
        Family::Bernoulli => {
            let p = (y + 0.5) / 2.0;
            (p / (1.0 - p)).ln()
        }
        Family::Gamma => y.ln(),
    }
}

/// Independence GLM fit (`R_i = I`) by Fisher scoring, used to start
/// [`super::fit_gcr`].
pub fn independence_glm(designs: &DesignBundle, family: Family, exec: Exec) -> Result<DVector<f64>> {
    let p = designs.p();
    let mut xtx = DMatrix::zeros(p, p);
    let mut xtz = DVector::zeros(p);
    for c in &designs.clusters {
        let z = c.y.map(|y| initial_eta(family, y));
        xtx += c.x.tr_mul(&c.x);
        xtz += c.x.tr_mul(&z);
    }
    let mut beta = solve_spd(&xtx, &xtz).map_err(|condition| GcrError::Estimation {
        message: "mean design matrix is rank deficient".into(),
        condition,
    })?;
    for _ in 0..100 {
        let mean = mean_parts(designs, family, &beta, 1.0, exec)?;
        let (s1, h1) = gee_totals(designs, &mean, None, exec);
        let next = scoring_update(&beta, &s1, &h1)?;
        let change = super::max_rel_change(&beta, &next);
        beta = next;
        if change < 1e-12 {
            break;
        }
    }
    Ok(beta)
}
