//! Gaussian pseudo-likelihood for the correlation coefficients `alpha`:
//! objective, score `S2`, and the information `H2` in its outer-product and
//! pseudo-expectation forms.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::gee::{check_alpha, mean_parts, MeanPart};
use crate::corr_manifold::{
    gz_inverse_with, jacobian_apply, vecl_pairs, CorrMatrix, FixedPointOptions, GammaVector,
    InverseSolution, LogSpectrum,
};
use crate::data::{ClusterDesign, DesignBundle};
use crate::error::{GcrError, Result};
use crate::exp_family::Family;
use crate::par::Exec;

/// Which form of `H2` to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum H2Mode {
    /// `sum_i s_i s_i^T` from the per-cluster scores.
    OuterProduct,
    /// Pseudo-expectation of `eta eta^T` under the diagonal-cumulant rule.
    #[default]
    PseudoExpectation,
}

/// Correlation state of one cluster at a given `alpha`.
#[derive(Debug, Clone)]
pub(crate) struct CorrPart {
    pub sol: InverseSolution,
    pub rinv: DMatrix<f64>,
}

impl CorrPart {
    pub fn spectrum(&self) -> &LogSpectrum {
        &self.sol.spectrum
    }
}

pub(crate) fn corr_part(
    c: &ClusterDesign,
    alpha: &DVector<f64>,
    warm: Option<&[f64]>,
) -> Result<CorrPart> {
    let m = c.size();
    let gamma = GammaVector::new(m, (&c.w * alpha).iter().copied().collect())?;
    let sol = match gz_inverse_with(&gamma, warm, FixedPointOptions::default()) {
        Ok(s) => s,
        // A warm start far from the new solution can in principle stall;
        // retry from the default origin before giving up.
        Err(_) if warm.is_some() => gz_inverse_with(&gamma, None, FixedPointOptions::default())?,
        Err(e) => return Err(e),
    };
    let rinv = sol.spectrum.power(-1.0);
    Ok(CorrPart { sol, rinv })
}

pub(crate) fn corr_parts(
    designs: &DesignBundle,
    alpha: &DVector<f64>,
    warm: Option<&[CorrPart]>,
    exec: Exec,
) -> Result<Vec<CorrPart>> {
    exec.try_map_indexed(designs.n_clusters(), |i| {
        corr_part(&designs.clusters[i], alpha, warm.map(|w| w[i].sol.diagonal.as_slice()))
    })
}

/// `-1/2 [log|R| + eps^T R^-1 eps]` for one cluster.
pub(crate) fn cluster_pl(mp: &MeanPart, cp: &CorrPart) -> f64 {
    let q = mp.eps.dot(&(&cp.rinv * &mp.eps));
    -0.5 * (cp.spectrum().logdet() + q)
}

/// `eta = vecl(R^-1 eps eps^T R^-1 - R^-1)`.
fn eta_vector(mp: &MeanPart, cp: &CorrPart) -> DVector<f64> {
    let u = &cp.rinv * &mp.eps;
    let pairs = vecl_pairs(mp.eps.len());
    DVector::from_iterator(pairs.len(), pairs.iter().map(|&(j, k)| u[j] * u[k] - cp.rinv[(j, k)]))
}

/// Pseudo-expectation of `eta eta^T` given `R^-1`, `R^-1/2` and the
/// per-observation `phi a''''/a''^2`.
fn pseudo_j(a: &DMatrix<f64>, b: &DMatrix<f64>, kurt_phi: &[f64]) -> DMatrix<f64> {
    let m = a.nrows();
    let pairs = vecl_pairs(m);
    let np = pairs.len();
    let mut j = DMatrix::from_fn(np, np, |p, q| {
        let (pj, pk) = pairs[p];
        let (ql, qs) = pairs[q];
        a[(pj, ql)] * a[(pk, qs)] + a[(pj, qs)] * a[(pk, ql)]
    });
    if kurt_phi.iter().any(|&k| k != 0.0) {
        // Sum_t kappa_t c_t(p) c_t(q) with c_t(p) = b_tj b_tk.
        let c = DMatrix::from_fn(m, np, |t, p| b[(t, pairs[p].0)] * b[(t, pairs[p].1)]);
        let mut kc = c.clone();
        for (mut row, k) in kc.row_iter_mut().zip(kurt_phi.iter()) {
            row.scale_mut(*k);
        }
        j += c.tr_mul(&kc);
    }
    j
}

/// Score and pseudo information of one cluster.
pub(crate) struct ClusterTerms {
    pub score: DVector<f64>,
    pub info: Option<DMatrix<f64>>,
}

pub(crate) fn cluster_terms(
    c: &ClusterDesign,
    mp: &MeanPart,
    cp: &CorrPart,
    phi: f64,
    pseudo_info: bool,
) -> Result<ClusterTerms> {
    let d = c.w.ncols();
    if c.size() < 2 {
        return Ok(ClusterTerms {
            score: DVector::zeros(d),
            info: pseudo_info.then(|| DMatrix::zeros(d, d)),
        });
    }
    let g = jacobian_apply(cp.spectrum(), &c.w)?;
    let eta = eta_vector(mp, cp);
    let score = g.tr_mul(&eta);
    let info = if pseudo_info {
        let b = cp.spectrum().power(-0.5);
        let kphi: Vec<f64> = mp.kurt.iter().map(|k| phi * k).collect();
        let j = pseudo_j(&cp.rinv, &b, &kphi);
        Some(g.tr_mul(&(j * &g)))
    } else {
        None
    };
    Ok(ClusterTerms { score, info })
}

/// Everything the scoring loop needs at one `alpha`.
pub(crate) struct PlState {
    pub corr: Vec<CorrPart>,
    pub pl: f64,
}

pub(crate) fn pl_state(
    designs: &DesignBundle,
    mean: &[MeanPart],
    alpha: &DVector<f64>,
    warm: Option<&[CorrPart]>,
    exec: Exec,
) -> Result<PlState> {
    let corr = corr_parts(designs, alpha, warm, exec)?;
    let pl = mean.iter().zip(&corr).map(|(m, c)| cluster_pl(m, c)).sum();
    Ok(PlState { corr, pl })
}

/// `(S2, H2)` at a state, with per-cluster terms summed in cluster order.
pub(crate) fn score_info(
    designs: &DesignBundle,
    mean: &[MeanPart],
    corr: &[CorrPart],
    phi: f64,
    mode: H2Mode,
    exec: Exec,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let d = designs.d();
    let pseudo = mode == H2Mode::PseudoExpectation;
    let terms = exec.try_map_indexed(designs.n_clusters(), |i| {
        cluster_terms(&designs.clusters[i], &mean[i], &corr[i], phi, pseudo)
    })?;
    let mut s2 = DVector::zeros(d);
    let mut h2 = DMatrix::zeros(d, d);
    for t in terms {
        match t.info {
            Some(info) => h2 += info,
            None => h2 += &t.score * t.score.transpose(),
        }
        s2 += t.score;
    }
    Ok((s2, h2))
}

fn prepare(
    designs: &DesignBundle,
    family: Family,
    beta: &DVector<f64>,
    alpha: &DVector<f64>,
    phi: f64,
) -> Result<(Vec<MeanPart>, Vec<CorrPart>)> {
    check_alpha(designs, alpha)?;
    if !(phi > 0.0) || !phi.is_finite() {
        return Err(GcrError::Validation(format!("dispersion {phi} must be positive")));
    }
    let exec = Exec::default();
    let mean = mean_parts(designs, family, beta, phi, exec)?;
    let corr = corr_parts(designs, alpha, None, exec)?;
    Ok((mean, corr))
}

/// Pseudo-log-likelihood `-1/2 sum_i [log|R_i| + nu_i^T R_i^-1 nu_i]` with
/// `nu_i = A_i^{-1/2} (y_i - mu_i)`. Larger is better.
pub fn pl_objective(
    designs: &DesignBundle,
    family: Family,
    beta: &DVector<f64>,
    alpha: &DVector<f64>,
    phi: f64,
) -> Result<f64> {
    let (mean, corr) = prepare(designs, family, beta, alpha, phi)?;
    Ok(mean.iter().zip(&corr).map(|(m, c)| cluster_pl(m, c)).sum())
}

/// Gradient of [`pl_objective`] with respect to `alpha`.
pub fn pl_score_s2(
    designs: &DesignBundle,
    family: Family,
    beta: &DVector<f64>,
    alpha: &DVector<f64>,
    phi: f64,
) -> Result<DVector<f64>> {
    let mut s2 = DVector::zeros(designs.d());
    for s in cluster_scores(designs, family, beta, alpha, phi)? {
        s2 += s;
    }
    Ok(s2)
}

/// Per-cluster summands `s_i` of `S2`, in cluster order.
pub fn cluster_scores(
    designs: &DesignBundle,
    family: Family,
    beta: &DVector<f64>,
    alpha: &DVector<f64>,
    phi: f64,
) -> Result<Vec<DVector<f64>>> {
    let (mean, corr) = prepare(designs, family, beta, alpha, phi)?;
    let exec = Exec::default();
    let terms = exec.try_map_indexed(designs.n_clusters(), |i| {
        cluster_terms(&designs.clusters[i], &mean[i], &corr[i], phi, false)
    })?;
    Ok(terms.into_iter().map(|t| t.score).collect())
}

/// Information matrix `H2` for `alpha`.
pub fn pl_info_h2(
    designs: &DesignBundle,
    family: Family,
    beta: &DVector<f64>,
    alpha: &DVector<f64>,
    phi: f64,
    mode: H2Mode,
) -> Result<DMatrix<f64>> {
    let (mean, corr) = prepare(designs, family, beta, alpha, phi)?;
    Ok(score_info(designs, &mean, &corr, phi, mode, Exec::default())?.1)
}

/// Pseudo-expectation of `eta eta^T` for one cluster with correlation `r`
/// and canonical parameters `theta`:
/// `a_jl a_ks + a_js a_kl + phi sum_t kappa_t b_tj b_ts b_tk b_tl`, where
/// `a` and `b` are entries of `R^-1` and `R^-1/2` and
/// `kappa_t = a''''/a''^2` at `theta_t`.
pub fn pseudo_expectation_j(
    family: Family,
    r: &CorrMatrix,
    theta: &[f64],
    phi: f64,
) -> Result<DMatrix<f64>> {
    let m = r.dim();
    if theta.len() != m {
        return Err(GcrError::Validation(format!(
            "theta has length {}, correlation matrix is {m}x{m}",
            theta.len()
        )));
    }
    let spec = crate::corr_manifold::log_spectrum(r)?;
    let a = spec.power(-1.0);
    let b = spec.power(-0.5);
    let kphi: Vec<f64> = theta
        .iter()
        .map(|&t| match family {
            Family::Gaussian => 0.0,
            _ => {
                let [_, a2, _, a4] = family.cumulant_derivatives(t);
                phi * a4 / (a2 * a2)
            }
        })
        .collect();
    Ok(pseudo_j(&a, &b, &kphi))
}
