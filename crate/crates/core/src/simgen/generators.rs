//! Correlated Gaussian, Bernoulli and Poisson vectors with a target
//! correlation matrix.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::normal::{bvn_cdf, norm_cdf, norm_pdf, norm_quantile};
use crate::corr_manifold::CorrMatrix;
use crate::error::{GcrError, Result};

const BISECTION_TOL: f64 = 1e-10;

fn standard_normals<R: Rng + ?Sized>(m: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn cholesky_factor(s: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    s.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| GcrError::Feasibility(format!("{what} is not positive definite")))
}

/// Bisection for an increasing function on `[lo, hi]`.
fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64, target: f64) -> f64 {
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Multivariate normal sampler `mu + L z`.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    mu: DVector<f64>,
    chol: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn new(mu: &[f64], sigma: &DMatrix<f64>) -> Result<Self> {
        if sigma.nrows() != mu.len() || sigma.ncols() != mu.len() {
            return Err(GcrError::Validation("mean and covariance sizes differ".into()));
        }
        Ok(GaussianSampler { mu: DVector::from_column_slice(mu), chol: cholesky_factor(sigma, "covariance")? })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = standard_normals(self.mu.len(), rng);
        (&self.mu + &self.chol * z).iter().copied().collect()
    }
}

pub fn gen_gaussian_cluster<R: Rng + ?Sized>(
    mu: &[f64],
    sigma: &DMatrix<f64>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(GaussianSampler::new(mu, sigma)?.sample(rng))
}

/// Attainable correlation range of two Bernoulli variables.
pub fn frechet_bounds(p1: f64, p2: f64) -> (f64, f64) {
    let (q1, q2) = (1.0 - p1, 1.0 - p2);
    let s = (p1 * q1 * p2 * q2).sqrt();
    let lo = ((p1 + p2 - 1.0).max(0.0) - p1 * p2) / s;
    let hi = (p1.min(p2) - p1 * p2) / s;
    (lo, hi)
}

/// Latent normal correlation `delta` with
/// `Phi2(z1, z2; delta) = target sqrt(p1 q1 p2 q2) + p1 p2`.
pub fn solve_tetrachoric(p1: f64, p2: f64, target_corr: f64) -> Result<f64> {
    if !(p1 > 0.0 && p1 < 1.0 && p2 > 0.0 && p2 < 1.0) {
        return Err(GcrError::Validation(format!(
            "marginal probabilities ({p1}, {p2}) must lie in (0, 1)"
        )));
    }
    let (lo, hi) = frechet_bounds(p1, p2);
    if !(target_corr >= lo && target_corr <= hi) {
        return Err(GcrError::Feasibility(format!(
            "correlation {target_corr} outside the Fréchet bounds [{lo:.6}, {hi:.6}] for p = ({p1}, {p2})"
        )));
    }
    if target_corr == 0.0 {
        return Ok(0.0);
    }
    let (z1, z2) = (norm_quantile(p1), norm_quantile(p2));
    let joint = target_corr * (p1 * (1.0 - p1) * p2 * (1.0 - p2)).sqrt() + p1 * p2;
    Ok(bisect(-1.0, 1.0, |d| bvn_cdf(z1, z2, d), joint))
}

/// Thresholded latent normal sampler for binary vectors: `y_t = 1` when
/// `Z_t <= Phi^-1(p_t)`.
#[derive(Debug, Clone)]
pub struct BernoulliSampler {
    thresholds: Vec<f64>,
    chol: DMatrix<f64>,
}

impl BernoulliSampler {
    pub fn new(p: &[f64], r_target: &CorrMatrix) -> Result<Self> {
        let m = p.len();
        if r_target.dim() != m {
            return Err(GcrError::Validation("probabilities and correlation sizes differ".into()));
        }
        let r = r_target.as_matrix();
        let mut delta = DMatrix::identity(m, m);
        for j in 0..m {
            for k in 0..j {
                let d = solve_tetrachoric(p[j], p[k], r[(j, k)])?;
                delta[(j, k)] = d;
                delta[(k, j)] = d;
            }
        }
        Ok(BernoulliSampler {
            thresholds: p.iter().map(|&pt| norm_quantile(pt)).collect(),
            chol: cholesky_factor(&delta, "latent tetrachoric matrix")?,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = &self.chol * standard_normals(self.thresholds.len(), rng);
        z.iter().zip(&self.thresholds).map(|(zt, th)| if zt <= th { 1.0 } else { 0.0 }).collect()
    }
}

pub fn gen_bernoulli_cluster<R: Rng + ?Sized>(
    p: &[f64],
    r_target: &CorrMatrix,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(BernoulliSampler::new(p, r_target)?.sample(rng))
}

/// Number of Hermite terms in the latent-correlation series.
const HERMITE_TERMS: usize = 400;
/// Beyond this latent correlation the series is replaced by the exact
/// double sum of bivariate normal probabilities.
const SERIES_LIMIT: f64 = 0.9;

/// One Poisson margin prepared for NORTA matching and sampling.
#[derive(Debug, Clone)]
pub(crate) struct PoissonMargin {
    mu: f64,
    /// `P(Y <= a)` for `a = 0..`.
    cdf: Vec<f64>,
    /// `P(Y > a)`, accurate in the upper tail.
    sf: Vec<f64>,
    /// Latent thresholds: `Y > a` iff `Z > z_a`.
    z: Vec<f64>,
    /// Normalized Hermite coefficients `E[Y He_n(Z)] / sqrt(n!)`, `n >= 1`.
    coef: Vec<f64>,
}

impl PoissonMargin {
    pub(crate) fn new(mu: f64) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() || mu > 1e4 {
            return Err(GcrError::Validation(format!("Poisson mean {mu} out of range")));
        }
        let amax = (mu + 12.0 * mu.sqrt() + 30.0).ceil() as usize;
        let mut pmf = Vec::with_capacity(amax + 1);
        let mut log_fact = 0.0;
        for a in 0..=amax {
            if a > 0 {
                log_fact += (a as f64).ln();
            }
            pmf.push((a as f64 * mu.ln() - mu - log_fact).exp());
        }
        let mut sf = vec![0.0; amax + 1];
        let mut tail = 0.0;
        for a in (0..=amax).rev() {
            sf[a] = tail;
            tail += pmf[a];
        }
        let mut cdf = Vec::with_capacity(amax + 1);
        let mut acc = 0.0;
        for p in &pmf {
            acc += p;
            cdf.push(acc.min(1.0));
        }
        let z: Vec<f64> = sf
            .iter()
            .take_while(|&&s| s > 1e-300)
            .map(|&s| -norm_quantile(s))
            .collect();
        let mut coef = vec![0.0; HERMITE_TERMS];
        for &za in &z {
            let w = norm_pdf(za);
            // h_n = He_n / sqrt(n!) by the normalized three-term recurrence.
            let (mut h_prev, mut h) = (0.0, 1.0);
            for (n1, c) in coef.iter_mut().enumerate() {
                // term n = n1 + 1 uses h_{n-1}
                *c += w * h / ((n1 + 1) as f64).sqrt();
                let n = n1 as f64;
                let next = (za * h - n.sqrt() * h_prev) / (n + 1.0).sqrt();
                h_prev = h;
                h = next;
            }
        }
        Ok(PoissonMargin { mu, cdf, sf, z, coef })
    }

    fn quantile_from_normal(&self, zv: f64) -> f64 {
        let count = if zv <= 0.0 {
            let u = norm_cdf(zv);
            self.cdf.partition_point(|&c| c < u)
        } else {
            let s = norm_cdf(-zv);
            self.sf.partition_point(|&t| t > s)
        };
        count as f64
    }
}

/// `corr(Y1, Y2)` induced by latent correlation `r`.
fn induced_corr(a: &PoissonMargin, b: &PoissonMargin, r: f64) -> f64 {
    let scale = (a.mu * b.mu).sqrt();
    if r.abs() <= SERIES_LIMIT {
        let mut acc = 0.0;
        let mut rp = 1.0;
        for (ca, cb) in a.coef.iter().zip(&b.coef) {
            rp *= r;
            acc += rp * ca * cb;
        }
        acc / scale
    } else {
        // E[Y1 Y2] = sum_{a,b} P(Z1 > z_a, Z2 > z_b).
        let mut e = 0.0;
        for &za in &a.z {
            for &zb in &b.z {
                e += bvn_cdf(-za, -zb, r);
            }
        }
        (e - a.mu * b.mu) / scale
    }
}

/// Correlation bounds for two Poisson margins (comonotone and
/// antithetic couplings).
fn poisson_bounds(a: &PoissonMargin, b: &PoissonMargin) -> (f64, f64) {
    let scale = (a.mu * b.mu).sqrt();
    let mut hi = 0.0;
    let mut lo = 0.0;
    for &sa in &a.sf {
        for &sb in &b.sf {
            hi += sa.min(sb);
            lo += (sa + sb - 1.0).max(0.0);
        }
    }
    ((lo - a.mu * b.mu) / scale, (hi - a.mu * b.mu) / scale)
}

/// Latent normal correlation reproducing `target` between two Poisson
/// margins.
pub fn solve_poisson_latent(mu1: f64, mu2: f64, target: f64) -> Result<f64> {
    let a = PoissonMargin::new(mu1)?;
    let b = PoissonMargin::new(mu2)?;
    match_margins(&a, &b, target)
}

fn match_margins(a: &PoissonMargin, b: &PoissonMargin, target: f64) -> Result<f64> {
    if target == 0.0 {
        return Ok(0.0);
    }
    let (lo, hi) = poisson_bounds(a, b);
    if !(target > lo && target < hi) {
        return Err(GcrError::Feasibility(format!(
            "correlation {target} unattainable for Poisson means ({}, {}); range ({lo:.6}, {hi:.6})",
            a.mu, b.mu
        )));
    }
    Ok(bisect(-1.0, 1.0, |r| induced_corr(a, b, r), target))
}

/// NORTA sampler for Poisson vectors.
#[derive(Debug, Clone)]
pub struct PoissonSampler {
    margins: Vec<PoissonMargin>,
    chol: DMatrix<f64>,
    latent: DMatrix<f64>,
}

impl PoissonSampler {
    pub fn new(mu: &[f64], r_target: &CorrMatrix) -> Result<Self> {
        let m = mu.len();
        if r_target.dim() != m {
            return Err(GcrError::Validation("means and correlation sizes differ".into()));
        }
        let margins: Vec<PoissonMargin> = mu.iter().map(|&v| PoissonMargin::new(v)).collect::<Result<_>>()?;
        let r = r_target.as_matrix();
        let mut latent = DMatrix::identity(m, m);
        for j in 0..m {
            for k in 0..j {
                let v = match_margins(&margins[j], &margins[k], r[(j, k)])?;
                latent[(j, k)] = v;
                latent[(k, j)] = v;
            }
        }
        let chol = cholesky_factor(&latent, "matched latent correlation matrix")?;
        Ok(PoissonSampler { margins, chol, latent })
    }

    /// The matched latent normal correlation matrix.
    pub fn latent(&self) -> &DMatrix<f64> {
        &self.latent
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = &self.chol * standard_normals(self.margins.len(), rng);
        z.iter().zip(&self.margins).map(|(zt, mg)| mg.quantile_from_normal(*zt)).collect()
    }
}

pub fn gen_poisson_cluster<R: Rng + ?Sized>(
    mu: &[f64],
    r_target: &CorrMatrix,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(PoissonSampler::new(mu, r_target)?.sample(rng))
}
