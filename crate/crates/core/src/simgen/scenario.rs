//! Preset simulation designs.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::generators::{frechet_bounds, BernoulliSampler, GaussianSampler, PoissonSampler};
use crate::corr_manifold::{gz_inverse, vecl_pairs, CorrMatrix, GammaVector};
use crate::data::{Cluster, ClusteredDataset, ColumnData, ColumnKind};
use crate::error::{GcrError, Result};
use crate::exp_family::{family_moments, Family};
use crate::par::Exec;

/// Attempts per cluster before a scenario gives up.
pub const MAX_RETRIES: usize = 1000;

const BETA0: [f64; 3] = [1.0, -0.5, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Study1Gaussian,
    Study1Poisson,
    Study1Bernoulli,
    Study2Case1,
    Study2Case2,
    Study2Case3,
    Study2Case4,
}

impl Study {
    pub const ALL: [Study; 7] = [
        Study::Study1Gaussian,
        Study::Study1Poisson,
        Study::Study1Bernoulli,
        Study::Study2Case1,
        Study::Study2Case2,
        Study::Study2Case3,
        Study::Study2Case4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Study::Study1Gaussian => "study1_gaussian",
            Study::Study1Poisson => "study1_poisson",
            Study::Study1Bernoulli => "study1_bernoulli",
            Study::Study2Case1 => "study2_case1",
            Study::Study2Case2 => "study2_case2",
            Study::Study2Case3 => "study2_case3",
            Study::Study2Case4 => "study2_case4",
        }
    }

    pub fn family(self) -> Family {
        match self {
            Study::Study1Gaussian => Family::Gaussian,
            Study::Study1Poisson => Family::Poisson,
            _ => Family::Bernoulli,
        }
    }

    fn is_study1(self) -> bool {
        matches!(self, Study::Study1Gaussian | Study::Study1Poisson | Study::Study1Bernoulli)
    }

    /// Correlation formula matching the generating structure.
    pub fn corr_formula(self) -> &'static str {
        match self {
            Study::Study1Gaussian | Study::Study1Poisson => "intercept + diff(u) + sqdiff(u)",
            Study::Study1Bernoulli => "intercept + same(v)",
            Study::Study2Case1 => "intercept + same(u)",
            Study::Study2Case2 => "intercept + same(u) + absdiff(x1) + absdiff(x2) + absdiff(v)",
            Study::Study2Case3 => "intercept + absdiff(t)",
            Study::Study2Case4 => "intercept + absdiff(t) + absdiff(x1) + absdiff(x2) + absdiff(v)",
        }
    }

    pub fn mean_formula(self) -> &'static str {
        "x1 + x2"
    }

    fn columns(self) -> &'static [&'static str] {
        match self {
            Study::Study1Gaussian | Study::Study1Poisson => &["x1", "x2", "u"],
            Study::Study1Bernoulli => &["x1", "x2", "v"],
            _ => &["x1", "x2", "u", "v", "t"],
        }
    }

    fn correlation_rule(self) -> CorrelationRule {
        match self {
            Study::Study1Gaussian | Study::Study1Poisson => {
                CorrelationRule::Model { alpha: vec![0.2, -0.2, 0.3] }
            }
            Study::Study1Bernoulli => CorrelationRule::Model { alpha: vec![0.05, 0.15] },
            Study::Study2Case1 => CorrelationRule::Raw {
                rule: "0.05 + 0.15 1(u_j = u_k = 0) + 0.2 1(u_j = u_k = 1)".into(),
            },
            Study::Study2Case2 => CorrelationRule::Raw {
                rule: "0.05 + 0.15 1(u_j = u_k = 0) + 0.2 1(u_j = u_k = 1) \
                       - 0.05 |x1_j - x1_k| - 0.05 |x2_j - x2_k| - 0.05 |v_j - v_k|"
                    .into(),
            },
            Study::Study2Case3 => CorrelationRule::Raw { rule: "0.4 * 0.6^|j - k|".into() },
            Study::Study2Case4 => CorrelationRule::Raw {
                rule: "0.4 * 0.6^|j - k| - 0.05 |x1_j - x1_k| - 0.05 |x2_j - x2_k| - 0.05 |v_j - v_k|"
                    .into(),
            },
        }
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Study {
    type Err = GcrError;

    fn from_str(s: &str) -> Result<Self> {
        Study::ALL
            .iter()
            .copied()
            .find(|st| st.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| {
                let names: Vec<&str> = Study::ALL.iter().map(|s| s.name()).collect();
                GcrError::Validation(format!("unknown study '{s}'; expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub study: Study,
    pub n_clusters: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(study: Study, n_clusters: usize, seed: u64) -> Self {
        ScenarioSpec { study, n_clusters, seed }
    }
}

/// How the true correlation matrices were produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorrelationRule {
    /// `vecl(log R) = W alpha`.
    Model { alpha: Vec<f64> },
    /// Pairwise correlations given directly.
    Raw { rule: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub beta: Vec<f64>,
    pub correlation: CorrelationRule,
    pub phi: f64,
}

/// True marginal means and covariance of one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTruth {
    pub mu: Vec<f64>,
    pub sigma: DMatrix<f64>,
    pub corr: CorrMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedData {
    pub spec: ScenarioSpec,
    pub family: Family,
    pub dataset: ClusteredDataset,
    pub truth: Vec<ClusterTruth>,
    pub params: ScenarioParams,
    pub mean_formula: String,
    pub corr_formula: String,
}

/// Builds the dataset for `spec`, generating clusters in parallel.
pub fn make_scenario(spec: ScenarioSpec) -> Result<GeneratedData> {
    make_scenario_with(spec, Exec::default())
}

/// Like [`make_scenario`] with an explicit execution strategy. Each cluster
/// draws from its own stream of the seeded generator, so the output does
/// not depend on `exec`.
pub fn make_scenario_with(spec: ScenarioSpec, exec: Exec) -> Result<GeneratedData> {
    if spec.n_clusters == 0 {
        return Err(GcrError::Validation("scenario needs at least one cluster".into()));
    }
    let study = spec.study;
    let family = study.family();
    let alpha = match study.correlation_rule() {
        CorrelationRule::Model { alpha } => Some(alpha),
        CorrelationRule::Raw { .. } => None,
    };
    let generated = exec.try_map_indexed(spec.n_clusters, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64);
        generate_cluster(study, alpha.as_deref(), i, &mut rng)
    })?;

    let mut names: Vec<String> = vec!["id".to_string()];
    names.extend(study.columns().iter().map(|s| s.to_string()));
    let mut kinds = vec![ColumnKind::Categorical];
    kinds.extend(std::iter::repeat_n(ColumnKind::Numeric, study.columns().len()));

    let (clusters, truth): (Vec<Cluster>, Vec<ClusterTruth>) = generated.into_iter().unzip();
    let dataset = ClusteredDataset::new("id", "y", names, kinds, clusters)?;
    Ok(GeneratedData {
        spec,
        family,
        dataset,
        truth,
        params: ScenarioParams {
            beta: BETA0.to_vec(),
            correlation: study.correlation_rule(),
            phi: 1.0,
        },
        mean_formula: study.mean_formula().to_string(),
        corr_formula: study.corr_formula().to_string(),
    })
}

/// Covariates of one cluster, keyed by the study's column list.
struct Covariates {
    x1: Vec<f64>,
    x2: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    t: Vec<f64>,
}

fn draw_covariates<R: Rng + ?Sized>(study: Study, rng: &mut R) -> Covariates {
    let m = if study.is_study1() {
        Binomial::new(6, 0.8).expect("valid binomial").sample(rng) as usize + 1
    } else {
        Binomial::new(5, 0.8).expect("valid binomial").sample(rng) as usize + 2
    };
    let rho = 0.5f64;
    let mut x1 = Vec::with_capacity(m);
    let mut x2 = Vec::with_capacity(m);
    for _ in 0..m {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        x1.push(z1);
        x2.push(rho * z1 + (1.0 - rho * rho).sqrt() * z2);
    }
    let coin = Binomial::new(1, 0.5).expect("valid binomial");
    let (u, v) = match study {
        Study::Study1Gaussian | Study::Study1Poisson => {
            ((0..m).map(|_| rng.random::<f64>()).collect(), Vec::new())
        }
        Study::Study1Bernoulli => (Vec::new(), (0..m).map(|_| coin.sample(rng) as f64).collect()),
        _ => {
            let u = (0..m).map(|_| coin.sample(rng) as f64).collect();
            let four = Binomial::new(4, 0.5).expect("valid binomial");
            (u, (0..m).map(|_| four.sample(rng) as f64).collect())
        }
    };
    let t = (1..=m).map(|j| j as f64).collect();
    Covariates { x1, x2, u, v, t }
}

fn model_gamma(study: Study, alpha: &[f64], c: &Covariates) -> Vec<f64> {
    let m = c.x1.len();
    vecl_pairs(m)
        .into_iter()
        .map(|(j, k)| match study {
            Study::Study1Bernoulli => alpha[0] + alpha[1] * f64::from(u8::from(c.v[j] == c.v[k])),
            _ => {
                let d = c.u[j] - c.u[k];
                alpha[0] + alpha[1] * d + alpha[2] * d * d
            }
        })
        .collect()
}

fn raw_corr(study: Study, c: &Covariates, j: usize, k: usize) -> f64 {
    let indicator = |b: bool| if b { 1.0 } else { 0.0 };
    let block = 0.05
        + 0.15 * indicator(c.u[j] == 0.0 && c.u[k] == 0.0)
        + 0.2 * indicator(c.u[j] == 1.0 && c.u[k] == 1.0);
    let ar = 0.4 * 0.6f64.powi((c.t[j] - c.t[k]).abs() as i32);
    let modulation = 0.05 * ((c.x1[j] - c.x1[k]).abs() + (c.x2[j] - c.x2[k]).abs() + (c.v[j] - c.v[k]).abs());
    match study {
        Study::Study2Case1 => block,
        Study::Study2Case2 => block - modulation,
        Study::Study2Case3 => ar,
        Study::Study2Case4 => ar - modulation,
        _ => unreachable!("raw correlations are only used by the second study"),
    }
}

fn target_corr(study: Study, alpha: Option<&[f64]>, c: &Covariates) -> Result<CorrMatrix> {
    let m = c.x1.len();
    match alpha {
        Some(a) => gz_inverse(&GammaVector::new(m, model_gamma(study, a, c))?),
        None => {
            let mut r = DMatrix::identity(m, m);
            for (j, k) in vecl_pairs(m) {
                let v = raw_corr(study, c, j, k);
                r[(j, k)] = v;
                r[(k, j)] = v;
            }
            CorrMatrix::new(r).map_err(|e| GcrError::Feasibility(e.to_string()))
        }
    }
}

fn check_frechet(p: &[f64], r: &CorrMatrix) -> Result<()> {
    for (j, k) in vecl_pairs(p.len()) {
        let (lo, hi) = frechet_bounds(p[j], p[k]);
        let v = r.as_matrix()[(j, k)];
        if v < lo || v > hi {
            return Err(GcrError::Feasibility(format!(
                "pair ({j}, {k}) correlation {v:.4} violates the Fréchet bounds [{lo:.4}, {hi:.4}]"
            )));
        }
    }
    Ok(())
}

/// One attempt at a cluster: covariates, truth and response.
fn attempt<R: Rng + ?Sized>(
    study: Study,
    alpha: Option<&[f64]>,
    rng: &mut R,
) -> Result<(Covariates, ClusterTruth, Vec<f64>)> {
    let family = study.family();
    let c = draw_covariates(study, rng);
    let corr = target_corr(study, alpha, &c)?;
    let m = c.x1.len();
    let mut mu = Vec::with_capacity(m);
    let mut sd = Vec::with_capacity(m);
    for j in 0..m {
        let eta = BETA0[0] + BETA0[1] * c.x1[j] + BETA0[2] * c.x2[j];
        let mb = family_moments(family, eta, 1.0)?;
        mu.push(mb.mu);
        sd.push(mb.var_unit.sqrt());
    }
    let sigma = DMatrix::from_fn(m, m, |j, k| sd[j] * corr.as_matrix()[(j, k)] * sd[k]);
    let y = match family {
        Family::Gaussian => GaussianSampler::new(&mu, &sigma)?.sample(rng),
        Family::Poisson => PoissonSampler::new(&mu, &corr)?.sample(rng),
        Family::Bernoulli => {
            check_frechet(&mu, &corr)?;
            BernoulliSampler::new(&mu, &corr)?.sample(rng)
        }
        Family::Gamma => unreachable!("no preset uses the gamma family"),
    };
    Ok((c, ClusterTruth { mu, sigma, corr }, y))
}

fn generate_cluster<R: Rng + ?Sized>(
    study: Study,
    alpha: Option<&[f64]>,
    index: usize,
    rng: &mut R,
) -> Result<(Cluster, ClusterTruth)> {
    let mut last = None;
    for _ in 0..MAX_RETRIES {
        match attempt(study, alpha, rng) {
            Ok((c, truth, y)) => {
                let m = y.len();
                let id = (index + 1).to_string();
                let mut columns = vec![ColumnData::Categorical(vec![id.clone(); m])];
                for name in study.columns() {
                    let col = match *name {
                        "x1" => c.x1.clone(),
                        "x2" => c.x2.clone(),
                        "u" => c.u.clone(),
                        "v" => c.v.clone(),
                        _ => c.t.clone(),
                    };
                    columns.push(ColumnData::Numeric(col));
                }
                return Ok((Cluster { id, y, columns }, truth));
            }
            Err(e @ (GcrError::Feasibility(_) | GcrError::NotPositiveDefinite { .. })) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(GcrError::Scenario(format!(
        "cluster {} still infeasible after {MAX_RETRIES} attempts: {}",
        index + 1,
        last.map(|e| e.to_string()).unwrap_or_default()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn study1_cluster_sizes() {
        let g = make_scenario(ScenarioSpec::new(Study::Study1Gaussian, 100, 7)).unwrap();
        assert_eq!(g.dataset.n_clusters(), 100);
        assert!(g.dataset.clusters().iter().all(|c| (1..=7).contains(&c.size())));
        let g2 = make_scenario(ScenarioSpec::new(Study::Study2Case1, 100, 7)).unwrap();
        assert!(g2.dataset.clusters().iter().all(|c| (2..=7).contains(&c.size())));
    }

    #[test]
    fn case3_adjacent_target() {
        let g = make_scenario(ScenarioSpec::new(Study::Study2Case3, 20, 1)).unwrap();
        for t in &g.truth {
            let r = t.corr.as_matrix();
            for j in 1..r.nrows() {
                assert!((r[(j, j - 1)] - 0.24).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn bernoulli_block_design() {
        let g = make_scenario(ScenarioSpec::new(Study::Study1Bernoulli, 30, 3)).unwrap();
        let v = g.dataset.column_index("v").unwrap();
        for (c, t) in g.dataset.clusters().iter().zip(&g.truth) {
            let ColumnData::Numeric(vals) = &c.columns[v] else { panic!() };
            assert!(vals.iter().all(|&x| x == 0.0 || x == 1.0));
            // log R entries follow the two-level block rule.
            let gamma = crate::corr_manifold::gz_transform(&t.corr).unwrap();
            for (g, (j, k)) in gamma.values().iter().zip(vecl_pairs(c.size())) {
                let want = if vals[j] == vals[k] { 0.2 } else { 0.05 };
                assert!((g - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn reproducible_and_strategy_independent() {
        let spec = ScenarioSpec::new(Study::Study1Poisson, 25, 11);
        let a = make_scenario_with(spec, Exec::Sequential).unwrap();
        let b = make_scenario_with(spec, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        let c = make_scenario(ScenarioSpec::new(Study::Study1Poisson, 25, 12)).unwrap();
        assert_ne!(a.dataset, c.dataset);
    }

    #[test]
    fn study_names_round_trip() {
        for s in Study::ALL {
            assert_eq!(s.name().parse::<Study>().unwrap(), s);
        }
        assert!("study3".parse::<Study>().is_err());
    }

    #[test]
    fn emitted_targets_are_feasible() {
        for study in [Study::Study2Case2, Study::Study2Case4, Study::Study1Bernoulli] {
            let g = make_scenario(ScenarioSpec::new(study, 40, 5)).unwrap();
            for t in &g.truth {
                assert!(t.sigma.clone().cholesky().is_some());
                check_frechet(&t.mu, &t.corr).unwrap();
            }
        }
    }
}
