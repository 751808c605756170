//! Simulation of clustered data with prescribed marginal means and
//! correlation matrices.

mod generators;
mod normal;
mod scenario;

pub use generators::{
    frechet_bounds, gen_bernoulli_cluster, gen_gaussian_cluster, gen_poisson_cluster,
    solve_poisson_latent, solve_tetrachoric, BernoulliSampler, GaussianSampler, PoissonSampler,
};
pub use normal::{bvn_cdf, norm_cdf, norm_pdf, norm_quantile};
pub use scenario::{
    make_scenario, make_scenario_with, ClusterTruth, CorrelationRule, GeneratedData, ScenarioParams,
    ScenarioSpec, Study, MAX_RETRIES,
};
