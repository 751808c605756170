use std::io;
use std::str::FromStr;

use gcr_core::data::{write_csv, write_csv_writer};
use gcr_core::exp_family::Family;
use gcr_core::par::Exec;
use gcr_core::simgen::{make_scenario_with, ScenarioParams, ScenarioSpec, Study};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::args::SimulateArgs;
use crate::error::{ensure_finite, CliError};
use crate::manifest::{write_json, ManifestBuilder, RunManifest, SCHEMA_VERSION};
use crate::Status;

#[derive(Debug, Serialize)]
struct ScenarioInfo {
    study: Study,
    n_clusters: usize,
    seed: u64,
    family: Family,
    mean_formula: String,
    corr_formula: String,
    params: ScenarioParams,
}

#[derive(Debug, Serialize)]
struct ClusterTruthOut {
    id: String,
    mu: Vec<f64>,
    sigma: Vec<Vec<f64>>,
    corr: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
struct TruthReport {
    schema_version: &'static str,
    manifest: RunManifest,
    scenario: ScenarioInfo,
    clusters: Vec<ClusterTruthOut>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn run(a: &SimulateArgs, exec: Exec, argv: &[String]) -> Result<Status, CliError> {
    let mb = ManifestBuilder::new("simulate", argv, a, Some(a.seed));
    let study = Study::from_str(&a.scenario)?;
    if a.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let g = make_scenario_with(ScenarioSpec::new(study, a.n, a.seed), exec)?;
    match &a.out {
        Some(path) => write_csv(&g.dataset, path)?,
        None => write_csv_writer(&g.dataset, io::stdout().lock())?,
    }
    if let Some(path) = &a.truth {
        let clusters: Vec<ClusterTruthOut> = g
            .dataset
            .clusters()
            .iter()
            .zip(&g.truth)
            .map(|(c, t)| ClusterTruthOut {
                id: c.id.clone(),
                mu: t.mu.clone(),
                sigma: rows(&t.sigma),
                corr: rows(t.corr.as_matrix()),
            })
            .collect();
        ensure_finite(
            "scenario truth",
            clusters.iter().flat_map(|c| c.mu.iter().chain(c.sigma.iter().flatten())),
        )?;
        let report = TruthReport {
            schema_version: SCHEMA_VERSION,
            manifest: mb.finish(),
            scenario: ScenarioInfo {
                study,
                n_clusters: a.n,
                seed: a.seed,
                family: g.family,
                mean_formula: g.mean_formula.clone(),
                corr_formula: g.corr_formula.clone(),
                params: g.params.clone(),
            },
            clusters,
        };
        write_json(path, &report)?;
    }
    Ok(Status::Ok)
}
