use std::str::FromStr;

use gcr_core::data::{build_designs, parse_corr_formula, parse_mean_formula};
use gcr_core::diagnostics::{standardized_residuals, subgroup_empirical_corr, DiagnosticsConfig, SubgroupSpec};
use gcr_core::fitter::FitResult;
use gcr_core::par::Exec;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::fit::{DataSummary, Estimates, ModelSummary};
use super::load_data;
use crate::args::DiagnoseArgs;
use crate::error::{ensure_finite, CliError};
use crate::manifest::{print_json, write_json, ManifestBuilder, RunManifest, SCHEMA_VERSION};
use crate::table::fmt_p;
use crate::Status;

/// The parts of a fit report needed to rebuild the fitted model.
#[derive(Debug, Deserialize)]
struct StoredFit {
    schema_version: String,
    data: DataSummary,
    model: ModelSummary,
    estimates: Estimates,
}

#[derive(Debug, Serialize)]
struct SubgroupRow {
    subgroup: String,
    rho_hat: f64,
    n_pairs: u64,
    t_stat: Option<f64>,
    p_value: Option<f64>,
    candidates: u64,
    subsampled: bool,
}

#[derive(Debug, Serialize)]
struct DiagnoseReport {
    schema_version: &'static str,
    manifest: RunManifest,
    family: gcr_core::exp_family::Family,
    mean_formula: String,
    corr_formula: String,
    subgroups: Vec<SubgroupRow>,
}

fn major(v: &str) -> &str {
    v.split('.').next().unwrap_or(v)
}

pub fn run(a: &DiagnoseArgs, exec: Exec, argv: &[String]) -> Result<Status, CliError> {
    let mut mb = ManifestBuilder::new("diagnose", argv, a, Some(a.seed));
    let fit_bytes = mb.read_input("fit", &a.fit)?;
    let stored: StoredFit = serde_json::from_slice(&fit_bytes).map_err(|e| CliError::io(&a.fit, e))?;
    if major(&stored.schema_version) != major(SCHEMA_VERSION) {
        return Err(CliError::Input(format!(
            "{}: schema version {} is not readable (expected {SCHEMA_VERSION})",
            a.fit.display(),
            stored.schema_version
        )));
    }
    let specs = a
        .subgroups
        .iter()
        .map(|s| SubgroupSpec::from_str(s))
        .collect::<Result<Vec<_>, _>>()?;

    let bytes = mb.read_input("data", &a.data)?;
    let data = load_data(&bytes, &stored.data.columns)?;
    let designs = build_designs(
        &data,
        &parse_mean_formula(&stored.model.mean_formula)?,
        &parse_corr_formula(&stored.model.corr_formula)?,
    )?;
    let names = |v: &[super::fit::Named]| v.iter().map(|n| n.name.clone()).collect::<Vec<_>>();
    if names(&stored.estimates.beta) != designs.mean_names
        || names(&stored.estimates.alpha) != designs.corr_names
        || designs.n_clusters() != stored.data.n_clusters
    {
        return Err(CliError::Input(format!(
            "{} does not match the design built from {}",
            a.fit.display(),
            a.data.display()
        )));
    }
    let values = |v: &[super::fit::Named]| DVector::from_iterator(v.len(), v.iter().map(|n| n.value));
    let fit = FitResult::from_estimates(
        &designs,
        stored.model.family,
        values(&stored.estimates.beta),
        values(&stored.estimates.alpha),
        stored.estimates.phi,
    )?;
    let residuals = standardized_residuals(&fit, &designs)?;
    let config = DiagnosticsConfig { max_pairs: a.max_pairs, seed: a.seed, exec };

    let mut rows = Vec::with_capacity(specs.len());
    for spec in &specs {
        let out = subgroup_empirical_corr(&residuals, &data, spec, &config)?;
        ensure_finite("subgroup correlation", [&out.rho_hat])?;
        // Constant nonzero products give an infinite t statistic; JSON keeps only finite numbers.
        let t_stat = out.t_stat.filter(|t| t.is_finite());
        rows.push(SubgroupRow {
            subgroup: out.name,
            rho_hat: out.rho_hat,
            n_pairs: out.n_pairs,
            t_stat,
            p_value: out.p_value,
            candidates: out.candidates,
            subsampled: out.subsampled,
        });
    }
    let report = DiagnoseReport {
        schema_version: SCHEMA_VERSION,
        manifest: mb.finish(),
        family: stored.model.family,
        mean_formula: stored.model.mean_formula,
        corr_formula: stored.model.corr_formula,
        subgroups: rows,
    };
    if let Some(path) = &a.out {
        write_json(path, &report)?;
    }
    if a.json {
        print_json(&report)?;
    } else {
        print_table(&report.subgroups);
    }
    Ok(Status::Ok)
}

fn print_table(rows: &[SubgroupRow]) {
    let width = rows.iter().map(|r| r.subgroup.len()).max().unwrap_or(0).max(8);
    println!("  {:<width$} {:>10} {:>10} {:>9} {:>10}", "subgroup", "rho_hat", "N_S", "t", "p");
    for r in rows {
        let t = r.t_stat.map(|t| format!("{t:.3}")).unwrap_or_else(|| "-".into());
        let p = r.p_value.map(fmt_p).unwrap_or_else(|| "-".into());
        let note = if r.subsampled { "  (subsampled)" } else { "" };
        println!("  {:<width$} {:>10.5} {:>10} {:>9} {:>10}{note}", r.subgroup, r.rho_hat, r.n_pairs, t, p);
    }
}
