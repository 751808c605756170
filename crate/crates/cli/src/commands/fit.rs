use gcr_core::data::build_designs;
use gcr_core::exp_family::Family;
use gcr_core::fitter::{fit_designs, FitConfig};
use gcr_core::inference::{param_covariances, wald_table, WaldRow};
use gcr_core::par::Exec;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{load_data, DataColumns, Model};
use crate::args::FitArgs;
use crate::error::{ensure_finite, CliError};
use crate::manifest::{print_json, write_json, ManifestBuilder, RunManifest, SCHEMA_VERSION};
use crate::table::{print_estimates, print_wald};
use crate::Status;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataSummary {
    #[serde(flatten)]
    pub columns: DataColumns,
    pub n_clusters: usize,
    pub n_obs: usize,
    pub n_pairs: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSummary {
    pub family: Family,
    pub mean_formula: String,
    pub corr_formula: String,
    pub independence: bool,
    pub config: FitConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Named {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Estimates {
    pub beta: Vec<Named>,
    pub alpha: Vec<Named>,
    pub phi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Convergence {
    pub converged: bool,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub backtrack_failures: usize,
    pub pseudo_loglik: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Inference {
    pub beta: Vec<WaldRow>,
    /// Absent for working-independence fits, where alpha is not estimated.
    pub alpha: Option<Vec<WaldRow>>,
    pub cov_beta: Vec<Vec<f64>>,
    pub cov_alpha: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub schema_version: &'static str,
    pub manifest: RunManifest,
    pub data: DataSummary,
    pub model: ModelSummary,
    pub convergence: Convergence,
    pub estimates: Estimates,
    /// Null when the covariance computation failed on a non-converged fit.
    pub inference: Option<Inference>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn named(names: &[String], values: &[f64]) -> Vec<Named> {
    names.iter().zip(values).map(|(n, v)| Named { name: n.clone(), value: *v }).collect()
}

pub fn run(a: &FitArgs, exec: Exec, argv: &[String]) -> Result<Status, CliError> {
    let mut mb = ManifestBuilder::new("fit", argv, a, None);
    let bytes = mb.read_input("data", &a.data.data)?;
    let columns = DataColumns::from(&a.data);
    let data = load_data(&bytes, &columns)?;
    let model = Model::from_args(&a.model, exec)?;
    let designs = build_designs(&data, &model.mean, &model.corr)?;
    let config = model.config_for(designs.d());
    let fit = fit_designs(&designs, model.family, &config)?;

    let estimates = Estimates {
        beta: named(&fit.mean_names, fit.beta_hat.as_slice()),
        alpha: named(&fit.corr_names, fit.alpha_hat.as_slice()),
        phi: fit.phi_hat,
    };
    ensure_finite("estimates", fit.beta_hat.iter().chain(fit.alpha_hat.iter()).chain([&fit.phi_hat]))?;

    let inference = (|| -> Result<Inference, CliError> {
        let covs = param_covariances(&fit, &designs)?;
        let (beta, alpha) = wald_table(&fit, &covs)?;
        let check = |rows: &[WaldRow]| {
            ensure_finite("Wald statistics", rows.iter().flat_map(|r| [&r.std_error, &r.z_stat, &r.p_value]))
        };
        check(&beta.rows)?;
        let alpha = if model.independence {
            None
        } else {
            check(&alpha.rows)?;
            Some(alpha.rows)
        };
        Ok(Inference {
            beta: beta.rows,
            cov_beta: rows(&covs.cov_beta),
            cov_alpha: alpha.as_ref().map(|_| rows(&covs.cov_alpha)),
            alpha,
        })
    })();
    let inference = match inference {
        Ok(i) => Some(i),
        Err(e) if !fit.converged => {
            log::warn!("no inference for the non-converged fit: {e:?}");
            None
        }
        Err(e) => return Err(e),
    };

    let report = FitReport {
        schema_version: SCHEMA_VERSION,
        manifest: mb.finish(),
        data: DataSummary {
            columns,
            n_clusters: designs.n_clusters(),
            n_obs: designs.total_obs(),
            n_pairs: designs.total_pairs(),
        },
        model: ModelSummary {
            family: model.family,
            mean_formula: model.mean.to_string(),
            corr_formula: model.corr.to_string(),
            independence: model.independence,
            config,
        },
        convergence: Convergence {
            converged: fit.converged,
            outer_iters: fit.outer_iters,
            inner_iters: fit.inner_iters,
            backtrack_failures: fit.backtrack_failures,
            pseudo_loglik: fit.final_pl(),
        },
        estimates,
        inference,
    };
    if let Some(path) = &a.out {
        write_json(path, &report)?;
    }
    if a.json {
        print_json(&report)?;
    } else {
        print_report(&report);
    }
    Ok(if fit.converged {
        Status::Ok
    } else {
        Status::NotConverged(format!("no convergence after {} outer iterations", fit.outer_iters))
    })
}

fn print_report(r: &FitReport) {
    println!(
        "family {}  clusters {}  observations {}  pairs {}",
        r.model.family, r.data.n_clusters, r.data.n_obs, r.data.n_pairs
    );
    println!("mean: {}   corr: {}", r.model.mean_formula, r.model.corr_formula);
    let c = &r.convergence;
    println!(
        "converged: {} (outer {}, inner {}){}",
        if c.converged { "yes" } else { "no" },
        c.outer_iters,
        c.inner_iters,
        c.pseudo_loglik.map(|v| format!("  pseudo-loglik {v:.4}")).unwrap_or_default()
    );
    println!("phi: {:.6}", r.estimates.phi);
    println!();
    let names = |v: &[super::fit::Named]| -> (Vec<String>, Vec<f64>) {
        (v.iter().map(|n| n.name.clone()).collect(), v.iter().map(|n| n.value).collect())
    };
    match &r.inference {
        Some(inf) => {
            print_wald("mean model (beta)", &inf.beta);
            println!();
            match &inf.alpha {
                Some(alpha) => print_wald("correlation model (alpha)", alpha),
                None => {
                    let (n, v) = names(&r.estimates.alpha);
                    print_estimates("correlation model (alpha, fixed)", &n, &v);
                }
            }
        }
        None => {
            let (n, v) = names(&r.estimates.beta);
            print_estimates("mean model (beta)", &n, &v);
            let (n, v) = names(&r.estimates.alpha);
            print_estimates("correlation model (alpha)", &n, &v);
        }
    }
    println!("---\nsignif. codes: 0 '***' 0.001 '**' 0.01 '*' 0.05 '.' 0.1 ' ' 1");
}
