use gcr_core::data::{build_designs, parse_corr_formula};
use gcr_core::evalkit::{paired_t_test, repeated_cv_designs, CvConfig, MetricReport};
use gcr_core::par::Exec;
use serde::Serialize;

use super::{load_data, DataColumns, Model};
use crate::args::CvArgs;
use crate::error::{ensure_finite, CliError};
use crate::manifest::{print_json, write_json, ManifestBuilder, RunManifest, SCHEMA_VERSION};
use crate::table::fmt_p;
use crate::Status;

#[derive(Debug, Serialize)]
struct PairedRow {
    metric: String,
    /// Mean of model minus baseline over folds scored by both.
    mean_diff: f64,
    t_stat: f64,
    df: f64,
    p_value: f64,
    n_pairs: usize,
}

#[derive(Debug, Serialize)]
struct Comparison {
    baseline_corr: String,
    baseline: MetricReport,
    paired: Vec<PairedRow>,
}

#[derive(Debug, Serialize)]
struct CvReport {
    schema_version: &'static str,
    manifest: RunManifest,
    data: DataColumns,
    mean_formula: String,
    corr_formula: String,
    report: MetricReport,
    comparison: Option<Comparison>,
}

fn check(report: &MetricReport) -> Result<(), CliError> {
    ensure_finite(
        "cross-validation scores",
        report.metrics.iter().flat_map(|m| {
            m.fold_scores.iter().flatten().flatten().chain(&m.repeat_means).chain([&m.overall])
        }),
    )
}

pub fn run(a: &CvArgs, exec: Exec, argv: &[String]) -> Result<Status, CliError> {
    let mut mb = ManifestBuilder::new("cv", argv, a, Some(a.seed));
    let bytes = mb.read_input("data", &a.data.data)?;
    let columns = DataColumns::from(&a.data);
    let data = load_data(&bytes, &columns)?;
    let model = Model::from_args(&a.model, exec)?;
    let cv = CvConfig { folds: a.folds, repeats: a.repeats, stratify_col: a.stratify.clone(), seed: a.seed };

    let designs = build_designs(&data, &model.mean, &model.corr)?;
    let report = repeated_cv_designs(&data, &designs, model.family, &model.config_for(designs.d()), &cv)?;
    check(&report)?;

    let comparison = match &a.baseline_corr {
        None => None,
        Some(text) => {
            let cf = parse_corr_formula(text)?;
            let base_designs = build_designs(&data, &model.mean, &cf)?;
            let baseline =
                repeated_cv_designs(&data, &base_designs, model.family, &model.config_for(base_designs.d()), &cv)?;
            check(&baseline)?;
            let mut paired = Vec::new();
            for (m, b) in report.metrics.iter().zip(&baseline.metrics) {
                let (x, y): (Vec<f64>, Vec<f64>) = m
                    .fold_scores
                    .iter()
                    .flatten()
                    .zip(b.fold_scores.iter().flatten())
                    .filter_map(|(p, q)| Some(((*p)?, (*q)?)))
                    .unzip();
                let t = paired_t_test(&x, &y)?;
                let row = PairedRow {
                    metric: m.name.clone(),
                    mean_diff: t.mean_diff,
                    t_stat: t.t_stat,
                    df: t.df,
                    p_value: t.p_value,
                    n_pairs: x.len(),
                };
                if row.t_stat.is_finite() {
                    paired.push(row);
                } else {
                    log::warn!("paired test for {} is degenerate (identical scores)", m.name);
                }
            }
            Some(Comparison { baseline_corr: cf.to_string(), baseline, paired })
        }
    };

    let out = CvReport {
        schema_version: SCHEMA_VERSION,
        manifest: mb.finish(),
        data: columns,
        mean_formula: model.mean.to_string(),
        corr_formula: model.corr.to_string(),
        report,
        comparison,
    };
    if let Some(path) = &a.out {
        write_json(path, &out)?;
    }
    if a.json {
        print_json(&out)?;
    } else {
        print_summary(&out);
    }
    Ok(Status::Ok)
}

fn print_summary(r: &CvReport) {
    let rep = &r.report;
    println!(
        "{} x {}-fold cross-validation, family {}, seed {}",
        rep.repeats, rep.folds, rep.family, rep.seed
    );
    println!("  {:<10} {:>12} {:>12}", "metric", "model", "baseline");
    for (i, m) in rep.metrics.iter().enumerate() {
        let base = r
            .comparison
            .as_ref()
            .map(|c| format!("{:.6}", c.baseline.metrics[i].overall))
            .unwrap_or_else(|| "-".into());
        println!("  {:<10} {:>12.6} {:>12}", m.name, m.overall, base);
    }
    if !rep.failed_folds.is_empty() {
        println!("  {} fold fits failed", rep.failed_folds.len());
    }
    if let Some(c) = &r.comparison {
        println!("paired t-tests against corr = {}", c.baseline_corr);
        for p in &c.paired {
            println!("  {:<10} diff {:>11.6}  t {:>8.3}  p {}", p.metric, p.mean_diff, p.t_stat, fmt_p(p.p_value));
        }
    }
}
