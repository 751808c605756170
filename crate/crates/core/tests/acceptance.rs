//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any criterion fails.

use std::time::Instant;

use gcr_core::corr_manifold::{
    gz_inverse, gz_transform, jacobian_rho_gamma, log_spectrum, vecl, vecl_pairs, CorrMatrix, GammaVector,
};
use gcr_core::data::{build_designs, parse_corr_formula, parse_mean_formula, DesignBundle};
use gcr_core::diagnostics::{standardized_residuals, subgroup_empirical_corr, DiagnosticsConfig, SubgroupSpec};
use gcr_core::evalkit::{brier_score, log_loss, mmd_mcd, repeated_cv, CvConfig, MomentPair};
use gcr_core::exp_family::Family;
use gcr_core::fitter::{fit_designs, pl_objective, pl_score_s2, pseudo_expectation_j, FitConfig, FitResult};
use gcr_core::inference::{param_covariances, wald_table};
use gcr_core::par::Exec;
use gcr_core::simgen::{
    gen_bernoulli_cluster, gen_poisson_cluster, make_scenario, solve_tetrachoric, BernoulliSampler, GaussianSampler,
    GeneratedData, PoissonSampler, ScenarioSpec, Study,
};
use gcr_core::GcrError;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn random_corr(m: usize, rng: &mut ChaCha8Rng) -> CorrMatrix {
    let b = DMatrix::from_fn(m, m + 2, |_, _| rng.sample::<f64, _>(StandardNormal));
    let s = &b * b.transpose();
    let d: Vec<f64> = (0..m).map(|i| s[(i, i)].sqrt()).collect();
    let mut r = DMatrix::from_fn(m, m, |i, j| s[(i, j)] / (d[i] * d[j]));
    for i in 0..m {
        r[(i, i)] = 1.0;
    }
    CorrMatrix::new(r).expect("random correlation matrix")
}

fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

// 1 ---------------------------------------------------------------------

fn round_trip() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for i in 0..500 {
        let m = 2 + i % 9;
        let r = random_corr(m, &mut rng);
        let back = gz_inverse(&gz_transform(&r).unwrap()).unwrap();
        worst = worst.max(max_abs(&(back.as_matrix() - r.as_matrix())));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst < 1e-8 && secs < 10.0, format!("max error {worst:.2e}, {secs:.2} s"))
}

// 2 ---------------------------------------------------------------------

fn fisher_z() -> Outcome {
    let mut worst = 0.0f64;
    for rho in [-0.95, -0.5, 0.0, 0.5, 0.95] {
        let r = CorrMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0])).unwrap();
        let g = gz_transform(&r).unwrap().values()[0];
        worst = worst.max((g - f64::atanh(rho)).abs());
    }
    let r = CorrMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 1.0])).unwrap();
    let ln2 = (gz_transform(&r).unwrap().values()[0] - 2f64.ln()).abs();
    outcome(worst < 1e-10 && ln2 < 1e-10, format!("max |gamma - atanh(rho)| {worst:.2e}"))
}

// 3 ---------------------------------------------------------------------

fn jacobian() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 1e-6;
    let (mut worst_rel, mut min_diag) = (0.0f64, f64::INFINITY);
    for i in 0..50 {
        let m = 2 + i % 7;
        let r = random_corr(m, &mut rng);
        let j = jacobian_rho_gamma(&r).unwrap();
        let gamma = gz_transform(&r).unwrap();
        let q = gamma.values().len();
        let mut fd = DMatrix::zeros(q, q);
        for c in 0..q {
            let mut up = gamma.values().to_vec();
            let mut down = up.clone();
            up[c] += h;
            down[c] -= h;
            let ru = vecl(gz_inverse(&GammaVector::new(m, up).unwrap()).unwrap().as_matrix());
            let rd = vecl(gz_inverse(&GammaVector::new(m, down).unwrap()).unwrap().as_matrix());
            for rrow in 0..q {
                fd[(rrow, c)] = (ru[rrow] - rd[rrow]) / (2.0 * h);
            }
        }
        worst_rel = worst_rel.max(max_abs(&(&j - &fd)) / max_abs(&fd));
        min_diag = min_diag.min(j.diagonal().min());
    }
    outcome(
        worst_rel < 1e-4 && min_diag >= -1e-12,
        format!("max relative error {worst_rel:.2e}, min diagonal {min_diag:.3}"),
    )
}

// 4 ---------------------------------------------------------------------

fn random_instance(family: Family, rng: &mut ChaCha8Rng) -> (DesignBundle, DVector<f64>, DVector<f64>, f64) {
    let study = match family {
        Family::Gaussian => Study::Study1Gaussian,
        Family::Poisson => Study::Study1Poisson,
        _ => Study::Study1Bernoulli,
    };
    let n = rng.random_range(3..=10);
    let g = make_scenario(ScenarioSpec::new(study, n, rng.random())).unwrap();
    // Keep clusters at m <= 5.
    let mut data = g.dataset.clone();
    let keep: Vec<usize> = (0..data.n_clusters()).filter(|&i| data.clusters()[i].size() <= 5).collect();
    if keep.len() >= 2 {
        data = data.subset(&keep).unwrap();
    }
    let designs = build_designs(
        &data,
        &parse_mean_formula(&g.mean_formula).unwrap(),
        &parse_corr_formula(&g.corr_formula).unwrap(),
    )
    .unwrap();
    let beta = DVector::from_fn(3, |i, _| [1.0, -0.5, 0.5][i] + 0.2 * rng.random::<f64>());
    let alpha = DVector::from_fn(designs.d(), |_, _| 0.3 * (rng.random::<f64>() - 0.5));
    let phi = if family == Family::Gaussian { 0.5 + rng.random::<f64>() } else { 1.0 };
    (designs, beta, alpha, phi)
}

fn score_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for i in 0..20 {
        let family = [Family::Gaussian, Family::Poisson, Family::Bernoulli][i % 3];
        let (designs, beta, alpha, phi) = random_instance(family, &mut rng);
        let s2 = pl_score_s2(&designs, family, &beta, &alpha, phi).unwrap();
        let mut fd = DVector::zeros(alpha.len());
        for j in 0..alpha.len() {
            let mut up = alpha.clone();
            let mut down = alpha.clone();
            up[j] += h;
            down[j] -= h;
            fd[j] = (pl_objective(&designs, family, &beta, &up, phi).unwrap()
                - pl_objective(&designs, family, &beta, &down, phi).unwrap())
                / (2.0 * h);
        }
        worst = worst.max((&s2 - &fd).amax() / fd.amax());
    }
    outcome(worst < 1e-5, format!("max relative error {worst:.2e} over 20 instances"))
}

// 5 ---------------------------------------------------------------------

fn gaussian_pseudo_expectation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = 3;
    let r = random_corr(m, &mut rng);
    let j = pseudo_expectation_j(Family::Gaussian, &r, &[0.0; 3], 1.0).unwrap();
    let spec = log_spectrum(&r).unwrap();
    let rinv = spec.power(-1.0);
    let sampler = GaussianSampler::new(&[0.0; 3], r.as_matrix()).unwrap();
    let pairs = vecl_pairs(m);
    let q = pairs.len();
    let draws = 1_000_000;
    let mut sum = DMatrix::zeros(q, q);
    let mut sumsq = DMatrix::zeros(q, q);
    for _ in 0..draws {
        let eps = DVector::from_vec(sampler.sample(&mut rng));
        let u = &rinv * eps;
        let eta = DVector::from_iterator(q, pairs.iter().map(|&(a, b)| u[a] * u[b] - rinv[(a, b)]));
        let outer = &eta * eta.transpose();
        sumsq += outer.map(|v| v * v);
        sum += outer;
    }
    let n = draws as f64;
    let mean = &sum / n;
    let mut worst = 0.0f64;
    for a in 0..q {
        for b in 0..q {
            let var = sumsq[(a, b)] / n - mean[(a, b)].powi(2);
            let se = (var / n).sqrt();
            worst = worst.max((mean[(a, b)] - j[(a, b)]).abs() / se);
        }
    }
    outcome(worst < 3.0, format!("max deviation {worst:.2} MC standard errors (m = 3, 1e6 draws)"))
}

// Simulation helpers ----------------------------------------------------

struct Replicate {
    data: GeneratedData,
    designs: DesignBundle,
    fit: FitResult,
}

fn fit_replicate(study: Study, n: usize, seed: u64, corr: Option<&str>, fixed_alpha: Option<Vec<f64>>) -> Result<Replicate, GcrError> {
    let data = make_scenario(ScenarioSpec::new(study, n, seed))?;
    let designs = build_designs(
        &data.dataset,
        &parse_mean_formula(&data.mean_formula)?,
        &parse_corr_formula(corr.unwrap_or(&data.corr_formula))?,
    )?;
    let config = FitConfig { fixed_alpha, exec: Exec::Sequential, ..FitConfig::default() };
    let fit = fit_designs(&designs, data.family, &config)?;
    Ok(Replicate { data, designs, fit })
}

struct StudySummary {
    mae: Vec<f64>,
    coverage: Vec<f64>,
    failures: usize,
    nonconverged: usize,
}

/// MAE x 100 and 95% coverage for (alpha, beta[, phi]) over replications.
fn study1_summary(study: Study, n: usize, reps: usize, seed0: u64, with_phi: bool) -> StudySummary {
    let results = Exec::default().map_indexed(reps, |r| -> Result<(Vec<f64>, Vec<bool>, bool), GcrError> {
        let rep = fit_replicate(study, n, seed0 + r as u64, None, None)?;
        let covs = param_covariances(&rep.fit, &rep.designs)?;
        let (bt, at) = wald_table(&rep.fit, &covs)?;
        let alpha0 = match &rep.data.params.correlation {
            gcr_core::simgen::CorrelationRule::Model { alpha } => alpha.clone(),
            _ => unreachable!(),
        };
        let truth: Vec<f64> = alpha0.iter().chain(&rep.data.params.beta).copied().collect();
        let rows: Vec<_> = at.rows.iter().chain(&bt.rows).collect();
        let mut errs: Vec<f64> = rows.iter().zip(&truth).map(|(row, t)| (row.estimate - t).abs()).collect();
        let cover: Vec<bool> = rows
            .iter()
            .zip(&truth)
            .map(|(row, t)| {
                let (lo, hi) = row.confidence_interval(0.95);
                lo <= *t && *t <= hi
            })
            .collect();
        if with_phi {
            errs.push((rep.fit.phi_hat - rep.data.params.phi).abs());
        }
        Ok((errs, cover, rep.fit.converged))
    });
    let mut failures = 0;
    let mut nonconverged = 0;
    let mut sums: Vec<f64> = Vec::new();
    let mut covered: Vec<usize> = Vec::new();
    let mut ok = 0usize;
    for res in results {
        match res {
            Ok((errs, cover, conv)) => {
                if sums.is_empty() {
                    sums = vec![0.0; errs.len()];
                    covered = vec![0; cover.len()];
                }
                for (s, e) in sums.iter_mut().zip(&errs) {
                    *s += e;
                }
                for (c, v) in covered.iter_mut().zip(&cover) {
                    *c += usize::from(*v);
                }
                ok += 1;
                nonconverged += usize::from(!conv);
            }
            Err(e) => {
                eprintln!("replication failed: {e}");
                failures += 1;
            }
        }
    }
    StudySummary {
        mae: sums.iter().map(|s| 100.0 * s / ok as f64).collect(),
        coverage: covered.iter().map(|c| 100.0 * *c as f64 / ok as f64).collect(),
        failures,
        nonconverged,
    }
}

fn within(values: &[f64], targets: &[f64], tol: f64) -> bool {
    values.len() == targets.len() && values.iter().zip(targets).all(|(v, t)| (v - t).abs() <= tol)
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2}")).collect();
    format!("({})", parts.join(", "))
}

// 6 ---------------------------------------------------------------------

#[allow(clippy::approx_constant)]
fn study1_gaussian() -> Outcome {
    let target = [1.27, 2.32, 4.73, 2.73, 1.57, 1.56, 3.14];
    let s = study1_summary(Study::Study1Gaussian, 400, 200, 600_000, true);
    let mae_ok = within(&s.mae, &target, 0.6);
    let cov_ok = s.coverage.iter().all(|c| (90.0..=98.0).contains(c));
    outcome(
        mae_ok && cov_ok && s.failures == 0,
        format!(
            "MAE x100 {} vs {}; coverage % {}; failed {}, not converged {}",
            fmt(&s.mae),
            fmt(&target),
            fmt(&s.coverage),
            s.failures,
            s.nonconverged
        ),
    )
}

// 7 ---------------------------------------------------------------------

fn study1_bernoulli() -> Outcome {
    let target = [2.09, 3.13, 7.10, 6.20, 5.93];
    let s = study1_summary(Study::Study1Bernoulli, 200, 200, 700_000, false);
    let mae_ok = within(&s.mae, &target, 1.2);
    let cov_ok = s.coverage.iter().all(|c| (90.0..=98.0).contains(c));
    outcome(
        mae_ok && cov_ok && s.failures == 0,
        format!(
            "MAE x100 {} vs {}; coverage % {}; failed {}, not converged {}",
            fmt(&s.mae),
            fmt(&target),
            fmt(&s.coverage),
            s.failures,
            s.nonconverged
        ),
    )
}

// 8 ---------------------------------------------------------------------

fn study1_poisson() -> Outcome {
    let target = [1.23, 2.49, 5.03];
    let s = study1_summary(Study::Study1Poisson, 400, 100, 800_000, false);
    let alpha_mae = &s.mae[..3];
    outcome(
        within(alpha_mae, &target, 1.0) && s.failures == 0,
        format!(
            "alpha MAE x100 {} vs {}; failed {}, not converged {}",
            fmt(alpha_mae),
            fmt(&target),
            s.failures,
            s.nonconverged
        ),
    )
}

// 9 ---------------------------------------------------------------------

fn mcd(rep: &Replicate) -> Result<f64, GcrError> {
    let mu = rep.fit.fitted_means(&rep.designs)?;
    let sigma = rep.fit.fitted_covariances(&rep.designs)?;
    let pairs: Vec<MomentPair<'_>> = rep
        .data
        .truth
        .iter()
        .zip(mu.iter().zip(&sigma))
        .map(|(t, (m, s))| MomentPair { mu_hat: m, mu_true: &t.mu, sigma_hat: s, sigma_true: &t.sigma })
        .collect();
    Ok(mmd_mcd(&pairs)?.1)
}

fn study2_case2() -> Outcome {
    let reps = 50;
    let results = Exec::default().map_indexed(reps, |r| -> Result<(f64, f64), GcrError> {
        let seed = 900_000 + r as u64;
        let full = fit_replicate(Study::Study2Case2, 100, seed, None, None)?;
        let exch = fit_replicate(Study::Study2Case2, 100, seed, Some("intercept"), None)?;
        Ok((100.0 * mcd(&full)?, 100.0 * mcd(&exch)?))
    });
    let ok: Vec<(f64, f64)> = results.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    let failures = reps - ok.len();
    let mean_full = ok.iter().map(|p| p.0).sum::<f64>() / ok.len() as f64;
    let mean_exch = ok.iter().map(|p| p.1).sum::<f64>() / ok.len() as f64;
    let wins = ok.iter().filter(|p| p.0 < p.1).count();
    let share = wins as f64 / reps as f64;
    outcome(
        (mean_full - 7.18).abs() <= 1.5 && share >= 0.9 && failures == 0,
        format!(
            "mean MCD x100 {mean_full:.2} (intercept-only {mean_exch:.2}); smaller in {wins}/{reps}; failed {failures}"
        ),
    )
}

// 10 --------------------------------------------------------------------

/// Plain IRLS for a canonical-link GLM, written independently of the fitter.
fn irls_oracle(x: &DMatrix<f64>, y: &DVector<f64>, family: Family) -> DVector<f64> {
    let p = x.ncols();
    let mut beta = DVector::zeros(p);
    for _ in 0..200 {
        let eta = x * &beta;
        let (mu, var): (Vec<f64>, Vec<f64>) = eta
            .iter()
            .map(|&e| match family {
                Family::Gaussian => (e, 1.0),
                Family::Poisson => (e.exp(), e.exp()),
                _ => {
                    let m = 1.0 / (1.0 + (-e).exp());
                    (m, m * (1.0 - m))
                }
            })
            .unzip();
        let w = DVector::from_vec(var.clone());
        let z = DVector::from_fn(y.len(), |i, _| eta[i] + (y[i] - mu[i]) / var[i]);
        let xtw = DMatrix::from_fn(p, y.len(), |a, i| x[(i, a)] * w[i]);
        let next = (&xtw * x).lu().solve(&(&xtw * z)).unwrap();
        let change = (&next - &beta).amax();
        beta = next;
        if change < 1e-14 {
            break;
        }
    }
    beta
}

fn independence_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    for (study, seed) in [(Study::Study1Gaussian, 10), (Study::Study1Poisson, 11), (Study::Study1Bernoulli, 12)] {
        let data = make_scenario(ScenarioSpec::new(study, 40, seed)).unwrap();
        let designs = build_designs(
            &data.dataset,
            &parse_mean_formula(&data.mean_formula).unwrap(),
            &parse_corr_formula(&data.corr_formula).unwrap(),
        )
        .unwrap();
        let config = FitConfig { fixed_alpha: Some(vec![0.0; designs.d()]), ..FitConfig::default() };
        let fit = fit_designs(&designs, data.family, &config).unwrap();
        let n = designs.total_obs();
        let mut x = DMatrix::zeros(n, designs.p());
        let mut y = DVector::zeros(n);
        let mut row = 0;
        for c in &designs.clusters {
            for j in 0..c.size() {
                x.set_row(row, &c.x.row(j));
                y[row] = c.y[j];
                row += 1;
            }
        }
        let oracle = irls_oracle(&x, &y, data.family);
        worst = worst.max((&fit.beta_hat - oracle).amax());
    }
    outcome(worst < 1e-6, format!("max |beta - IRLS| {worst:.2e} over three families"))
}

// 11 --------------------------------------------------------------------

struct SampleStats {
    mean: Vec<f64>,
    var: Vec<f64>,
    mean_se: Vec<f64>,
    var_se: Vec<f64>,
    corr: DMatrix<f64>,
}

fn sample_stats(draws: &[Vec<f64>]) -> SampleStats {
    let n = draws.len() as f64;
    let m = draws[0].len();
    let mean: Vec<f64> = (0..m).map(|j| draws.iter().map(|d| d[j]).sum::<f64>() / n).collect();
    let central = |j: usize, k: u32| draws.iter().map(|d| (d[j] - mean[j]).powi(k as i32)).sum::<f64>() / n;
    let var: Vec<f64> = (0..m).map(|j| central(j, 2)).collect();
    let mean_se = var.iter().map(|v| (v / n).sqrt()).collect();
    let var_se = (0..m).map(|j| ((central(j, 4) - var[j] * var[j]) / n).sqrt()).collect();
    let corr = DMatrix::from_fn(m, m, |j, k| {
        let c = draws.iter().map(|d| (d[j] - mean[j]) * (d[k] - mean[k])).sum::<f64>() / n;
        c / (var[j] * var[k]).sqrt()
    });
    SampleStats { mean, var, mean_se, var_se, corr }
}

fn generator_fidelity() -> Outcome {
    let n = 100_000;
    let target = CorrMatrix::new(DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.15, 0.3, 1.0, 0.2, 0.15, 0.2, 1.0])).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut notes = Vec::new();
    let mut pass = true;

    let p = [0.3, 0.5, 0.65];
    let bs = BernoulliSampler::new(&p, &target).unwrap();
    let bern: Vec<Vec<f64>> = (0..n).map(|_| bs.sample(&mut rng)).collect();
    let mu = [std::f64::consts::E, 1.5, 4.0];
    let ps = PoissonSampler::new(&mu, &target).unwrap();
    let pois: Vec<Vec<f64>> = (0..n).map(|_| ps.sample(&mut rng)).collect();
    // The per-call wrappers agree with the samplers for a fixed seed.
    let wrap_ok = gen_poisson_cluster(&mu, &target, &mut ChaCha8Rng::seed_from_u64(2)).unwrap()
        == ps.sample(&mut ChaCha8Rng::seed_from_u64(2));
    pass &= wrap_ok;
    for (name, draws, means, vars) in [
        ("bernoulli", &bern, p.to_vec(), p.iter().map(|q| q * (1.0 - q)).collect::<Vec<_>>()),
        ("poisson", &pois, mu.to_vec(), mu.to_vec()),
    ] {
        let s = sample_stats(draws);
        let corr_err = max_abs(&(&s.corr - target.as_matrix()));
        let mean_z = (0..3).map(|j| (s.mean[j] - means[j]).abs() / s.mean_se[j]).fold(0.0, f64::max);
        let var_z = (0..3).map(|j| (s.var[j] - vars[j]).abs() / s.var_se[j]).fold(0.0, f64::max);
        pass &= corr_err <= 0.015 && mean_z <= 3.0 && var_z <= 3.0;
        notes.push(format!("{name}: corr err {corr_err:.4}, mean {mean_z:.2} SE, var {var_z:.2} SE"));
    }
    let rejected = matches!(solve_tetrachoric(0.2, 0.7, 0.4), Err(GcrError::Feasibility(_)));
    let infeasible =
        CorrMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.0])).unwrap();
    let rejected2 = matches!(gen_bernoulli_cluster(&[0.2, 0.7], &infeasible, &mut rng), Err(GcrError::Feasibility(_)));
    pass &= rejected && rejected2;
    notes.push(format!("infeasible target rejected: {}", rejected && rejected2));
    outcome(pass, notes.join("; "))
}

// 12 --------------------------------------------------------------------

fn diagnostics_calibration() -> Outcome {
    let runs = 100;
    let within: SubgroupSpec = "within".parse().unwrap();
    let subgroup: SubgroupSpec = "within:same(u)".parse().unwrap();
    let cfg = DiagnosticsConfig::default();
    let correct = Exec::default().map_indexed(runs, |r| -> Result<f64, GcrError> {
        let rep = fit_replicate(Study::Study1Bernoulli, 200, 1_200_000 + r as u64, None, None)?;
        let res = standardized_residuals(&rep.fit, &rep.designs)?;
        Ok(subgroup_empirical_corr(&res, &rep.data.dataset, &within, &cfg)?.t_stat.unwrap_or(0.0))
    });
    let misfit = Exec::default().map_indexed(runs, |r| -> Result<f64, GcrError> {
        let rep = fit_replicate(Study::Study2Case1, 200, 1_300_000 + r as u64, Some("intercept"), Some(vec![0.0]))?;
        let res = standardized_residuals(&rep.fit, &rep.designs)?;
        let out = subgroup_empirical_corr(&res, &rep.data.dataset, &subgroup, &cfg)?;
        Ok(if out.rho_hat > 0.0 { out.p_value.unwrap_or(1.0) } else { 1.0 })
    });
    let quiet = correct.iter().filter(|t| matches!(t, Ok(t) if t.abs() < 2.0)).count();
    let flagged = misfit.iter().filter(|p| matches!(p, Ok(p) if *p < 0.01)).count();
    outcome(
        quiet as f64 >= 0.9 * runs as f64 && flagged as f64 >= 0.9 * runs as f64,
        format!("correct fits |t| < 2 in {quiet}/{runs}; independence misfit p < 0.01 in {flagged}/{runs}"),
    )
}

// 13 --------------------------------------------------------------------

fn cv_checks() -> Outcome {
    let brier = brier_score(&[1.0, 1.0], &[0.5, 0.5]).unwrap();
    let ll = log_loss(&[1.0], &[0.5]).unwrap();
    let data = make_scenario(ScenarioSpec::new(Study::Study2Case1, 40, 13)).unwrap();
    let mf = parse_mean_formula(&data.mean_formula).unwrap();
    let cf = parse_corr_formula(&data.corr_formula).unwrap();
    let cv = CvConfig { seed: 13, ..CvConfig::default() };
    let a = repeated_cv(&data.dataset, &mf, &cf, data.family, &FitConfig::default(), &cv).unwrap();
    let b = repeated_cv(&data.dataset, &mf, &cf, data.family, &FitConfig::default(), &cv).unwrap();
    let counts: Vec<usize> = a.metrics.iter().map(|m| m.n_scores()).collect();
    let pass = (brier - 0.25).abs() < 1e-15
        && (ll - 2f64.ln()).abs() < 1e-15
        && counts.iter().all(|&c| c == 75)
        && a == b;
    outcome(pass, format!("brier {brier}, log loss {ll:.6}, fold scores per metric {counts:?}, reproducible {}", a == b))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 13] = [
        ("transform round trip", round_trip),
        ("Fisher-z reduction", fisher_z),
        ("Jacobian correctness", jacobian),
        ("score identity", score_identity),
        ("Gaussian pseudo-expectation", gaussian_pseudo_expectation),
        ("Study-1 Gaussian replication", study1_gaussian),
        ("Study-1 Bernoulli replication", study1_bernoulli),
        ("Study-1 Poisson spot check", study1_poisson),
        ("Study-2 Case-2 dominance", study2_case2),
        ("independence-GLM equivalence", independence_equivalence),
        ("generator fidelity", generator_fidelity),
        ("diagnostics calibration", diagnostics_calibration),
        ("CV metric checks", cv_checks),
    ];
    let only: Option<Vec<usize>> = std::env::var("GCR_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let status = if out.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!out.pass);
        println!(
            "criterion {id:>2} {status} {name} [{:.1} s]: {}",
            start.elapsed().as_secs_f64(),
            out.detail
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
