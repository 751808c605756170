use gcr_core::corr_manifold::{
    gz_inverse, gz_inverse_with, gz_transform, jacobian_rho_gamma, vecl_index, vecl_len,
    CorrMatrix, FixedPointOptions, GammaVector,
};
use gcr_core::exp_family::{family_moments, Family};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Correlation matrix from a random factor loading `A`: `D^-1/2 (A A^T + eps I) D^-1/2`.
fn corr_from(m: usize, loadings: &[f64]) -> CorrMatrix {
    let a = DMatrix::from_column_slice(m, m, &loadings[..m * m]);
    let s = &a * a.transpose() + DMatrix::identity(m, m) * 0.05;
    let d: Vec<f64> = (0..m).map(|i| s[(i, i)].sqrt()).collect();
    let r = DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { s[(i, j)] / (d[i] * d[j]) });
    CorrMatrix::new(r).unwrap()
}

fn corr_strategy(max_m: usize) -> impl Strategy<Value = CorrMatrix> {
    (2..=max_m).prop_flat_map(|m| {
        prop::collection::vec(-1.0f64..1.0, m * m).prop_map(move |v| corr_from(m, &v))
    })
}

fn gamma_strategy(max_m: usize) -> impl Strategy<Value = GammaVector> {
    (2..=max_m).prop_flat_map(|m| {
        prop::collection::vec(-1.5f64..1.5, vecl_len(m))
            .prop_map(move |v| GammaVector::new(m, v).unwrap())
    })
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn round_trip_up_to_twelve(r in corr_strategy(12)) {
        let back = gz_inverse(&gz_transform(&r).unwrap()).unwrap();
        prop_assert!(max_abs_diff(back.as_matrix(), r.as_matrix()) < 1e-8);
    }

    #[test]
    fn relabeling_permutes_gamma(
        (r, perm) in corr_strategy(8).prop_flat_map(|r| {
            let m = r.dim();
            (Just(r), Just((0..m).collect::<Vec<_>>()).prop_shuffle())
        })
    ) {
        let m = r.dim();
        let src = r.as_matrix();
        let permuted = CorrMatrix::new(DMatrix::from_fn(m, m, |a, b| src[(perm[a], perm[b])])).unwrap();
        let g = gz_transform(&r).unwrap();
        let gp = gz_transform(&permuted).unwrap();
        for j in 0..m {
            for k in 0..j {
                let (a, b) = (perm[j].max(perm[k]), perm[j].min(perm[k]));
                let expected = g.values()[vecl_index(m, a, b)];
                prop_assert!((gp.values()[vecl_index(m, j, k)] - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn jacobian_diagonal_nonnegative(r in corr_strategy(10)) {
        let jac = jacobian_rho_gamma(&r).unwrap();
        for i in 0..jac.nrows() {
            prop_assert!(jac[(i, i)] >= -1e-12, "diagonal {i} = {}", jac[(i, i)]);
        }
    }

    #[test]
    fn fixed_point_reaches_tolerance(g in gamma_strategy(10)) {
        let sol = gz_inverse_with(&g, None, FixedPointOptions::default()).unwrap();
        prop_assert!(sol.iterations <= 200);
        let last = *sol.residuals.last().unwrap();
        prop_assert!(last < 1e-12, "final residual {last}");
        for (i, &d) in sol.corr.as_matrix().diagonal().iter().enumerate() {
            prop_assert!((d - 1.0).abs() < 1e-12, "diag {i} = {d}");
        }
    }

    #[test]
    fn fixed_point_from_transform(r in corr_strategy(12)) {
        let sol = gz_inverse_with(&gz_transform(&r).unwrap(), None, FixedPointOptions::default()).unwrap();
        prop_assert!(sol.iterations <= 200);
        prop_assert!(*sol.residuals.last().unwrap() < 1e-12);
    }

    #[test]
    fn mean_is_increasing(eta1 in -20.0f64..20.0, gap in 1e-3f64..5.0, fam in 0usize..4) {
        let f = [Family::Gaussian, Family::Poisson, Family::Bernoulli, Family::Gamma][fam];
        let eta2 = (eta1 + gap).min(25.0);
        let lo = family_moments(f, eta1, 1.0).unwrap().mu;
        let hi = family_moments(f, eta2, 1.0).unwrap().mu;
        prop_assert!(lo < hi, "{f}: mu({eta1}) = {lo}, mu({eta2}) = {hi}");
    }

    #[test]
    fn cumulant_derivatives_agree_with_differences(eta in -5.0f64..5.0, fam in 0usize..4) {
        let f = [Family::Gaussian, Family::Poisson, Family::Bernoulli, Family::Gamma][fam];
        let theta = f.theta(eta);
        // Gamma's cumulant varies on the scale of |theta| itself.
        let scale = if f == Family::Gamma { theta.abs() } else { theta.abs().max(1.0) };
        let h = 1e-5 * scale;
        let at = |t: f64| f.cumulant_derivatives(t);
        let [_, a2, _, a4] = at(theta);
        let d1 = (at(theta + h)[0] - at(theta - h)[0]) / (2.0 * h);
        prop_assert!((d1 - a2).abs() <= 1e-6 * a2.abs(), "a'' {a2} vs {d1}");

        let h2 = 1e-4 * scale;
        let d2 = (at(theta + h2)[1] - 2.0 * a2 + at(theta - h2)[1]) / (h2 * h2);
        let mag = a4.abs().max(a2.abs());
        prop_assert!((d2 - a4).abs() <= 1e-6 * mag, "a'''' {a4} vs {d2}");
    }

    #[test]
    fn bernoulli_fourth_moment_at_least_one(eta in -30.0f64..30.0) {
        let m = family_moments(Family::Bernoulli, eta, 1.0).unwrap();
        prop_assert!(m.fourth_moment(1.0) >= 1.0 - 1e-12);
    }
}

#[test]
fn bernoulli_fourth_moment_equality_at_half() {
    let m = family_moments(Family::Bernoulli, 0.0, 1.0).unwrap();
    assert!((m.fourth_moment(1.0) - 1.0).abs() < 1e-15);
}

#[test]
fn gaussian_kurtosis_is_exactly_zero() {
    for eta in [-3.0, 0.0, 2.5] {
        assert_eq!(family_moments(Family::Gaussian, eta, 2.0).unwrap().kurt_ratio, 0.0);
    }
}

#[test]
fn two_by_two_is_fisher_z() {
    for rho in [-0.95, -0.5, 0.0, 0.5, 0.95] {
        let r = CorrMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0])).unwrap();
        let g = gz_transform(&r).unwrap();
        assert!((g.values()[0] - f64::atanh(rho)).abs() < 1e-10);
    }
}
