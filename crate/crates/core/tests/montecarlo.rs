//! Distributional checks of the Gaussian machinery and the estimators.

mod common;

use common::gaussian;
use hdustat::gaussmc::{
    bridge_path_values, gaussian_partial_sums, sn_limit_sample, upper_quantile,
};
use hdustat::studies::median;
use hdustat::{cusum_process, cusum_statistic, Design, KernelSpec, Marginal, RngSpec};
use nalgebra::DMatrix;

fn root3() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.5, 0.8, 0.0, -0.3, 0.2, 0.6])
}

/// Sample covariance of `draws` (each of length d) and the standard error of
/// each entry, estimated from the products themselves.
fn cov_with_se(draws: &[Vec<f64>]) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = draws[0].len();
    let r = draws.len() as f64;
    let mut mean = DMatrix::zeros(d, d);
    let mut sq = DMatrix::zeros(d, d);
    for w in draws {
        for a in 0..d {
            for b in 0..d {
                let p = w[a] * w[b];
                mean[(a, b)] += p / r;
                sq[(a, b)] += p * p / r;
            }
        }
    }
    let se = (sq - mean.component_mul(&mean)).map(|v: f64| (v.max(0.0) / r).sqrt());
    (mean, se)
}

#[test]
fn partial_sum_endpoint_has_unit_variance() {
    let one = DMatrix::from_element(1, 1, 1.0);
    let ends: Vec<f64> = (0..10_000)
        .map(|r| {
            gaussian_partial_sums(&one, 50, RngSpec::new(11, r))
                .unwrap()
                .at(50)[0]
        })
        .collect();
    let mean = ends.iter().sum::<f64>() / ends.len() as f64;
    let var = ends.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (ends.len() - 1) as f64;
    assert!((0.94..=1.06).contains(&var), "Var(W_n) = {var}");
}

#[test]
fn partial_sum_covariance_matches_root() {
    let root = root3();
    let target = &root * root.transpose();
    let draws: Vec<Vec<f64>> = (0..10_000)
        .map(|r| {
            gaussian_partial_sums(&root, 20, RngSpec::new(12, r))
                .unwrap()
                .at(20)
                .to_vec()
        })
        .collect();
    let (cov, se) = cov_with_se(&draws);
    for a in 0..3 {
        for b in 0..3 {
            let z = (cov[(a, b)] - target[(a, b)]).abs() / se[(a, b)];
            assert!(
                z <= 5.0,
                "entry ({a},{b}): {} vs {} ({z:.2} SE)",
                cov[(a, b)],
                target[(a, b)]
            );
        }
    }
}

#[test]
fn bridge_midpoint_covariance_and_mean() {
    let root = root3();
    let grid = 64;
    let d = 3;
    let paths: Vec<Vec<f64>> = (0..20_000)
        .map(|i| bridge_path_values(&root, grid, RngSpec::new(13, 0), i).unwrap())
        .collect();
    for p in paths.iter().take(100) {
        assert!(p[..d].iter().chain(&p[grid * d..]).all(|v| *v == 0.0));
    }

    // 4 (1/2 - 1/4) = 1, so the midpoint covariance is root root^T
    let mid: Vec<Vec<f64>> = paths
        .iter()
        .map(|p| p[grid / 2 * d..(grid / 2 + 1) * d].to_vec())
        .collect();
    let (cov, se) = cov_with_se(&mid);
    let target = &root * root.transpose();
    for a in 0..d {
        for b in 0..d {
            let z = (cov[(a, b)] - target[(a, b)]).abs() / se[(a, b)];
            assert!(z <= 5.0, "entry ({a},{b}) off by {z:.2} SE");
        }
    }

    // mean at every interior grid point within 5 Monte Carlo SE (in norm)
    let r = paths.len() as f64;
    for j in 1..grid {
        let t = j as f64 / grid as f64;
        let mean: Vec<f64> = (0..d)
            .map(|l| paths.iter().map(|p| p[j * d + l]).sum::<f64>() / r)
            .collect();
        let var_sum: f64 = (0..d).map(|l| 4.0 * t * (1.0 - t) * target[(l, l)]).sum();
        let norm = mean.iter().map(|m| m * m).sum::<f64>().sqrt();
        assert!(
            norm <= 5.0 * (var_sum / r).sqrt(),
            "t = {t}: mean norm {norm}"
        );
    }
}

#[test]
fn w_quantiles_are_stable_and_ordered() {
    let a = sn_limit_sample(100_000, 2048, RngSpec::new(21, 0)).unwrap();
    let b = sn_limit_sample(100_000, 2048, RngSpec::new(22, 0)).unwrap();
    let (qa, qb) = (
        upper_quantile(&a, 0.05).unwrap(),
        upper_quantile(&b, 0.05).unwrap(),
    );
    assert!((qa - qb).abs() / qa.min(qb) <= 0.02, "{qa} vs {qb}");
    assert!(upper_quantile(&a, 0.01).unwrap() > qa);
    assert!(median(&a).abs() < 0.02);
}

#[test]
fn gmd_estimate_is_within_three_jackknife_errors() {
    let s = gaussian(4000, 1, 1.0, RngSpec::new(31, 0));
    let jk = hdustat::jackknife_projections(&s, &KernelSpec::GiniMeanDifference).unwrap();
    let cov = hdustat::covariance_estimate(&jk.projections).unwrap();
    let se = cov.ustat_standard_errors(4000)[0];
    let target = 2.0 / std::f64::consts::PI.sqrt();
    assert!(
        (jk.ustat[0] - target).abs() <= 3.0 * se,
        "{} vs {target} (se {se})",
        jk.ustat[0]
    );
}

/// Median location error of the CUSUM argmax over `reps` scale-change samples.
fn median_location_error(n: usize, reps: u64, seed: u64) -> f64 {
    let design = Design::iid(n, Marginal::normal(0.0, 1.0), 4)
        .with_change(0.5, vec![Marginal::normal(0.0, 1.3); 4]);
    let errors: Vec<f64> = (0..reps)
        .map(|r| {
            let s = hdustat::simulate_dataset(&design, RngSpec::new(seed, r)).unwrap();
            let (_, k) =
                cusum_statistic(&cusum_process(&s, &KernelSpec::GiniMeanDifference).unwrap());
            (k as f64 / n as f64 - 0.5).abs()
        })
        .collect();
    median(&errors)
}

#[test]
fn location_error_halves_when_n_doubles() {
    // k_hat - k* is O_p(1), so the fraction error scales like 1/n; 200
    // replications keep the median's own noise well below the factor of two
    let small = median_location_error(200, 200, 41);
    let large = median_location_error(400, 200, 41);
    eprintln!("median |tau_hat - tau*|: n=200 {small:.4}, n=400 {large:.4}");
    assert!(small > 0.0, "design too easy to measure the rate");
    assert!(large <= 0.5 * small, "n=200 {small}, n=400 {large}");
}
