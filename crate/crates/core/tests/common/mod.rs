//! Brute-force references, written independently of the pair-sum pass.
#![allow(dead_code)]

use hdustat::{KernelSpec, Marginal, RngSpec, Sample};
use rand::Rng;

pub const FAMILIES: [KernelSpec; 5] = [
    KernelSpec::GiniMeanDifference,
    KernelSpec::CharacteristicDispersion,
    KernelSpec::SpatialKendallTau,
    KernelSpec::HuberScoredCovariance { xi: 0.8 },
    KernelSpec::CoordinateProduct,
];

pub fn uniform_sample(n: usize, p: usize, seed: u64) -> Sample {
    let mut rng = RngSpec::new(seed, 12345).rng();
    let data = (0..n * p).map(|_| rng.random_range(-2.0..2.0)).collect();
    Sample::new(data, n, p).unwrap()
}

pub fn gaussian(n: usize, p: usize, sigma: f64, stream: RngSpec) -> Sample {
    hdustat::simulate_dataset(
        &hdustat::Design::iid(n, Marginal::normal(0.0, sigma), p),
        stream,
    )
    .unwrap()
}

/// U-statistic of rows `lo..hi` (0-based, half-open).
pub fn ustat_rows(s: &Sample, spec: &KernelSpec, lo: usize, hi: usize) -> Vec<f64> {
    let d = spec.dimension(s.p());
    let mut acc = vec![0.0; d];
    let mut count = 0usize;
    for i in lo..hi {
        for j in i + 1..hi {
            let h = spec.eval(s.row(i), s.row(j)).unwrap();
            for m in 0..d {
                acc[m] += h[m];
            }
            count += 1;
        }
    }
    acc.iter().map(|a| a / count as f64).collect()
}

/// Scaled sequential statistic at `k` straight from its definition.
pub fn brute_t(s: &Sample, spec: &KernelSpec, theta: &[f64], k: usize) -> Vec<f64> {
    let n = s.n() as f64;
    let u = ustat_rows(s, spec, 0, k);
    u.iter()
        .zip(theta)
        .map(|(u, t)| k as f64 / (2.0 * n.sqrt()) * (u - t))
        .collect()
}

pub fn brute_cusum(s: &Sample, spec: &KernelSpec, k: usize) -> Vec<f64> {
    let n = s.n();
    let pre = ustat_rows(s, spec, 0, k);
    let post = ustat_rows(s, spec, k, n);
    let f = k as f64 / n as f64;
    pre.iter()
        .zip(&post)
        .map(|(a, b)| (n as f64).sqrt() * f * (1.0 - f) * (a - b))
        .collect()
}

pub fn brute_distance(x: &Sample, y: &Sample, spec: &KernelSpec, lambda: f64) -> f64 {
    let k1 = (lambda * x.n() as f64 + 1e-9).floor() as usize;
    let k2 = (lambda * y.n() as f64 + 1e-9).floor() as usize;
    if k1.min(k2) < 2 {
        return 0.0;
    }
    let a = ustat_rows(x, spec, 0, k1);
    let b = ustat_rows(y, spec, 0, k2);
    a.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum()
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}
