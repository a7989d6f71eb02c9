//! Retrospective single change-point detection with the first-versus-last
//! U-statistic CUSUM process.

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::gaussmc::{brownian_bridge_sups, sup_quantile, RngSpec};
use crate::kernels::KernelSpec;
use crate::sample::{norm2, Sample, SeqPath};
use crate::useq::{choose2, covariance_estimate, PairSums};

/// Default number of simulated bridge paths for the critical value.
pub const DEFAULT_BRIDGE_PATHS: usize = 20_000;
/// Smallest bridge grid used for critical values.
pub const MIN_BRIDGE_GRID: usize = 512;

/// Bridge grid for a series of length `n`: `max(n, 512)`.
pub fn bridge_grid_for(n: usize) -> usize {
    n.max(MIN_BRIDGE_GRID)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CusumResult {
    #[serde(skip)]
    pub path: Option<SeqPath>,
    pub t_n: f64,
    pub k_hat: usize,
    pub tau_hat: f64,
    pub q: f64,
    pub reject: bool,
    pub bridge_paths_used: usize,
    pub bridge_grid: usize,
    /// Smallest eigenvalue of the estimated projection covariance.
    pub lambda_min: f64,
    pub clipped_mass: f64,
}

/// CUSUM path plus the projection covariance, from one pass over the pairs.
#[derive(Debug, Clone)]
pub struct CusumPass {
    pub path: SeqPath,
    pub sums: PairSums,
}

impl CusumPass {
    pub fn run(sample: &Sample, spec: &KernelSpec) -> Result<Self> {
        let n = sample.n();
        if n < 4 {
            return input(format!("CUSUM needs n >= 4, got {n}"));
        }
        let sums = PairSums::accumulate(sample, spec)?;
        let path = cusum_from_sums(&sums);
        Ok(Self { path, sums })
    }
}

fn cusum_from_sums(sums: &PairSums) -> SeqPath {
    let (n, d) = (sums.n(), sums.dim());
    let prefix = sums.prefix_pair_sums();
    let suffix = sums.suffix_pair_sums();
    let nf = n as f64;
    let mut values = Vec::with_capacity((n - 3) * d);
    for k in 2..=n - 2 {
        let frac = k as f64 / nf;
        let weight = nf.sqrt() * frac * (1.0 - frac);
        let (lead, tail) = (choose2(k), choose2(n - k));
        let pre = &prefix[(k - 1) * d..k * d];
        let post = &suffix[k * d..(k + 1) * d];
        values.extend(
            pre.iter()
                .zip(post)
                .map(|(a, b)| weight * (a / lead - b / tail)),
        );
    }
    SeqPath::from_flat(values, d, 2, n)
}

/// `C_n(k) = sqrt(n) (k/n)(1 - k/n)(U_k - U*_k)` for `k = 2..=n-2`, where
/// `U*_k` is the U-statistic of observations `k+1..=n`.
pub fn cusum_process(sample: &Sample, spec: &KernelSpec) -> Result<SeqPath> {
    Ok(CusumPass::run(sample, spec)?.path)
}

/// `(max_k |C_n(k)|, smallest maximizing k)`.
pub fn cusum_statistic(path: &SeqPath) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, path.k_start());
    for (k, v) in path.iter() {
        let norm = norm2(v);
        if norm > best.0 {
            best = (norm, k);
        }
    }
    best
}

/// CUSUM test with a critical value from `n_paths` bridges scaled by the
/// jackknife covariance root, on a grid of `max(n, 512)` cells.
pub fn detect_change(
    sample: &Sample,
    spec: &KernelSpec,
    alpha: f64,
    n_paths: usize,
    rng: RngSpec,
) -> Result<CusumResult> {
    detect_change_on_grid(
        sample,
        spec,
        alpha,
        n_paths,
        bridge_grid_for(sample.n()),
        rng,
    )
}

pub fn detect_change_on_grid(
    sample: &Sample,
    spec: &KernelSpec,
    alpha: f64,
    n_paths: usize,
    grid: usize,
    rng: RngSpec,
) -> Result<CusumResult> {
    let n = sample.n();
    if n < 5 {
        return input(format!("change-point detection needs n >= 5, got {n}"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return input(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    if n_paths < 1000 {
        return input(format!("need at least 1000 bridge paths, got {n_paths}"));
    }
    let pass = CusumPass::run(sample, spec)?;
    let (t_n, k_hat) = cusum_statistic(&pass.path);
    let cov = covariance_estimate(&pass.sums.jackknife().projections)?;
    let sups = brownian_bridge_sups(&cov.root, grid, n_paths, rng)?;
    let q = sup_quantile(&sups, alpha)?;
    Ok(CusumResult {
        path: Some(pass.path),
        t_n,
        k_hat,
        tau_hat: k_hat as f64 / n as f64,
        q,
        reject: t_n > q,
        bridge_paths_used: n_paths,
        bridge_grid: grid,
        lambda_min: cov.min_eigenvalue,
        clipped_mass: cov.clipped_mass,
    })
}

/// Pre-break, post-break and cross expectations of the kernel at a break `tau_star`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub mu1: Vec<f64>,
    pub mu2: Vec<f64>,
    pub mu12: Vec<f64>,
    pub tau_star: f64,
}

impl DriftSpec {
    pub fn new(mu1: Vec<f64>, mu2: Vec<f64>, mu12: Vec<f64>, tau_star: f64) -> Result<Self> {
        if mu1.len() != mu2.len() || mu1.len() != mu12.len() || mu1.is_empty() {
            return input("drift vectors must share a positive dimension");
        }
        if !(tau_star > 0.0 && tau_star < 1.0) {
            return input(format!("tau* must lie in (0, 1), got {tau_star}"));
        }
        let spec = Self {
            mu1,
            mu2,
            mu12,
            tau_star,
        };
        if spec.shift_norm() <= 0.0 {
            return input("pre- and post-break expectations coincide");
        }
        Ok(spec)
    }

    /// `delta = mu2 - mu1`.
    pub fn shift(&self) -> Vec<f64> {
        self.mu2.iter().zip(&self.mu1).map(|(b, a)| b - a).collect()
    }

    pub fn shift_norm(&self) -> f64 {
        norm2(&self.shift())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Limit of the rescaled CUSUM norm under a single break.
pub fn drift_v(spec: &DriftSpec, t: f64) -> Result<f64> {
    if !(t > 0.0 && t < 1.0) {
        return input(format!("t must lie in (0, 1), got {t}"));
    }
    let tau = spec.tau_star;
    let delta = spec.shift();
    let dn = norm2(&delta);
    let bracket: Vec<f64> = if t <= tau {
        delta
            .iter()
            .zip(spec.mu1.iter().zip(&spec.mu12))
            .map(|(dl, (m1, m12))| {
                (1.0 - tau).powi(2) * (-dl / dn) + 2.0 * (tau - t) * (1.0 - tau) * (m1 - m12) / dn
            })
            .collect()
    } else {
        delta
            .iter()
            .zip(spec.mu12.iter().zip(&spec.mu2))
            .map(|(dl, (m12, m2))| tau * tau * (-dl / dn) + 2.0 * tau * (t - tau) * (m12 - m2) / dn)
            .collect()
    };
    let prefactor = if t <= tau {
        t / (1.0 - t)
    } else {
        (1.0 - t) / t
    };
    Ok(prefactor * norm2(&bracket))
}

/// Both strict inequalities that make `tau*` the unique maximizer of the drift.
pub fn check_geometric_constraints(spec: &DriftSpec) -> bool {
    let delta = spec.shift();
    let dd = dot(&delta, &delta);
    let pre: Vec<f64> = spec
        .mu1
        .iter()
        .zip(&spec.mu12)
        .map(|(a, b)| a - b)
        .collect();
    let post: Vec<f64> = spec
        .mu12
        .iter()
        .zip(&spec.mu2)
        .map(|(a, b)| a - b)
        .collect();
    2.0 * spec.tau_star * dot(&delta, &pre) < dd
        && 2.0 * (1.0 - spec.tau_star) * dot(&delta, &post) < dd
}
