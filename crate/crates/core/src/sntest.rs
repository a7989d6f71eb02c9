//! Self-normalized two-sample relevant test of `|theta_1 - theta_2|^2 <= delta`.

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::gaussmc::{sn_limit_sample, upper_quantile, RngSpec};
use crate::kernels::KernelSpec;
use crate::sample::{Sample, SeqPath};
use crate::useq::PairSums;

/// Default number of simulated limit draws for the critical value.
pub const DEFAULT_W_PATHS: usize = 100_000;
/// Default Riemann grid for the limit functional.
pub const DEFAULT_W_GRID: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevantTestConfig {
    /// Tolerance on the squared distance.
    pub delta: f64,
    pub alpha: f64,
    /// Proportional-time grid `j/m, j = 1..=m`; `None` uses `m = min(n1, n2)`.
    pub lambda_grid_size: Option<usize>,
    pub w_paths: usize,
    pub w_grid_size: usize,
    pub rng: RngSpec,
}

impl RelevantTestConfig {
    pub fn new(delta: f64, alpha: f64, rng: RngSpec) -> Self {
        Self {
            delta,
            alpha,
            lambda_grid_size: None,
            w_paths: DEFAULT_W_PATHS,
            w_grid_size: DEFAULT_W_GRID,
            rng,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return input(format!("delta must be finite and >= 0, got {}", self.delta));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return input(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if matches!(self.lambda_grid_size, Some(m) if m < 8) {
            return input("lambda grid needs at least 8 points");
        }
        Ok(())
    }
}

/// Outcome of the relevant test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SNReport {
    pub s: f64,
    /// Squared distance between the full-sample statistics.
    pub d1: f64,
    /// Self-normalizer `V` (not squared).
    pub v: f64,
    pub q: f64,
    pub reject: bool,
    /// Effective sample size `n1 n2 / (n1 + n2)`.
    pub n_eff: f64,
    /// `V = 0`; `s` then carries the sign of `d1 - delta` as an infinity.
    pub degenerate: bool,
    pub lambda_grid_size: usize,
}

/// `j/m` for `j = 1..=m`.
pub fn uniform_grid(m: usize) -> Vec<f64> {
    (1..=m).map(|j| j as f64 / m as f64).collect()
}

/// `floor(lambda * n)`, guarded against products that land just below an integer.
pub fn floor_index(lambda: f64, n: usize) -> usize {
    (lambda * n as f64 + 1e-9).floor() as usize
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return input("lambda grid is empty");
    }
    if grid.iter().any(|l| !(*l > 0.0 && *l <= 1.0)) {
        return input("lambda grid points must lie in (0, 1]");
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return input("lambda grid must be strictly increasing");
    }
    if grid[grid.len() - 1] != 1.0 {
        return input("lambda grid must end at 1");
    }
    Ok(())
}

fn distance_from_paths(u1: &SeqPath, u2: &SeqPath, grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|&lambda| {
            let k1 = floor_index(lambda, u1.n());
            let k2 = floor_index(lambda, u2.n());
            if k1.min(k2) < 2 {
                return 0.0;
            }
            u1.at(k1)
                .iter()
                .zip(u2.at(k2))
                .map(|(a, b)| (a - b) * (a - b))
                .sum()
        })
        .collect()
}

/// `D(lambda) = |U1_{floor(lambda n1)} - U2_{floor(lambda n2)}|^2`, zero while
/// either prefix holds fewer than two observations.
pub fn distance_process(
    x: &Sample,
    y: &Sample,
    spec: &KernelSpec,
    grid: &[f64],
) -> Result<Vec<f64>> {
    if x.p() != y.p() {
        return input(format!("samples have {} and {} coordinates", x.p(), y.p()));
    }
    check_grid(grid)?;
    let u1 = PairSums::accumulate(x, spec)?.ustat_path();
    let u2 = PairSums::accumulate(y, spec)?.ustat_path();
    Ok(distance_from_paths(&u1, &u2, grid))
}

/// `V^2 = int_0^1 [lambda N (D(lambda) - D(1))]^2 d lambda` as a left-endpoint
/// sum: grid point `lambda_j` carries the cell `[lambda_j, lambda_{j+1})`, and
/// the head cell `[0, lambda_1)` contributes nothing.
pub fn self_normalizer(d: &[f64], grid: &[f64], n_eff: f64) -> Result<f64> {
    if grid.is_empty() {
        return input("lambda grid is empty");
    }
    if d.len() != grid.len() {
        return input(format!(
            "distance has {} points, grid has {}",
            d.len(),
            grid.len()
        ));
    }
    let last = d[d.len() - 1];
    let v2 = grid
        .windows(2)
        .zip(d)
        .map(|(cell, &dj)| {
            let width = cell[1] - cell[0];
            let value = cell[0] * n_eff * (dj - last);
            width * value * value
        })
        .sum();
    Ok(v2)
}

/// The statistic before it is compared with a critical value.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevantStatistic {
    pub s: f64,
    pub d1: f64,
    pub v: f64,
    pub n_eff: f64,
    pub degenerate: bool,
    pub lambda_grid_size: usize,
}

impl RelevantStatistic {
    pub fn decide(&self, q: f64) -> SNReport {
        SNReport {
            s: self.s,
            d1: self.d1,
            v: self.v,
            q,
            reject: self.s > q,
            n_eff: self.n_eff,
            degenerate: self.degenerate,
            lambda_grid_size: self.lambda_grid_size,
        }
    }
}

/// `S = N (D(1) - delta) / V`.
pub fn relevant_statistic(
    x: &Sample,
    y: &Sample,
    spec: &KernelSpec,
    delta: f64,
    lambda_grid_size: Option<usize>,
) -> Result<RelevantStatistic> {
    let (n1, n2) = (x.n(), y.n());
    if n1 < 4 || n2 < 4 {
        return input(format!(
            "relevant test needs n1, n2 >= 4, got {n1} and {n2}"
        ));
    }
    let m = lambda_grid_size.unwrap_or(n1.min(n2).max(8));
    let grid = uniform_grid(m);
    let d = distance_process(x, y, spec, &grid)?;
    let n_eff = (n1 as f64 * n2 as f64) / (n1 + n2) as f64;
    let v = self_normalizer(&d, &grid, n_eff)?.sqrt();
    let d1 = d[d.len() - 1];
    let numerator = n_eff * (d1 - delta);
    let (s, degenerate) = if v > 0.0 {
        (numerator / v, false)
    } else if numerator > 0.0 {
        (f64::INFINITY, true)
    } else if numerator < 0.0 {
        (f64::NEG_INFINITY, true)
    } else {
        (0.0, true)
    };
    Ok(RelevantStatistic {
        s,
        d1,
        v,
        n_eff,
        degenerate,
        lambda_grid_size: m,
    })
}

/// Upper-`alpha` quantile of the simulated self-normalized limit.
pub fn sn_critical_value(
    alpha: f64,
    w_paths: usize,
    w_grid_size: usize,
    rng: RngSpec,
) -> Result<f64> {
    let draws = sn_limit_sample(w_paths, w_grid_size, rng)?;
    upper_quantile(&draws, alpha)
}

pub fn run_relevant_test(
    x: &Sample,
    y: &Sample,
    spec: &KernelSpec,
    cfg: &RelevantTestConfig,
) -> Result<SNReport> {
    cfg.validate()?;
    let stat = relevant_statistic(x, y, spec, cfg.delta, cfg.lambda_grid_size)?;
    let q = sn_critical_value(cfg.alpha, cfg.w_paths, cfg.w_grid_size, cfg.rng)?;
    Ok(stat.decide(q))
}
