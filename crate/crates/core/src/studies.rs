//! Seeded Monte Carlo studies: size, power, coupling quality, the degenerate
//! maximal inequality and critical-value tables.
//!
//! Replication `r` draws its data from stream `r` of the master seed; the
//! second sample of a two-sample design uses stream `SECOND_SAMPLE_STREAM + r`
//! and bridge simulations use `BRIDGE_STREAM + r`. Replications run in
//! parallel and are aggregated in replication order.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cpdetect::{bridge_grid_for, cusum_statistic, detect_change_on_grid, CusumPass};
use crate::error::{Error, Result};
use crate::gaussmc::{
    brownian_bridge_sups, psd_sqrt, sn_limit_sample, sup_quantile, upper_quantile, RngSpec,
};
use crate::kernels::KernelSpec;
use crate::sample::{norm2, Sample};
use crate::sim::{simulate_dataset, Design};
use crate::sntest::relevant_statistic;
use crate::useq::PairSums;

pub const SECOND_SAMPLE_STREAM: u64 = 1 << 40;
pub const BRIDGE_STREAM: u64 = 2 << 40;
pub const LIMIT_STREAM: u64 = 3 << 40;

/// Below this many replications a rate is flagged as unreliable.
pub const LOW_REPLICATION: usize = 100;

/// How the relevance tolerance is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum DeltaRule {
    Fixed(f64),
    /// `factor * |theta_x - theta_y|^2` from the closed-form parameters.
    BoundaryScaled(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "snake_case")]
pub enum StudyTest {
    Relevant {
        x: Design,
        y: Design,
        delta: DeltaRule,
        lambda_grid_size: Option<usize>,
        w_paths: usize,
        w_grid_size: usize,
    },
    Changepoint {
        design: Design,
        n_paths: usize,
        bridge_grid: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub kernel: KernelSpec,
    pub alpha: f64,
    pub replications: usize,
    pub seed: u64,
    pub test: StudyTest,
}

impl StudyConfig {
    /// The same study under its null: no break for the CUSUM test, the
    /// boundary tolerance for the relevant test.
    pub fn null_version(&self) -> Self {
        let test = match &self.test {
            StudyTest::Relevant {
                x,
                y,
                lambda_grid_size,
                w_paths,
                w_grid_size,
                ..
            } => StudyTest::Relevant {
                x: x.clone(),
                y: y.clone(),
                delta: DeltaRule::BoundaryScaled(1.0),
                lambda_grid_size: *lambda_grid_size,
                w_paths: *w_paths,
                w_grid_size: *w_grid_size,
            },
            StudyTest::Changepoint {
                design,
                n_paths,
                bridge_grid,
            } => StudyTest::Changepoint {
                design: design.without_change(),
                n_paths: *n_paths,
                bridge_grid: *bridge_grid,
            },
        };
        Self {
            test,
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be >= 1".into()));
        }
        match &self.test {
            StudyTest::Relevant { x, y, .. } => {
                x.validate()?;
                y.validate()?;
                if x.p() != y.p() {
                    return Err(Error::Config(
                        "both samples need the same coordinate count".into(),
                    ));
                }
                if x.n < 4 || y.n < 4 {
                    return Err(Error::Config(
                        "relevant test needs n >= 4 per sample".into(),
                    ));
                }
            }
            StudyTest::Changepoint { design, .. } => {
                design.validate()?;
                if design.n < 5 {
                    return Err(Error::Config("change-point study needs n >= 5".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub statistic: f64,
    pub critical_value: f64,
    pub reject: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_hat: Option<f64>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOutcome {
    pub replications: usize,
    pub rejections: usize,
    pub rate: f64,
    /// Binomial standard error `sqrt(rate (1 - rate) / R)` at the nominal level.
    pub standard_error: f64,
    pub low_replication: bool,
    /// Tolerance actually used by the relevant test.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Closed-form `|theta_x - theta_y|^2`, when available.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_distance_sq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_tau_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_abs_tau_error: Option<f64>,
    pub per_replication: Vec<Replication>,
}

/// Runs the configured test `R` times and reports the rejection rate.
pub fn rejection_study(cfg: &StudyConfig) -> Result<StudyOutcome> {
    cfg.validate()?;
    let reps = cfg.replications;
    let (per_replication, delta, theta_distance_sq, tau_star) = match &cfg.test {
        StudyTest::Relevant {
            x,
            y,
            delta,
            lambda_grid_size,
            w_paths,
            w_grid_size,
        } => {
            let distance = theta_distance_sq(&cfg.kernel, x, y);
            let delta = match *delta {
                DeltaRule::Fixed(v) => v,
                DeltaRule::BoundaryScaled(f) => f * distance.clone()?,
            };
            if !(delta >= 0.0 && delta.is_finite()) {
                return Err(Error::Config(format!(
                    "delta must be finite and >= 0, got {delta}"
                )));
            }
            let limit =
                sn_limit_sample(*w_paths, *w_grid_size, RngSpec::new(cfg.seed, LIMIT_STREAM))?;
            let q = upper_quantile(&limit, cfg.alpha)?;
            let reps: Result<Vec<Replication>> = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let xs = simulate_dataset(x, RngSpec::new(cfg.seed, r as u64))?;
                    let ys = simulate_dataset(
                        y,
                        RngSpec::new(cfg.seed, SECOND_SAMPLE_STREAM + r as u64),
                    )?;
                    let stat = relevant_statistic(&xs, &ys, &cfg.kernel, delta, *lambda_grid_size)?;
                    Ok(Replication {
                        statistic: stat.s,
                        critical_value: q,
                        reject: stat.s > q,
                        tau_hat: None,
                        degenerate: stat.degenerate,
                    })
                })
                .collect();
            (reps?, Some(delta), distance.ok(), None)
        }
        StudyTest::Changepoint {
            design,
            n_paths,
            bridge_grid,
        } => {
            let grid = bridge_grid.unwrap_or_else(|| bridge_grid_for(design.n));
            let reps: Result<Vec<Replication>> = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let sample = simulate_dataset(design, RngSpec::new(cfg.seed, r as u64))?;
                    let res = detect_change_on_grid(
                        &sample,
                        &cfg.kernel,
                        cfg.alpha,
                        *n_paths,
                        grid,
                        RngSpec::new(cfg.seed, BRIDGE_STREAM + r as u64),
                    )?;
                    Ok(Replication {
                        statistic: res.t_n,
                        critical_value: res.q,
                        reject: res.reject,
                        tau_hat: Some(res.tau_hat),
                        degenerate: res.q == 0.0,
                    })
                })
                .collect();
            let tau_star = design.change.as_ref().map(|c| c.tau_star);
            (reps?, None, None, tau_star)
        }
    };
    let rejections = per_replication.iter().filter(|r| r.reject).count();
    let rate = rejections as f64 / reps as f64;
    let taus: Vec<f64> = per_replication.iter().filter_map(|r| r.tau_hat).collect();
    let median_tau_hat = (!taus.is_empty()).then(|| median(&taus));
    let median_abs_tau_error =
        tau_star.map(|t| median(&taus.iter().map(|h| (h - t).abs()).collect::<Vec<_>>()));
    Ok(StudyOutcome {
        replications: reps,
        rejections,
        rate,
        standard_error: binomial_se(cfg.alpha, reps),
        low_replication: reps < LOW_REPLICATION,
        delta,
        theta_distance_sq,
        median_tau_hat,
        median_abs_tau_error,
        per_replication,
    })
}

/// Rejection rate under the null version of the study.
pub fn size_study(cfg: &StudyConfig) -> Result<StudyOutcome> {
    rejection_study(&cfg.null_version())
}

/// Rejection rate under the configured alternative.
pub fn power_study(cfg: &StudyConfig) -> Result<StudyOutcome> {
    rejection_study(cfg)
}

/// `sqrt(p (1 - p) / R)`.
pub fn binomial_se(p: f64, reps: usize) -> f64 {
    (p * (1.0 - p) / reps as f64).sqrt()
}

fn theta_distance_sq(kernel: &KernelSpec, x: &Design, y: &Design) -> Result<f64> {
    let tx = kernel.closed_form_theta(&x.marginals)?;
    let ty = kernel.closed_form_theta(&y.marginals)?;
    Ok(tx.iter().zip(&ty).map(|(a, b)| (a - b) * (a - b)).sum())
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Two-sample Kolmogorov-Smirnov distance `sup_x |F_a(x) - F_b(x)|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::NAN;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut sup = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        // step past every copy of x in both samples before comparing
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    sup
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingConfig {
    pub kernel: KernelSpec,
    /// Null design; the projection covariance must be known in closed form.
    pub design: Design,
    pub replications: usize,
    pub bridge_paths: usize,
    pub bridge_grid: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingOutcome {
    pub ks_distance: f64,
    pub sigma_diag: Vec<f64>,
    pub statistic_mean: f64,
    pub bridge_mean: f64,
    pub statistic_q95: f64,
    pub bridge_q95: f64,
    pub replications: usize,
    pub bridge_paths: usize,
    pub bridge_grid: usize,
}

/// Compares the law of `T_n` under the null with the sup-norm of the scaled
/// bridge built from the true projection covariance.
pub fn coupling_check(cfg: &CouplingConfig) -> Result<CouplingOutcome> {
    cfg.design.validate()?;
    if cfg.design.change.is_some() {
        return Err(Error::Config(
            "coupling check needs a design without a break".into(),
        ));
    }
    if cfg.replications == 0 || cfg.bridge_paths == 0 {
        return Err(Error::Config(
            "replications and bridge paths must be >= 1".into(),
        ));
    }
    if cfg.design.n < 4 {
        return Err(Error::Config("coupling check needs n >= 4".into()));
    }
    let sigma_diag = cfg
        .kernel
        .closed_form_projection_variances(&cfg.design.marginals)?;
    let sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(sigma_diag.clone()));
    let root = psd_sqrt(&sigma)?.root;
    let stats: Result<Vec<f64>> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let sample = simulate_dataset(&cfg.design, RngSpec::new(cfg.seed, r as u64))?;
            Ok(cusum_statistic(&CusumPass::run(&sample, &cfg.kernel)?.path).0)
        })
        .collect();
    let stats = stats?;
    let grid = cfg
        .bridge_grid
        .unwrap_or_else(|| bridge_grid_for(cfg.design.n));
    let bridge = brownian_bridge_sups(
        &root,
        grid,
        cfg.bridge_paths,
        RngSpec::new(cfg.seed, BRIDGE_STREAM),
    )?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(CouplingOutcome {
        ks_distance: ks_distance(&stats, &bridge.sup_norms),
        sigma_diag,
        statistic_mean: mean(&stats),
        bridge_mean: mean(&bridge.sup_norms),
        statistic_q95: upper_quantile(&stats, 0.05)?,
        bridge_q95: upper_quantile(&bridge.sup_norms, 0.05)?,
        replications: cfg.replications,
        bridge_paths: cfg.bridge_paths,
        bridge_grid: grid,
    })
}

/// `M_k = sum_{i<j<=k} (X_i - mu) o (X_j - mu)` for `k = 2..=n`, flattened.
pub fn degenerate_partial_sums(sample: &Sample, mu: &[f64]) -> Result<Vec<f64>> {
    let centered = sample.centered(mu)?;
    let sums = PairSums::accumulate(&centered, &KernelSpec::CoordinateProduct)?;
    let d = sums.dim();
    Ok(sums.prefix_pair_sums()[d..].to_vec())
}

/// `max_{2<=k<=n} |M_k|_2 / (k - 1)`.
pub fn degenerate_max_statistic(sample: &Sample, mu: &[f64]) -> Result<f64> {
    let m = degenerate_partial_sums(sample, mu)?;
    let d = sample.p();
    Ok(m.chunks_exact(d)
        .enumerate()
        .map(|(i, v)| norm2(v) / (i + 1) as f64)
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Config {
    pub n_ladder: Vec<usize>,
    pub dims: Vec<usize>,
    pub replications: usize,
    /// Common mean of every coordinate (unit-variance Gaussian data).
    pub mu: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Row {
    pub d: usize,
    pub mean_statistic: Vec<f64>,
    pub std_error: Vec<f64>,
    /// Least-squares slope of `ln(mean)` against `ln(n)`.
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Outcome {
    pub n_ladder: Vec<usize>,
    pub rows: Vec<Lemma1Row>,
}

/// Growth of the normalized degenerate partial-sum maximum along a ladder of `n`.
pub fn lemma1_check(cfg: &Lemma1Config) -> Result<Lemma1Outcome> {
    if cfg.n_ladder.len() < 2 || cfg.n_ladder.iter().any(|&n| n < 2) {
        return Err(Error::Config(
            "n ladder needs at least two sizes, each >= 2".into(),
        ));
    }
    if cfg.dims.is_empty() || cfg.dims.contains(&0) || cfg.replications == 0 {
        return Err(Error::Config(
            "dims and replications must be positive".into(),
        ));
    }
    let mut rows = Vec::new();
    for (di, &d) in cfg.dims.iter().enumerate() {
        let mut means = Vec::new();
        let mut ses = Vec::new();
        for (ni, &n) in cfg.n_ladder.iter().enumerate() {
            let design = Design::iid(n, crate::dist::Marginal::normal(cfg.mu, 1.0), d);
            let cell = (di * cfg.n_ladder.len() + ni) as u64;
            let mu = vec![cfg.mu; d];
            let stats: Result<Vec<f64>> = (0..cfg.replications)
                .into_par_iter()
                .map(|r| {
                    let s = simulate_dataset(
                        &design,
                        RngSpec::new(cfg.seed, r as u64).substream(cell),
                    )?;
                    degenerate_max_statistic(&s, &mu)
                })
                .collect();
            let stats = stats?;
            let m = stats.iter().sum::<f64>() / stats.len() as f64;
            let var = stats.iter().map(|s| (s - m).powi(2)).sum::<f64>()
                / (stats.len().max(2) - 1) as f64;
            means.push(m);
            ses.push((var / stats.len() as f64).sqrt());
        }
        let xs: Vec<f64> = cfg.n_ladder.iter().map(|&n| (n as f64).ln()).collect();
        let ys: Vec<f64> = means.iter().map(|m| m.ln()).collect();
        rows.push(Lemma1Row {
            d,
            mean_statistic: means,
            std_error: ses,
            exponent: ols_slope(&xs, &ys),
        });
    }
    Ok(Lemma1Outcome {
        n_ladder: cfg.n_ladder.clone(),
        rows,
    })
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTableConfig {
    pub alphas: Vec<f64>,
    pub w_paths: usize,
    pub w_grid_size: usize,
    /// Covariance for the bridge column; `None` skips it.
    #[serde(skip)]
    pub sigma: Option<DMatrix<f64>>,
    pub bridge_paths: usize,
    pub bridge_grid: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileRow {
    pub alpha: f64,
    pub w_quantile: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bridge_quantile: Option<f64>,
}

/// Simulated upper quantiles of the self-normalized limit and, optionally,
/// of the bridge sup-norm at a given covariance.
pub fn quantile_table(cfg: &QuantileTableConfig) -> Result<Vec<QuantileRow>> {
    let w = sn_limit_sample(
        cfg.w_paths,
        cfg.w_grid_size,
        RngSpec::new(cfg.seed, LIMIT_STREAM),
    )?;
    let bridge = match &cfg.sigma {
        Some(sigma) => {
            let root = psd_sqrt(sigma)?.root;
            Some(brownian_bridge_sups(
                &root,
                cfg.bridge_grid,
                cfg.bridge_paths,
                RngSpec::new(cfg.seed, BRIDGE_STREAM),
            )?)
        }
        None => None,
    };
    cfg.alphas
        .iter()
        .map(|&alpha| {
            Ok(QuantileRow {
                alpha,
                w_quantile: upper_quantile(&w, alpha)?,
                bridge_quantile: bridge
                    .as_ref()
                    .map(|b| sup_quantile(b, alpha))
                    .transpose()?,
            })
        })
        .collect()
}
