//! Full and sequential U-statistics, jackknife projections and the projection
//! covariance estimator.
//!
//! Everything here is driven by one pass over the `n(n-1)/2` observation
//! pairs ([`PairSums`]). For each observation the pass keeps two running
//! kernel sums: over partners with a smaller index (`leading`) and over
//! partners with a larger index (`trailing`). Prefix pair sums, suffix pair
//! sums and leave-one-in row sums all follow from these without evaluating
//! the kernel again.

use nalgebra::DMatrix;

use crate::error::{input, Error, Result};
use crate::gaussmc::psd_sqrt;
use crate::kernels::KernelSpec;
use crate::sample::{Sample, SeqPath};

/// Compensated (Neumaier) accumulator over `d`-vectors.
#[derive(Debug, Clone)]
pub(crate) struct WideSum {
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl WideSum {
    pub(crate) fn zeros(d: usize) -> Self {
        Self {
            sum: vec![0.0; d],
            comp: vec![0.0; d],
        }
    }

    #[inline]
    pub(crate) fn add(&mut self, v: &[f64]) {
        for ((s, c), &x) in self.sum.iter_mut().zip(self.comp.iter_mut()).zip(v) {
            neumaier(s, c, x);
        }
    }

    pub(crate) fn value_into(&self, out: &mut [f64]) {
        for ((o, s), c) in out.iter_mut().zip(&self.sum).zip(&self.comp) {
            *o = s + c;
        }
    }
}

#[inline(always)]
fn neumaier(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

/// Per-observation kernel sums from a single pass over all pairs.
#[derive(Debug, Clone)]
pub struct PairSums {
    n: usize,
    d: usize,
    /// Row `j`: sum over `i < j` of `h(X_i, X_j)`, compensated.
    leading: Vec<f64>,
    /// Row `i`: sum over `j > i` of `h(X_i, X_j)`, compensated.
    trailing: Vec<f64>,
    kernel_evals: u64,
}

impl PairSums {
    /// Evaluates the kernel once on every unordered pair, `i` outer and `j` inner.
    pub fn accumulate(sample: &Sample, spec: &KernelSpec) -> Result<Self> {
        spec.validate()?;
        let (n, p) = (sample.n(), sample.p());
        let d = spec.dimension(p);
        let mut lead = vec![0.0; n * d];
        let mut lead_c = vec![0.0; n * d];
        let mut trail = vec![0.0; n * d];
        let mut trail_c = vec![0.0; n * d];
        let mut h = vec![0.0; d];
        let mut evals = 0u64;
        for i in 0..n {
            let xi = sample.row(i);
            let (ts, tc) = (
                &mut trail[i * d..(i + 1) * d],
                &mut trail_c[i * d..(i + 1) * d],
            );
            for j in i + 1..n {
                spec.eval_into(xi, sample.row(j), &mut h)
                    .map_err(|_| Error::DegeneratePair { i: i + 1, j: j + 1 })?;
                evals += 1;
                let ls = &mut lead[j * d..(j + 1) * d];
                let lc = &mut lead_c[j * d..(j + 1) * d];
                for m in 0..d {
                    neumaier(&mut ts[m], &mut tc[m], h[m]);
                    neumaier(&mut ls[m], &mut lc[m], h[m]);
                }
            }
        }
        for (s, c) in lead.iter_mut().zip(&lead_c) {
            *s += c;
        }
        for (s, c) in trail.iter_mut().zip(&trail_c) {
            *s += c;
        }
        Ok(Self {
            n,
            d,
            leading: lead,
            trailing: trail,
            kernel_evals: evals,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of kernel evaluations performed, always `n(n-1)/2`.
    pub fn kernel_evals(&self) -> u64 {
        self.kernel_evals
    }

    fn leading(&self, j: usize) -> &[f64] {
        &self.leading[j * self.d..(j + 1) * self.d]
    }

    fn trailing(&self, i: usize) -> &[f64] {
        &self.trailing[i * self.d..(i + 1) * self.d]
    }

    /// Pair sums over the first `k` observations, for `k = 1..=n`, flattened
    /// (`k = 1` is the zero vector).
    pub fn prefix_pair_sums(&self) -> Vec<f64> {
        let d = self.d;
        let mut acc = WideSum::zeros(d);
        let mut out = vec![0.0; self.n * d];
        for j in 0..self.n {
            acc.add(self.leading(j));
            acc.value_into(&mut out[j * d..(j + 1) * d]);
        }
        out
    }

    /// Pair sums over observations `k+1..=n`, stored at offset `k` for
    /// `k = 0..=n` (so offset 0 is the full sum and offsets `n-1`, `n` are 0).
    pub fn suffix_pair_sums(&self) -> Vec<f64> {
        let d = self.d;
        let mut acc = WideSum::zeros(d);
        let mut out = vec![0.0; (self.n + 1) * d];
        for i in (0..self.n).rev() {
            acc.add(self.trailing(i));
            acc.value_into(&mut out[i * d..(i + 1) * d]);
        }
        out
    }

    /// `U_k` for `k = 2..=n`.
    pub fn ustat_path(&self) -> SeqPath {
        let d = self.d;
        let prefix = self.prefix_pair_sums();
        let values = (2..=self.n)
            .flat_map(|k| {
                let pairs = choose2(k);
                prefix[(k - 1) * d..k * d].iter().map(move |s| s / pairs)
            })
            .collect();
        SeqPath::from_flat(values, d, 2, self.n)
    }

    /// Full-sample U-statistic.
    pub fn ustat(&self) -> Vec<f64> {
        let mut acc = WideSum::zeros(self.d);
        for j in 0..self.n {
            acc.add(self.leading(j));
        }
        let mut out = vec![0.0; self.d];
        acc.value_into(&mut out);
        let pairs = choose2(self.n);
        out.iter_mut().for_each(|v| *v /= pairs);
        out
    }

    /// Jackknife projections `g_i = (1/(n-1)) sum_{j != i} h(X_i, X_j) - U_n`.
    pub fn jackknife(&self) -> Jackknife {
        let (n, d) = (self.n, self.d);
        let u = self.ustat();
        let scale = 1.0 / (n as f64 - 1.0);
        let projections = DMatrix::from_fn(n, d, |i, m| {
            (self.leading(i)[m] + self.trailing(i)[m]) * scale - u[m]
        });
        Jackknife {
            projections,
            ustat: u,
            degenerate: n == 2,
        }
    }
}

#[inline]
pub(crate) fn choose2(k: usize) -> f64 {
    (k as f64) * (k as f64 - 1.0) / 2.0
}

/// `U_n = (2/(n(n-1))) sum_{i<j} h(X_i, X_j)`.
pub fn full_ustat(sample: &Sample, spec: &KernelSpec) -> Result<Vec<f64>> {
    Ok(PairSums::accumulate(sample, spec)?.ustat())
}

/// The `sqrt(n)`-scaled, `theta`-centered sequential statistic
/// `T_k = (1/(sqrt(n)(k-1))) sum_{i<j<=k} (h(X_i, X_j) - theta)` for `k = 2..=n`.
pub fn sequential_t(sample: &Sample, spec: &KernelSpec, theta: &[f64]) -> Result<SeqPath> {
    let d = spec.dimension(sample.p());
    if theta.len() != d {
        return input(format!(
            "theta has dimension {}, kernel output has {d}",
            theta.len()
        ));
    }
    let sums = PairSums::accumulate(sample, spec)?;
    Ok(scaled_path(&sums, theta))
}

pub(crate) fn scaled_path(sums: &PairSums, theta: &[f64]) -> SeqPath {
    let (n, d) = (sums.n(), sums.dim());
    let prefix = sums.prefix_pair_sums();
    let root_n = (n as f64).sqrt();
    let values = (2..=n)
        .flat_map(|k| {
            let pairs = choose2(k);
            let denom = root_n * (k as f64 - 1.0);
            prefix[(k - 1) * d..k * d]
                .iter()
                .zip(theta)
                .map(move |(s, t)| (s - pairs * t) / denom)
        })
        .collect();
    SeqPath::from_flat(values, d, 2, n)
}

/// Jackknife projections and the statistic they are centered at.
#[derive(Debug, Clone)]
pub struct Jackknife {
    /// `n x d`, row `i` is the projection of observation `i`.
    pub projections: DMatrix<f64>,
    pub ustat: Vec<f64>,
    /// Set when `n = 2`, where every projection is identically zero.
    pub degenerate: bool,
}

pub fn jackknife_projections(sample: &Sample, spec: &KernelSpec) -> Result<Jackknife> {
    Ok(PairSums::accumulate(sample, spec)?.jackknife())
}

/// Estimated projection covariance together with its PSD square root.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub sigma: DMatrix<f64>,
    /// `root * root^T` is the PSD projection of `sigma`.
    pub root: DMatrix<f64>,
    /// Sum of the magnitudes of clipped negative eigenvalues.
    pub clipped_mass: f64,
    pub min_eigenvalue: f64,
}

impl CovarianceEstimate {
    /// Standard errors of the U-statistic coordinates, `2 sqrt(sigma_ll / n)`.
    pub fn ustat_standard_errors(&self, n: usize) -> Vec<f64> {
        self.sigma
            .diagonal()
            .iter()
            .map(|v| 2.0 * (v.max(0.0) / n as f64).sqrt())
            .collect()
    }
}

/// `Sigma_hat = (1/n) sum_i g_i g_i^T` from an `n x d` projection matrix.
pub fn covariance_estimate(projections: &DMatrix<f64>) -> Result<CovarianceEstimate> {
    let n = projections.nrows();
    if n < 2 {
        return input("covariance estimate needs at least 2 projections");
    }
    if projections.iter().any(|v| !v.is_finite()) {
        return input("projections contain non-finite entries");
    }
    let mut sigma = projections.tr_mul(projections) / n as f64;
    // exact symmetry; the product is symmetric only up to rounding
    let d = sigma.nrows();
    for a in 0..d {
        for b in a + 1..d {
            let v = 0.5 * (sigma[(a, b)] + sigma[(b, a)]);
            sigma[(a, b)] = v;
            sigma[(b, a)] = v;
        }
    }
    let root = psd_sqrt(&sigma)?;
    Ok(CovarianceEstimate {
        sigma,
        root: root.root,
        clipped_mass: root.clipped_mass,
        min_eigenvalue: root.min_eigenvalue,
    })
}
