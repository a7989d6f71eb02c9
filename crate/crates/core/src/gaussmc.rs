//! Gaussian machinery: PSD square roots, Gaussian partial-sum paths, scaled
//! Brownian-bridge sup-norms and the self-normalized limit law.
//!
//! # Random streams
//!
//! Every draw comes from ChaCha8 (`rand_chacha`). An [`RngSpec`] names a
//! stream by `(master_seed, stream_id)`: the generator is seeded from
//! `master_seed` via `SeedableRng::seed_from_u64` and then switched to the
//! ChaCha stream `stream_id`. Path `i` of a batch simulation uses
//! [`RngSpec::substream`]`(i)`, a stream keyed by a SplitMix64 mix of the
//! parent pair, so batch output does not depend on how paths are scheduled
//! across threads.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::sample::SeqPath;

/// Names a reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Child stream `index`, independent of its siblings and of the parent.
    pub fn substream(&self, index: u64) -> RngSpec {
        let key = splitmix64(
            self.master_seed ^ splitmix64(self.stream_id.wrapping_add(0x5851_f42d_4c95_7f2d)),
        );
        RngSpec {
            master_seed: key,
            stream_id: index,
        }
    }

    /// Same seed, stream shifted by `offset`.
    pub fn offset(&self, offset: u64) -> RngSpec {
        RngSpec {
            master_seed: self.master_seed,
            stream_id: self.stream_id.wrapping_add(offset),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A PSD square root with eigenvalue diagnostics.
#[derive(Debug, Clone)]
pub struct PsdRoot {
    pub root: DMatrix<f64>,
    /// Sum of `|lambda|` over clipped negative eigenvalues.
    pub clipped_mass: f64,
    pub min_eigenvalue: f64,
}

/// Symmetric square root `V diag(sqrt(max(lambda, 0))) V^T`.
///
/// Accepts matrices symmetric to within `1e-8` (relative to the largest entry)
/// and symmetrizes them before decomposing.
pub fn psd_sqrt(sigma: &DMatrix<f64>) -> Result<PsdRoot> {
    if !sigma.is_square() || sigma.nrows() == 0 {
        return input("covariance must be a non-empty square matrix");
    }
    if sigma.iter().any(|v| !v.is_finite()) {
        return input("covariance contains non-finite entries");
    }
    let scale = sigma.amax().max(1.0);
    let asym = (sigma - sigma.transpose()).amax();
    if asym > 1e-8 * scale {
        return input(format!(
            "covariance is not symmetric (max asymmetry {asym:.3e})"
        ));
    }
    let sym = (sigma + sigma.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut clipped_mass = 0.0;
    let mut min_eigenvalue = f64::INFINITY;
    let roots = eig.eigenvalues.map(|l| {
        min_eigenvalue = min_eigenvalue.min(l);
        if l < 0.0 {
            clipped_mass -= l;
            0.0
        } else {
            l.sqrt()
        }
    });
    let v = &eig.eigenvectors;
    let mut root = v * DMatrix::from_diagonal(&roots) * v.transpose();
    root = (&root + root.transpose()) * 0.5;
    Ok(PsdRoot {
        root,
        clipped_mass,
        min_eigenvalue,
    })
}

#[inline]
fn matvec(a: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    let d = x.len();
    out.iter_mut().for_each(|o| *o = 0.0);
    // column-major storage: accumulate column by column
    for (col, &xc) in a.column_iter().zip(x).take(d) {
        for (o, &v) in out.iter_mut().zip(col.iter()) {
            *o += v * xc;
        }
    }
}

/// `W_k = n^{-1/2} sum_{i<=k} root * xi_i` for `k = 1..=n` with `xi_i ~ N(0, I)`.
pub fn gaussian_partial_sums(root: &DMatrix<f64>, n: usize, rng: RngSpec) -> Result<SeqPath> {
    if n == 0 {
        return input("partial-sum path needs n >= 1");
    }
    check_root(root)?;
    let d = root.nrows();
    let mut gen = rng.rng();
    let scale = 1.0 / (n as f64).sqrt();
    let mut xi = vec![0.0; d];
    let mut z = vec![0.0; d];
    let mut acc = vec![0.0; d];
    let mut values = Vec::with_capacity(n * d);
    for _ in 0..n {
        xi.iter_mut().for_each(|v| *v = gen.sample(StandardNormal));
        matvec(root, &xi, &mut z);
        for (a, v) in acc.iter_mut().zip(&z) {
            *a += v * scale;
        }
        values.extend_from_slice(&acc);
    }
    Ok(SeqPath::from_flat(values, d, 1, n))
}

fn check_root(root: &DMatrix<f64>) -> Result<()> {
    if !root.is_square() || root.nrows() == 0 {
        return input("root must be a non-empty square matrix");
    }
    if root.iter().any(|v| !v.is_finite()) {
        return input("root contains non-finite entries");
    }
    Ok(())
}

/// Simulated sup-norms of the scaled bridge `2 * root * B(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgePathSet {
    pub sup_norms: Vec<f64>,
    pub n_paths: usize,
    pub grid_size: usize,
}

/// Per-thread scratch for bridge simulation.
struct BridgeScratch {
    /// `2 * root`, row-major.
    scaled_root: Vec<f64>,
    times: Vec<f64>,
    increments: Vec<f64>,
    end: Vec<f64>,
    running: Vec<f64>,
    bridge: Vec<f64>,
    image: Vec<f64>,
}

impl BridgeScratch {
    fn new(root: &DMatrix<f64>, m: usize) -> Self {
        let d = root.nrows();
        let scaled_root = (0..d * d).map(|i| 2.0 * root[(i / d, i % d)]).collect();
        Self {
            scaled_root,
            times: (1..=m).map(|j| j as f64 / m as f64).collect(),
            increments: vec![0.0; d * m],
            end: vec![0.0; d],
            running: vec![0.0; d],
            bridge: vec![0.0; d],
            image: vec![0.0; d],
        }
    }
}

/// Simulates one path of `2 * root * (B(t_j) - t_j B(1))` on `t_j = j/m`,
/// calling `visit(j, value)` for `j = 0..=m`, and returns the sup of the norm
/// over the interior points.
fn bridge_path<R: Rng>(
    m: usize,
    rng: &mut R,
    scratch: &mut BridgeScratch,
    mut visit: impl FnMut(usize, &[f64]),
) -> f64 {
    let d = scratch.end.len();
    let step = 1.0 / (m as f64).sqrt();
    let BridgeScratch {
        scaled_root,
        times,
        increments,
        end,
        running,
        bridge,
        image,
    } = scratch;
    for v in increments.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = z * step;
    }
    // B(1), summed in the same order as the running sums below
    end.fill(0.0);
    for inc in increments.chunks_exact(d) {
        end.iter_mut().zip(inc).for_each(|(e, v)| *e += v);
    }
    running.fill(0.0);
    image.fill(0.0);
    visit(0, image);
    let mut sup_sq = 0.0f64;
    for (j, (inc, &t)) in increments
        .chunks_exact(d)
        .zip(times.iter())
        .take(m - 1)
        .enumerate()
    {
        running.iter_mut().zip(inc).for_each(|(r, v)| *r += v);
        for ((b, r), e) in bridge.iter_mut().zip(running.iter()).zip(end.iter()) {
            *b = r - t * e;
        }
        let mut norm_sq = 0.0;
        for (out, row) in image.iter_mut().zip(scaled_root.chunks_exact(d)) {
            *out = row.iter().zip(bridge.iter()).map(|(a, b)| a * b).sum();
            norm_sq += *out * *out;
        }
        sup_sq = sup_sq.max(norm_sq);
        visit(j + 1, image);
    }
    image.fill(0.0);
    visit(m, image);
    sup_sq.sqrt()
}

/// Sup-norms of `2 * root * B(t)` over the interior grid `t_j = j/m` for
/// `n_paths` independent standard bridges `B`.
pub fn brownian_bridge_sups(
    root: &DMatrix<f64>,
    grid_size: usize,
    n_paths: usize,
    rng: RngSpec,
) -> Result<BridgePathSet> {
    if grid_size < 2 {
        return input("bridge grid needs at least 2 cells");
    }
    if n_paths == 0 {
        return input("need at least one bridge path");
    }
    check_root(root)?;
    let sup_norms = (0..n_paths)
        .into_par_iter()
        .map_init(
            || BridgeScratch::new(root, grid_size),
            |scratch, path| {
                let mut gen = rng.substream(path as u64).rng();
                bridge_path(grid_size, &mut gen, scratch, |_, _| {})
            },
        )
        .collect();
    Ok(BridgePathSet {
        sup_norms,
        n_paths,
        grid_size,
    })
}

/// Full path of `2 * root * B(t_j)`, `j = 0..=m`, flattened; path `index`
/// of the stream used by [`brownian_bridge_sups`].
pub fn bridge_path_values(
    root: &DMatrix<f64>,
    grid_size: usize,
    rng: RngSpec,
    index: u64,
) -> Result<Vec<f64>> {
    if grid_size < 2 {
        return input("bridge grid needs at least 2 cells");
    }
    check_root(root)?;
    let d = root.nrows();
    let mut out = Vec::with_capacity((grid_size + 1) * d);
    let mut gen = rng.substream(index).rng();
    let mut scratch = BridgeScratch::new(root, grid_size);
    bridge_path(grid_size, &mut gen, &mut scratch, |_, v| {
        out.extend_from_slice(v)
    });
    Ok(out)
}

/// Empirical upper-`alpha` quantile: the order statistic at 1-based index
/// `ceil((1 - alpha) n)`.
pub fn upper_quantile(values: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return input(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    if values.is_empty() {
        return input("quantile of an empty sample");
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // guard against (1 - alpha) * n landing a hair above an integer
    let rank = (((1.0 - alpha) * n as f64) - 1e-9)
        .ceil()
        .clamp(1.0, n as f64) as usize;
    Ok(sorted[rank - 1])
}

/// Critical value from simulated bridge sup-norms; needs at least 100 paths.
pub fn sup_quantile(paths: &BridgePathSet, alpha: f64) -> Result<f64> {
    if paths.sup_norms.len() < 100 {
        return input(format!(
            "sup quantile needs at least 100 paths, got {}",
            paths.sup_norms.len()
        ));
    }
    upper_quantile(&paths.sup_norms, alpha)
}

/// Draws of `B(1) / [int_0^1 (B(l) - l B(1))^2 dl]^{1/2}` for a standard
/// Brownian motion `B`. The integral is a midpoint sum over `grid_size`
/// cells; the motion is simulated on the half-cell grid so the midpoints are
/// exact path values.
pub fn sn_limit_sample(n_paths: usize, grid_size: usize, rng: RngSpec) -> Result<Vec<f64>> {
    if grid_size < 16 {
        return input("self-normalized limit grid needs at least 16 cells");
    }
    if n_paths < 100 {
        return input("self-normalized limit sample needs at least 100 paths");
    }
    let m = grid_size;
    let step = 1.0 / ((2 * m) as f64).sqrt();
    let draws = (0..n_paths)
        .into_par_iter()
        .map_init(
            || vec![0.0; 2 * m],
            |path, index| {
                let mut gen = rng.substream(index as u64).rng();
                let mut acc = 0.0;
                for v in path.iter_mut() {
                    let z: f64 = gen.sample(StandardNormal);
                    acc += z * step;
                    *v = acc;
                }
                let end = acc;
                let mut integral = 0.0;
                for j in 0..m {
                    // path[2j] is B((2j+1)/(2m)), the midpoint of cell j
                    let lambda = (2 * j + 1) as f64 / (2 * m) as f64;
                    let b = path[2 * j] - lambda * end;
                    integral += b * b;
                }
                end / (integral / m as f64).sqrt()
            },
        )
        .collect();
    Ok(draws)
}
