//! Symmetric vector-valued kernels `h(x, y)` on observation pairs.
//!
//! Matrix-valued kernels are vectorized row-major, so entry `(a, b)` of the
//! `p x p` matrix lands at index `a * p + b`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist::Marginal;
use crate::error::{input, Error, Result};

/// Relative tolerance below which a pairwise difference counts as a tie.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// `1/3 + (2*sqrt(3) - 4)/pi`: projection variance of the absolute-difference
/// kernel for a unit-variance Gaussian coordinate.
pub const GMD_PROJECTION_CONSTANT: f64 = 1.0 / 3.0 + (2.0 * 1.732_050_807_568_877_2 - 4.0) / PI;

/// A kernel family with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `|x_l - y_l|` per coordinate.
    GiniMeanDifference,
    /// `cos(x_l - y_l)` per coordinate.
    CharacteristicDispersion,
    /// `vec((x-y)(x-y)^T / |x-y|^2)`.
    SpatialKendallTau,
    /// `psi_xi(|x-y|^2 / 2) vec((x-y)(x-y)^T / |x-y|^2)` with the truncation
    /// score `psi_xi(t) = min(t, xi)`.
    HuberScoredCovariance { xi: f64 },
    /// `x_l * y_l` per coordinate.
    CoordinateProduct,
}

impl KernelSpec {
    /// Output dimension for `p`-dimensional observations.
    pub fn dimension(&self, p: usize) -> usize {
        match self {
            Self::SpatialKendallTau | Self::HuberScoredCovariance { .. } => p * p,
            _ => p,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::GiniMeanDifference => "gmd",
            Self::CharacteristicDispersion => "cdp",
            Self::SpatialKendallTau => "spatial_kendall_tau",
            Self::HuberScoredCovariance { .. } => "huber",
            Self::CoordinateProduct => "coordinate_product",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::HuberScoredCovariance { xi } if !(xi > 0.0 && xi.is_finite()) => input(format!(
                "huber threshold must be positive and finite, got {xi}"
            )),
            _ => Ok(()),
        }
    }

    /// Evaluates `h(x, y)`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        if x.len() != y.len() || x.is_empty() {
            return input(format!(
                "kernel arguments must share a positive length, got {} and {}",
                x.len(),
                y.len()
            ));
        }
        let mut out = vec![0.0; self.dimension(x.len())];
        self.eval_into(x, y, &mut out)
            .map_err(|_| Error::DegeneratePair { i: 0, j: 1 })?;
        Ok(out)
    }

    /// Writes `h(x, y)` into `out` without allocating.
    ///
    /// The caller guarantees `x.len() == y.len()` and
    /// `out.len() == self.dimension(x.len())`.
    #[inline]
    pub fn eval_into(
        &self,
        x: &[f64],
        y: &[f64],
        out: &mut [f64],
    ) -> std::result::Result<(), Degenerate> {
        debug_assert_eq!(x.len(), y.len());
        debug_assert_eq!(out.len(), self.dimension(x.len()));
        match *self {
            Self::GiniMeanDifference => {
                for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
                    *o = (a - b).abs();
                }
            }
            Self::CharacteristicDispersion => {
                for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
                    *o = (a - b).cos();
                }
            }
            Self::CoordinateProduct => {
                for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
                    *o = a * b;
                }
            }
            Self::SpatialKendallTau => {
                let sq = diff_sq_norm(x, y);
                if sq.sqrt() < DEGENERACY_TOL * tie_scale(x, y) {
                    return Err(Degenerate);
                }
                outer_diff(x, y, 1.0 / sq, out);
            }
            Self::HuberScoredCovariance { xi } => {
                let sq = diff_sq_norm(x, y);
                // psi_xi(sq/2) / sq is 1/2 below the threshold, so ties map to 0
                let weight = if 0.5 * sq <= xi { 0.5 } else { xi / sq };
                outer_diff(x, y, weight, out);
            }
        }
        Ok(())
    }

    /// Analytic `theta = E h(X, X')` for independent coordinates with the given marginals.
    pub fn closed_form_theta(&self, marginals: &[Marginal]) -> Result<Vec<f64>> {
        marginals
            .iter()
            .map(|m| {
                m.validate()?;
                match (self, *m) {
                    (Self::GiniMeanDifference, Marginal::Normal { scale, .. }) => {
                        Ok(2.0 * scale / PI.sqrt())
                    }
                    (Self::CharacteristicDispersion, Marginal::Normal { scale, .. }) => {
                        Ok((-scale * scale).exp())
                    }
                    (Self::CharacteristicDispersion, Marginal::Cauchy { scale, .. }) => {
                        Ok((-2.0 * scale).exp())
                    }
                    (Self::CharacteristicDispersion, Marginal::Laplace { scale, .. }) => {
                        Ok((1.0 + scale * scale).powi(-2))
                    }
                    _ => Err(self.unsupported(m)),
                }
            })
            .collect()
    }

    /// Analytic diagonal of `Sigma = Cov(g(X))` for independent coordinates.
    ///
    /// Only the absolute-difference kernel on Gaussian coordinates is supported,
    /// where `Var g_l = c_g * sigma_l^2`.
    pub fn closed_form_projection_variances(&self, marginals: &[Marginal]) -> Result<Vec<f64>> {
        marginals
            .iter()
            .map(|m| match (self, *m) {
                (Self::GiniMeanDifference, Marginal::Normal { scale, .. }) => {
                    m.validate()?;
                    Ok(GMD_PROJECTION_CONSTANT * scale * scale)
                }
                _ => Err(self.unsupported(m)),
            })
            .collect()
    }

    fn unsupported(&self, m: &Marginal) -> Error {
        Error::UnsupportedPair {
            kernel: self.name().to_string(),
            marginal: m.family().to_string(),
        }
    }
}

/// A tied pair for the spatial-sign kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Degenerate;

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::HuberScoredCovariance { xi } => write!(f, "huber:{xi}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    /// Parses `gmd`, `cdp`, `spatial_kendall_tau`, `coordinate_product` or `huber:<xi>`.
    fn from_str(s: &str) -> Result<Self> {
        let spec = match s.trim() {
            "gmd" | "gini" => Self::GiniMeanDifference,
            "cdp" | "cos" => Self::CharacteristicDispersion,
            "spatial_kendall_tau" | "skt" => Self::SpatialKendallTau,
            "coordinate_product" | "product" => Self::CoordinateProduct,
            other => match other.strip_prefix("huber:") {
                Some(xi) => Self::HuberScoredCovariance {
                    xi: xi
                        .trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("bad huber threshold {xi:?}")))?,
                },
                None => return Err(Error::Config(format!("unknown kernel {other:?}"))),
            },
        };
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(spec)
    }
}

#[inline]
fn diff_sq_norm(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[inline]
fn tie_scale(x: &[f64], y: &[f64]) -> f64 {
    let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let ny = y.iter().map(|a| a * a).sum::<f64>().sqrt();
    1f64.max(nx).max(ny)
}

/// `out = weight * vec((x-y)(x-y)^T)`, row-major.
#[inline]
fn outer_diff(x: &[f64], y: &[f64], weight: f64, out: &mut [f64]) {
    let p = x.len();
    for a in 0..p {
        let da = x[a] - y[a];
        let row = &mut out[a * p..(a + 1) * p];
        for (b, o) in row.iter_mut().enumerate() {
            *o = weight * (da * (x[b] - y[b]));
        }
    }
}
