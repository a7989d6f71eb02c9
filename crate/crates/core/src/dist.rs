//! Per-coordinate marginal laws used by simulation designs and closed-form parameters.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A univariate location-scale law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Marginal {
    /// Gaussian with standard deviation `scale`; `scale = 0` is a point mass.
    Normal {
        loc: f64,
        scale: f64,
    },
    Cauchy {
        loc: f64,
        scale: f64,
    },
    Laplace {
        loc: f64,
        scale: f64,
    },
}

impl Marginal {
    pub fn normal(loc: f64, scale: f64) -> Self {
        Self::Normal { loc, scale }
    }

    pub fn cauchy(loc: f64, scale: f64) -> Self {
        Self::Cauchy { loc, scale }
    }

    pub fn laplace(loc: f64, scale: f64) -> Self {
        Self::Laplace { loc, scale }
    }

    pub fn loc(&self) -> f64 {
        match *self {
            Self::Normal { loc, .. } | Self::Cauchy { loc, .. } | Self::Laplace { loc, .. } => loc,
        }
    }

    pub fn scale(&self) -> f64 {
        match *self {
            Self::Normal { scale, .. }
            | Self::Cauchy { scale, .. }
            | Self::Laplace { scale, .. } => scale,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Self::Normal { .. } => "normal",
            Self::Cauchy { .. } => "cauchy",
            Self::Laplace { .. } => "laplace",
        }
    }

    /// Same family and scale, new location.
    pub fn with_loc(self, loc: f64) -> Self {
        match self {
            Self::Normal { scale, .. } => Self::Normal { loc, scale },
            Self::Cauchy { scale, .. } => Self::Cauchy { loc, scale },
            Self::Laplace { scale, .. } => Self::Laplace { loc, scale },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (loc, scale) = (self.loc(), self.scale());
        if !loc.is_finite() || !scale.is_finite() {
            return Err(Error::Config(format!("{self}: parameters must be finite")));
        }
        match self {
            Self::Normal { .. } if scale < 0.0 => {
                Err(Error::Config(format!("{self}: scale must be >= 0")))
            }
            Self::Cauchy { .. } | Self::Laplace { .. } if scale <= 0.0 => {
                Err(Error::Config(format!("{self}: scale must be > 0")))
            }
            _ => Ok(()),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Normal { loc, scale } => {
                let z: f64 = rng.sample(StandardNormal);
                loc + scale * z
            }
            Self::Cauchy { loc, scale } => {
                // open interval keeps tan away from its poles
                let u = open01(rng);
                loc + scale * (std::f64::consts::PI * (u - 0.5)).tan()
            }
            Self::Laplace { loc, scale } => {
                let u = open01(rng) - 0.5;
                loc - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
        }
    }
}

fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

impl fmt::Display for Marginal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {})", self.family(), self.loc(), self.scale())
    }
}
