//! Simulated datasets with independent coordinates and an optional single break.

use serde::{Deserialize, Serialize};

use crate::dist::Marginal;
use crate::error::{Error, Result};
use crate::gaussmc::RngSpec;
use crate::sample::Sample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePoint {
    /// Break fraction; rows `1..=floor(n tau*)` follow the pre-break laws.
    pub tau_star: f64,
    pub post: Vec<Marginal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub n: usize,
    /// One law per coordinate, so `p = marginals.len()`.
    pub marginals: Vec<Marginal>,
    pub change: Option<ChangePoint>,
}

impl Design {
    pub fn iid(n: usize, marginal: Marginal, p: usize) -> Self {
        Self {
            n,
            marginals: vec![marginal; p],
            change: None,
        }
    }

    pub fn with_change(mut self, tau_star: f64, post: Vec<Marginal>) -> Self {
        self.change = Some(ChangePoint { tau_star, post });
        self
    }

    pub fn p(&self) -> usize {
        self.marginals.len()
    }

    /// Index of the last pre-break row (1-based), `n` without a break.
    pub fn break_index(&self) -> usize {
        match &self.change {
            Some(c) => (self.n as f64 * c.tau_star + 1e-9).floor() as usize,
            None => self.n,
        }
    }

    pub fn without_change(&self) -> Self {
        Self {
            change: None,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!(
                "design needs n >= 2, got {}",
                self.n
            )));
        }
        if self.marginals.is_empty() {
            return Err(Error::Config("design needs at least one coordinate".into()));
        }
        for m in &self.marginals {
            m.validate()?;
        }
        if let Some(c) = &self.change {
            if !(c.tau_star > 0.0 && c.tau_star < 1.0) {
                return Err(Error::Config(format!(
                    "tau* must lie in (0, 1), got {}",
                    c.tau_star
                )));
            }
            if c.post.len() != self.marginals.len() {
                return Err(Error::Config(
                    "post-break laws must match the coordinate count".into(),
                ));
            }
            for m in &c.post {
                m.validate()?;
            }
        }
        Ok(())
    }
}

/// Draws an `n x p` sample, row by row, coordinate by coordinate.
pub fn simulate_dataset(design: &Design, rng: RngSpec) -> Result<Sample> {
    design.validate()?;
    let mut gen = rng.rng();
    let split = design.break_index();
    let p = design.p();
    let mut data = Vec::with_capacity(design.n * p);
    for row in 0..design.n {
        let laws = match &design.change {
            Some(c) if row >= split => &c.post,
            _ => &design.marginals,
        };
        data.extend(laws.iter().map(|m| m.draw(&mut gen)));
    }
    Sample::new(data, design.n, p)
}
