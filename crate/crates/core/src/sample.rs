use crate::error::{input, Result};

/// An `n x p` matrix of observations stored row-major; rows are observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    data: Vec<f64>,
    n: usize,
    p: usize,
}

impl Sample {
    /// Builds a sample from row-major data. Requires `n >= 2` and finite entries.
    pub fn new(data: Vec<f64>, n: usize, p: usize) -> Result<Self> {
        if p == 0 {
            return input("sample must have at least one coordinate");
        }
        if n < 2 {
            return input(format!("sample needs at least 2 observations, got {n}"));
        }
        if data.len() != n * p {
            return input(format!(
                "data length {} does not match {n} x {p}",
                data.len()
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return input(format!(
                "non-finite entry at row {}, column {}",
                pos / p + 1,
                pos % p + 1
            ));
        }
        Ok(Self { data, n, p })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != p) {
            return input(format!(
                "row {} has {} columns, expected {p}",
                bad + 1,
                rows[bad].len()
            ));
        }
        Self::new(rows.concat(), rows.len(), p)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl DoubleEndedIterator<Item = &[f64]> + ExactSizeIterator {
        self.data.chunks_exact(self.p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Observations in reverse order.
    pub fn reversed(&self) -> Self {
        let data = self.rows().rev().flatten().copied().collect();
        Self {
            data,
            n: self.n,
            p: self.p,
        }
    }

    /// Rows reordered so that row `i` of the result is row `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.n];
        if order.len() != self.n
            || order
                .iter()
                .any(|&i| i >= self.n || std::mem::replace(&mut seen[i], true))
        {
            return input("permutation must list every row index exactly once");
        }
        let data = order.iter().flat_map(|&i| self.row(i)).copied().collect();
        Ok(Self {
            data,
            n: self.n,
            p: self.p,
        })
    }

    /// Every entry shifted by `-center[l]` in column `l`.
    pub fn centered(&self, center: &[f64]) -> Result<Self> {
        if center.len() != self.p {
            return input("center length must equal the coordinate count");
        }
        let data = self
            .rows()
            .flat_map(|r| r.iter().zip(center).map(|(x, c)| x - c))
            .collect();
        Ok(Self {
            data,
            n: self.n,
            p: self.p,
        })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            data: self.data.iter().map(|x| x * c).collect(),
            n: self.n,
            p: self.p,
        }
    }

    /// Column means over the half-open row range.
    pub fn column_means(&self, rows: std::ops::Range<usize>) -> Vec<f64> {
        let mut mean = vec![0.0; self.p];
        let count = rows.len() as f64;
        for i in rows {
            for (m, x) in mean.iter_mut().zip(self.row(i)) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= count);
        mean
    }
}

/// A time-indexed family of `d`-vectors, indices `k_start..=k_end`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqPath {
    values: Vec<f64>,
    d: usize,
    k_start: usize,
    k_end: usize,
    n: usize,
}

impl SeqPath {
    pub(crate) fn from_flat(values: Vec<f64>, d: usize, k_start: usize, n: usize) -> Self {
        debug_assert!(d > 0 && values.len() % d == 0 && !values.is_empty());
        let k_end = k_start + values.len() / d - 1;
        Self {
            values,
            d,
            k_start,
            k_end,
            n,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn k_start(&self) -> usize {
        self.k_start
    }

    pub fn k_end(&self) -> usize {
        self.k_end
    }

    /// Total sample size the path was built from.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.k_end - self.k_start + 1
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Vector at time index `k`.
    pub fn at(&self, k: usize) -> &[f64] {
        assert!(
            (self.k_start..=self.k_end).contains(&k),
            "index {k} outside {}..={}",
            self.k_start,
            self.k_end
        );
        let off = (k - self.k_start) * self.d;
        &self.values[off..off + self.d]
    }

    /// `(k, vector)` pairs in time order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.values
            .chunks_exact(self.d)
            .enumerate()
            .map(move |(i, v)| (self.k_start + i, v))
    }

    pub fn norms(&self) -> Vec<f64> {
        self.values.chunks_exact(self.d).map(norm2).collect()
    }
}

#[inline]
pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
