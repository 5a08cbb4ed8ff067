//! Sufficient statistics: class sizes and class-by-block crossing counts.

use crate::encode::EncodedData;
use crate::error::{CmmError, Result};

/// Indices sorting `values` decreasingly, ties by ascending index.
pub fn decreasing_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Counts of one (class, block) pair sorted decreasingly.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedCounts {
    /// Crossing index of the `h`-th largest count.
    pub order: Vec<u32>,
    /// `n_kj(h)`, decreasing.
    pub sorted: Vec<f64>,
    /// `tail[h] = Σ_{h' > h} sorted[h']`, i.e. the residual after the
    /// `h + 1` largest counts.
    tail: Vec<f64>,
}

impl OrderedCounts {
    pub fn new(counts: &[f64]) -> Self {
        let order = decreasing_order(counts);
        let sorted: Vec<f64> = order.iter().map(|&c| counts[c]).collect();
        let mut tail = vec![0.0; sorted.len()];
        let mut acc = 0.0;
        for h in (0..sorted.len()).rev() {
            tail[h] = acc;
            acc += sorted[h];
        }
        Self { order: order.into_iter().map(|c| c as u32).collect(), sorted, tail }
    }

    pub fn total(&self) -> f64 {
        self.sorted.first().map_or(0.0, |&c| c + self.tail[0])
    }

    /// `n̄^h`: mass outside the `h` largest counts (`h` in `0..=m`).
    pub fn residual(&self, h: usize) -> f64 {
        match h {
            0 => self.total(),
            h if h >= self.sorted.len() => 0.0,
            h => self.tail[h - 1],
        }
    }

    pub fn size(&self) -> usize {
        self.sorted.len()
    }
}

/// Class counts `n_k` and crossing counts `n_kjh`.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub nk: Vec<f64>,
    pub counts: Vec<Vec<Vec<f64>>>,
}

impl SufficientStats {
    fn zeros(g: usize, sizes: &[usize]) -> Self {
        Self {
            nk: vec![0.0; g],
            counts: vec![sizes.iter().map(|&m| vec![0.0; m]).collect(); g],
        }
    }

    /// Counts under hard labels in `0..g`.
    pub fn from_labels(data: &EncodedData, labels: &[usize], g: usize) -> Result<Self> {
        if labels.len() != data.n() {
            return Err(CmmError::Data(format!(
                "{} labels for {} individuals",
                labels.len(),
                data.n()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&k| k >= g) {
            return Err(CmmError::Data(format!("label {bad} outside 0..{g}")));
        }
        let mut s = Self::zeros(g, &data.block_sizes());
        for &k in labels {
            s.nk[k] += 1.0;
        }
        for (j, col) in data.columns().iter().enumerate() {
            for (&k, &c) in labels.iter().zip(&col.crossings) {
                s.counts[k][j][c as usize] += 1.0;
            }
        }
        Ok(s)
    }

    /// Responsibility-weighted counts; `resp` is row-major `n × g`.
    pub fn from_responsibilities(data: &EncodedData, resp: &[f64], g: usize) -> Result<Self> {
        if resp.len() != data.n() * g {
            return Err(CmmError::Data(format!(
                "responsibility matrix has {} entries, expected {}",
                resp.len(),
                data.n() * g
            )));
        }
        let mut s = Self::zeros(g, &data.block_sizes());
        for row in resp.chunks_exact(g) {
            for (nk, &t) in s.nk.iter_mut().zip(row) {
                *nk += t;
            }
        }
        for (j, col) in data.columns().iter().enumerate() {
            for (row, &c) in resp.chunks_exact(g).zip(&col.crossings) {
                for (k, &t) in row.iter().enumerate() {
                    s.counts[k][j][c as usize] += t;
                }
            }
        }
        Ok(s)
    }

    pub fn g(&self) -> usize {
        self.nk.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }

    pub fn ordered(&self, k: usize, j: usize) -> OrderedCounts {
        OrderedCounts::new(&self.counts[k][j])
    }
}

/// Crossing counts of one block column per class under hard labels.
pub fn block_counts(crossings: &[u32], size: usize, labels: &[usize], g: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; size]; g];
    for (&k, &c) in labels.iter().zip(crossings) {
        out[k][c as usize] += 1.0;
    }
    out
}
