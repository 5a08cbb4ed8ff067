//! Block coding of a dataset.
//!
//! A block's crossing index is the mixed-radix value of its variables taken
//! in ascending variable order, the first variable being least significant.

use crate::data::CategoricalDataset;
use crate::error::{CmmError, Result};
use crate::model::{block_size, BlockPartition};

/// One block-coded column: the crossing index of every individual.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockColumn {
    pub vars: Vec<usize>,
    pub size: usize,
    pub crossings: Vec<u32>,
}

impl BlockColumn {
    pub fn encode(data: &CategoricalDataset, vars: &[usize]) -> Result<Self> {
        let n_levels = data.schema().n_levels();
        if let Some(&b) = vars.iter().find(|&&b| b >= n_levels.len()) {
            return Err(CmmError::Structure(format!("unknown variable index {}", b + 1)));
        }
        let size = block_size(vars, &n_levels)?;
        let crossings = data
            .rows()
            .map(|row| encode_cells(vars.iter().map(|&b| (row[b], n_levels[b]))))
            .collect();
        Ok(Self { vars: vars.to_vec(), size, crossings })
    }
}

fn encode_cells(cells: impl Iterator<Item = (u32, usize)>) -> u32 {
    let mut idx = 0u64;
    let mut radix = 1u64;
    for (c, m) in cells {
        idx += u64::from(c) * radix;
        radix *= m as u64;
    }
    idx as u32
}

/// Crossing index of modality values `cells` with modality counts `radices`.
pub fn encode_crossing(cells: &[u32], radices: &[usize]) -> u32 {
    encode_cells(cells.iter().copied().zip(radices.iter().copied()))
}

/// Inverse of [`encode_crossing`].
pub fn decode_crossing(mut crossing: u32, radices: &[usize]) -> Vec<u32> {
    radices
        .iter()
        .map(|&m| {
            let c = crossing % m as u32;
            crossing /= m as u32;
            c
        })
        .collect()
}

/// Dataset coded block by block for a given partition.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedData {
    n: usize,
    columns: Vec<BlockColumn>,
}

impl EncodedData {
    pub fn new(data: &CategoricalDataset, partition: &BlockPartition) -> Result<Self> {
        if partition.n_vars() != data.n_vars() {
            return Err(CmmError::Structure(format!(
                "partition covers {} variables, data has {}",
                partition.n_vars(),
                data.n_vars()
            )));
        }
        let columns = partition
            .blocks()
            .iter()
            .map(|b| BlockColumn::encode(data, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n: data.n(), columns })
    }

    pub fn from_columns(n: usize, columns: Vec<BlockColumn>) -> Self {
        debug_assert!(columns.iter().all(|c| c.crossings.len() == n));
        Self { n, columns }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_blocks(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[BlockColumn] {
        &self.columns
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.columns.iter().map(|c| c.size).collect()
    }

    /// Crossing of individual `i` in block `j`.
    #[inline]
    pub fn crossing(&self, i: usize, j: usize) -> u32 {
        self.columns[j].crossings[i]
    }
}
