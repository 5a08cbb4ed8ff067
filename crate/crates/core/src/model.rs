//! Model structure `(g, σ, ℓ)` and parameter containers.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::Schema;
use crate::error::{CmmError, Result};

/// Repartition of the variables into disjoint, nonempty blocks.
///
/// Blocks are kept sorted internally and ordered by their smallest member,
/// so two equal partitions always have equal representations.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockPartition {
    blocks: Vec<Vec<usize>>,
}

impl BlockPartition {
    pub fn new(mut blocks: Vec<Vec<usize>>, n_vars: usize) -> Result<Self> {
        let mut seen = vec![false; n_vars];
        for block in &mut blocks {
            if block.is_empty() {
                return Err(CmmError::Structure("empty block in partition".into()));
            }
            block.sort_unstable();
            for &b in block.iter() {
                if b >= n_vars {
                    return Err(CmmError::Structure(format!(
                        "block references variable {} but only {} exist",
                        b + 1,
                        n_vars
                    )));
                }
                if std::mem::replace(&mut seen[b], true) {
                    return Err(CmmError::Structure(format!(
                        "variable {} appears in two blocks",
                        b + 1
                    )));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(CmmError::Structure(format!(
                "variable {} is not assigned to a block",
                missing + 1
            )));
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Ok(Self { blocks })
    }

    /// Every variable in its own block.
    pub fn singletons(n_vars: usize) -> Self {
        Self { blocks: (0..n_vars).map(|b| vec![b]).collect() }
    }

    /// Builds the partition from a block label per variable.
    pub fn from_assignment(labels: &[usize]) -> Self {
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut slot: Vec<Option<usize>> = Vec::new();
        for (b, &l) in labels.iter().enumerate() {
            if l >= slot.len() {
                slot.resize(l + 1, None);
            }
            match slot[l] {
                Some(j) => blocks[j].push(b),
                None => {
                    slot[l] = Some(blocks.len());
                    blocks.push(vec![b]);
                }
            }
        }
        Self { blocks }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_vars(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    /// Block index of each variable.
    pub fn assignment(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_vars()];
        for (j, block) in self.blocks.iter().enumerate() {
            for &b in block {
                out[b] = j;
            }
        }
        out
    }

    pub fn position(&self, block: &[usize]) -> Option<usize> {
        self.blocks.iter().position(|b| b == block)
    }
}

impl fmt::Display for BlockPartition {
    /// `{1,2}{3}` with 1-based variable indices.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for block in &self.blocks {
            write!(f, "{{")?;
            for (i, b) in block.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", b + 1)?;
            }
            write!(f, "}}")?;
        }
        Ok(())
    }
}

/// Number of crossings of a block: the product of its modality counts.
pub fn block_size(block: &[usize], n_levels: &[usize]) -> Result<usize> {
    block.iter().try_fold(1usize, |acc, &b| {
        acc.checked_mul(n_levels[b])
            .filter(|&m| m <= u32::MAX as usize)
            .ok_or_else(|| CmmError::Structure("block crossing space too large".into()))
    })
}

/// A model `ω = (g, σ, ℓ)` with mode counts `modes[k][j]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    g: usize,
    partition: BlockPartition,
    modes: Vec<Vec<usize>>,
    block_sizes: Vec<usize>,
}

impl ModelSpec {
    pub fn new(
        g: usize,
        partition: BlockPartition,
        modes: Vec<Vec<usize>>,
        n_levels: &[usize],
    ) -> Result<Self> {
        if g == 0 {
            return Err(CmmError::Structure("class count must be at least 1".into()));
        }
        if partition.n_vars() != n_levels.len() {
            return Err(CmmError::Structure(format!(
                "partition covers {} variables, data has {}",
                partition.n_vars(),
                n_levels.len()
            )));
        }
        let block_sizes = partition
            .blocks()
            .iter()
            .map(|b| block_size(b, n_levels))
            .collect::<Result<Vec<_>>>()?;
        if modes.len() != g {
            return Err(CmmError::Structure(format!(
                "mode matrix has {} rows for {} classes",
                modes.len(),
                g
            )));
        }
        for (k, row) in modes.iter().enumerate() {
            if row.len() != block_sizes.len() {
                return Err(CmmError::Structure(format!(
                    "mode row {} has {} entries for {} blocks",
                    k + 1,
                    row.len(),
                    block_sizes.len()
                )));
            }
            for (j, (&l, &m)) in row.iter().zip(&block_sizes).enumerate() {
                if l == 0 || l >= m {
                    return Err(CmmError::Structure(format!(
                        "class {} block {}: mode count {} outside 1..{}",
                        k + 1,
                        j + 1,
                        l,
                        m - 1
                    )));
                }
            }
        }
        Ok(Self { g, partition, modes, block_sizes })
    }

    /// Same mode count in every class and block.
    pub fn with_uniform_modes(
        g: usize,
        partition: BlockPartition,
        modes: usize,
        n_levels: &[usize],
    ) -> Result<Self> {
        let d = partition.n_blocks();
        Self::new(g, partition, vec![vec![modes; d]; g], n_levels)
    }

    /// The latent class model: singleton blocks with `ℓ = m_b − 1`.
    pub fn conditional_independence(g: usize, n_levels: &[usize]) -> Result<Self> {
        let modes = vec![n_levels.iter().map(|m| m - 1).collect(); g];
        Self::new(g, BlockPartition::singletons(n_levels.len()), modes, n_levels)
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn n_blocks(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn modes(&self) -> &[Vec<usize>] {
        &self.modes
    }

    pub fn mode_count(&self, k: usize, j: usize) -> usize {
        self.modes[k][j]
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    /// Free parameter count `(g − 1) + Σ ℓ_kj`.
    pub fn nu(&self) -> usize {
        (self.g - 1) + self.modes.iter().flatten().sum::<usize>()
    }

    pub fn check_schema(&self, schema: &Schema) -> Result<()> {
        let n_levels = schema.n_levels();
        let sizes: Result<Vec<_>> =
            self.partition.blocks().iter().map(|b| block_size(b, &n_levels)).collect();
        if self.partition.n_vars() != n_levels.len() || sizes? != self.block_sizes {
            return Err(CmmError::Structure("model does not match the data schema".into()));
        }
        Ok(())
    }
}

/// Parameters of one block in one class, in `(δ, a)` form.
///
/// `delta[h]` is the crossing of mode `h` (modes ordered by decreasing
/// mass); `a` has one entry per mode plus the total non-mode mass last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockParams {
    pub delta: Vec<u32>,
    pub a: Vec<f64>,
}

/// Slack allowed when checking simplex sums.
const SUM_TOL: f64 = 1e-9;

impl BlockParams {
    pub fn n_modes(&self) -> usize {
        self.delta.len()
    }

    pub fn residual_mass(&self) -> f64 {
        self.a[self.delta.len()]
    }

    /// Probability of each non-mode crossing.
    pub fn non_mode_prob(&self, m: usize) -> f64 {
        self.residual_mass() / (m - self.n_modes()) as f64
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        let l = self.delta.len();
        let fail = |msg: String| Err(CmmError::Structure(msg));
        if l == 0 || l >= m {
            return fail(format!("{l} modes for {m} crossings"));
        }
        if self.a.len() != l + 1 {
            return fail(format!("{} masses for {} modes", self.a.len(), l));
        }
        if self.a.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
            return fail(format!("masses outside (0, 1]: {:?}", self.a));
        }
        let total: f64 = self.a.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return fail(format!("masses sum to {total}"));
        }
        if self.a[..l].windows(2).any(|w| w[0] < w[1]) {
            return fail(format!("mode masses not decreasing: {:?}", &self.a[..l]));
        }
        let floor = self.non_mode_prob(m);
        if self.a[..l].iter().any(|&x| x < floor * (1.0 - 1e-12)) {
            return fail(format!("mode mass below non-mode level {floor}"));
        }
        let mut seen = vec![false; m];
        for &c in &self.delta {
            if c as usize >= m || std::mem::replace(&mut seen[c as usize], true) {
                return fail(format!("invalid mode locations {:?}", self.delta));
            }
        }
        Ok(())
    }

    /// Full probability vector over the `m` crossings.
    pub fn expand(&self, m: usize) -> Vec<f64> {
        let mut alpha = vec![self.non_mode_prob(m); m];
        for (&c, &a) in self.delta.iter().zip(&self.a) {
            alpha[c as usize] = a;
        }
        alpha
    }

    pub fn expand_ln(&self, m: usize) -> Vec<f64> {
        self.expand(m).into_iter().map(f64::ln).collect()
    }

    /// Parameters from a full probability vector with `l` modes, taking the
    /// `l` largest entries (ties by crossing index) as modes.
    pub fn from_alpha(alpha: &[f64], l: usize) -> Result<Self> {
        let order = crate::stats::decreasing_order(alpha);
        let delta: Vec<u32> = order[..l].iter().map(|&c| c as u32).collect();
        let mut a: Vec<f64> = delta.iter().map(|&c| alpha[c as usize]).collect();
        a.push(order[l..].iter().map(|&c| alpha[c]).sum());
        let p = Self { delta, a };
        p.validate(alpha.len())?;
        Ok(p)
    }
}

/// Class proportions and block parameters `θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub pi: Vec<f64>,
    pub blocks: Vec<Vec<BlockParams>>,
}

impl MixtureParams {
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if self.pi.len() != spec.g() || self.blocks.len() != spec.g() {
            return Err(CmmError::Structure("parameter class count mismatch".into()));
        }
        if self.pi.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(CmmError::Structure(format!("invalid proportions {:?}", self.pi)));
        }
        if (self.pi.iter().sum::<f64>() - 1.0).abs() > SUM_TOL {
            return Err(CmmError::Structure("proportions do not sum to 1".into()));
        }
        for (k, row) in self.blocks.iter().enumerate() {
            if row.len() != spec.n_blocks() {
                return Err(CmmError::Structure("parameter block count mismatch".into()));
            }
            for (j, bp) in row.iter().enumerate() {
                if bp.n_modes() != spec.mode_count(k, j) {
                    return Err(CmmError::Structure(format!(
                        "class {} block {}: {} modes, spec says {}",
                        k + 1,
                        j + 1,
                        bp.n_modes(),
                        spec.mode_count(k, j)
                    )));
                }
                bp.validate(spec.block_sizes()[j])?;
            }
        }
        Ok(())
    }

    /// Log-probability tables `[k][j][crossing]`.
    pub fn log_alpha(&self, spec: &ModelSpec) -> Vec<Vec<Vec<f64>>> {
        self.blocks
            .iter()
            .map(|row| {
                row.iter().zip(spec.block_sizes()).map(|(bp, &m)| bp.expand_ln(m)).collect()
            })
            .collect()
    }
}


/// A complete model: schema, structure and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CmmModel {
    pub schema: Schema,
    pub spec: ModelSpec,
    pub params: MixtureParams,
}

impl CmmModel {
    pub fn new(schema: Schema, spec: ModelSpec, params: MixtureParams) -> Result<Self> {
        spec.check_schema(&schema)?;
        params.validate(&spec)?;
        Ok(Self { schema, spec, params })
    }

    /// Block crossings of a vector of modality indices.
    pub fn crossings_of(&self, cells: &[u32]) -> Vec<u32> {
        let n_levels = self.schema.n_levels();
        self.spec
            .partition()
            .blocks()
            .iter()
            .map(|block| {
                let vals: Vec<u32> = block.iter().map(|&b| cells[b]).collect();
                let radices: Vec<usize> = block.iter().map(|&b| n_levels[b]).collect();
                crate::encode::encode_crossing(&vals, &radices)
            })
            .collect()
    }

    /// The same distribution expressed with the level order of `target`
    /// (same variables and level sets, possibly permuted levels).
    pub fn relabel_levels(&self, target: &Schema) -> Result<Self> {
        let map = self.schema.level_map_to(target)?;
        let n_levels = self.schema.n_levels();
        let blocks = self
            .params
            .blocks
            .iter()
            .map(|row| {
                row.iter()
                    .zip(self.spec.partition().blocks())
                    .map(|(bp, block)| {
                        let radices: Vec<usize> = block.iter().map(|&b| n_levels[b]).collect();
                        let delta = bp
                            .delta
                            .iter()
                            .map(|&c| {
                                let vals = crate::encode::decode_crossing(c, &radices);
                                let moved: Vec<u32> = vals
                                    .iter()
                                    .zip(block)
                                    .map(|(&v, &b)| map[b][v as usize])
                                    .collect();
                                crate::encode::encode_crossing(&moved, &radices)
                            })
                            .collect();
                        BlockParams { delta, a: bp.a.clone() }
                    })
                    .collect()
            })
            .collect();
        Self::new(
            target.clone(),
            self.spec.clone(),
            MixtureParams { pi: self.params.pi.clone(), blocks },
        )
    }
}
