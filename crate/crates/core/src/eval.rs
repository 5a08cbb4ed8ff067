//! Model comparison and cluster diagnostics: Kullback-Leibler divergence,
//! confusion tables, per-class Cramér's V, a bootstrap test of conditional
//! independence, and a sufficient check of generic identifiability.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{CategoricalDataset, Schema};
use crate::encode::decode_crossing;
use crate::error::{CmmError, Result};
use crate::model::{CmmModel, ModelSpec};
use crate::rng::Seed;
use crate::sim::sample_categorical;

/// A distribution over complete cell vectors.
pub trait JointModel: Sync {
    fn schema(&self) -> &Schema;
    fn log_prob(&self, cells: &[u32]) -> f64;
    fn sample_cells(&self, rng: &mut dyn RngCore) -> Vec<u32>;
}

impl JointModel for CmmModel {
    fn schema(&self) -> &Schema {
        &self.schema
    }

    fn log_prob(&self, cells: &[u32]) -> f64 {
        crate::likelihood::mixture_logpdf(&self.crossings_of(cells), &self.params, &self.spec)
    }

    fn sample_cells(&self, rng: &mut dyn RngCore) -> Vec<u32> {
        let n_levels = self.schema.n_levels();
        let k = sample_categorical(&self.params.pi, rng);
        let mut cells = vec![0u32; n_levels.len()];
        for ((block, bp), &m) in self
            .spec
            .partition()
            .blocks()
            .iter()
            .zip(&self.params.blocks[k])
            .zip(self.spec.block_sizes())
        {
            let c = sample_categorical(&bp.expand(m), rng) as u32;
            let radices: Vec<usize> = block.iter().map(|&b| n_levels[b]).collect();
            for (&b, v) in block.iter().zip(decode_crossing(c, &radices)) {
                cells[b] = v;
            }
        }
        cells
    }
}

/// Joint spaces up to this many cells are summed exhaustively.
pub const EXHAUSTIVE_KL_CELLS: usize = 1_000_000;
pub const MONTE_CARLO_KL_DRAWS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlEstimate {
    pub value: f64,
    /// Monte-Carlo standard error; `None` for the exhaustive sum.
    pub std_error: Option<f64>,
}

/// `KL(p ‖ q) = Σ p log(p/q)` over the joint cell space.
///
/// Both models must describe the same variables with the same level sets;
/// level order may differ.
pub fn kl_divergence(p: &dyn JointModel, q: &dyn JointModel, seed: Seed) -> Result<KlEstimate> {
    let map = p.schema().level_map_to(q.schema())?;
    let n_levels = p.schema().n_levels();
    let cells: Option<usize> =
        n_levels.iter().try_fold(1usize, |acc, &m| acc.checked_mul(m));
    match cells {
        Some(total) if total <= EXHAUSTIVE_KL_CELLS => Ok(KlEstimate {
            value: kl_exhaustive(p, q, &map, &n_levels),
            std_error: None,
        }),
        _ => Ok(kl_monte_carlo(p, q, &map, MONTE_CARLO_KL_DRAWS, seed)),
    }
}

fn translate(cells: &[u32], map: &[Vec<u32>], out: &mut [u32]) {
    for ((o, &c), m) in out.iter_mut().zip(cells).zip(map) {
        *o = m[c as usize];
    }
}

fn kl_exhaustive(p: &dyn JointModel, q: &dyn JointModel, map: &[Vec<u32>], n_levels: &[usize]) -> f64 {
    let mut x = vec![0u32; n_levels.len()];
    let mut y = vec![0u32; n_levels.len()];
    let mut total = 0.0;
    loop {
        let lp = p.log_prob(&x);
        if lp > f64::NEG_INFINITY {
            translate(&x, map, &mut y);
            total += lp.exp() * (lp - q.log_prob(&y));
        }
        // odometer increment
        let mut b = 0;
        loop {
            if b == x.len() {
                return total.max(0.0);
            }
            x[b] += 1;
            if (x[b] as usize) < n_levels[b] {
                break;
            }
            x[b] = 0;
            b += 1;
        }
    }
}

fn kl_monte_carlo(
    p: &dyn JointModel,
    q: &dyn JointModel,
    map: &[Vec<u32>],
    draws: usize,
    seed: Seed,
) -> KlEstimate {
    let mut rng = seed.derive("kl", 0).rng();
    let mut y = vec![0u32; map.len()];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..draws {
        let x = p.sample_cells(&mut rng);
        translate(&x, map, &mut y);
        let d = p.log_prob(&x) - q.log_prob(&y);
        sum += d;
        sum_sq += d * d;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    KlEstimate { value: mean, std_error: Some((var / n).sqrt()) }
}

/// Raw cross-tabulation `table[a][b]`; no label alignment.
pub fn confusion(labels_a: &[usize], labels_b: &[usize]) -> Result<Vec<Vec<usize>>> {
    if labels_a.len() != labels_b.len() {
        return Err(CmmError::Data("labelings have different lengths".into()));
    }
    let rows = labels_a.iter().max().map_or(0, |m| m + 1);
    let cols = labels_b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0; cols]; rows];
    for (&a, &b) in labels_a.iter().zip(labels_b) {
        table[a][b] += 1;
    }
    Ok(table)
}

/// Cramér's V between two categorical columns.
pub fn cramers_v(x: &[u32], y: &[u32], mx: usize, my: usize) -> f64 {
    let n = x.len() as f64;
    let dof = (mx.min(my) - 1) as f64;
    if x.is_empty() || dof == 0.0 {
        return 0.0;
    }
    let mut table = vec![0.0; mx * my];
    let mut rows = vec![0.0; mx];
    let mut cols = vec![0.0; my];
    for (&a, &b) in x.iter().zip(y) {
        table[a as usize * my + b as usize] += 1.0;
        rows[a as usize] += 1.0;
        cols[b as usize] += 1.0;
    }
    let mut chi2 = 0.0;
    for (a, &r) in rows.iter().enumerate() {
        for (b, &c) in cols.iter().enumerate() {
            let e = r * c / n;
            if e > 0.0 {
                chi2 += (table[a * my + b] - e).powi(2) / e;
            }
        }
    }
    (chi2 / (n * dof)).sqrt().clamp(0.0, 1.0)
}

/// Pairwise Cramér's V within each class: `[k][a][b]`, unit diagonal.
pub fn cramers_v_by_class(data: &CategoricalDataset, labels: &[usize], g: usize) -> Result<Vec<Vec<Vec<f64>>>> {
    if labels.len() != data.n() {
        return Err(CmmError::Data("one label per individual is required".into()));
    }
    let n_levels = data.schema().n_levels();
    let b = data.n_vars();
    (0..g)
        .map(|k| {
            let rows: Vec<&[u32]> = data.rows().zip(labels).filter(|(_, &l)| l == k).map(|(r, _)| r).collect();
            let cols: Vec<Vec<u32>> = (0..b).map(|v| rows.iter().map(|r| r[v]).collect()).collect();
            let mut m = vec![vec![1.0; b]; b];
            for v in 0..b {
                for w in v + 1..b {
                    let val = cramers_v(&cols[v], &cols[w], n_levels[v], n_levels[w]);
                    m[v][w] = val;
                    m[w][v] = val;
                }
            }
            Ok(m)
        })
        .collect()
}

fn max_off_diagonal(mats: &[Vec<Vec<f64>>]) -> f64 {
    mats.iter()
        .flat_map(|m| m.iter().enumerate().flat_map(move |(a, row)| row.iter().skip(a + 1).copied()))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapTest {
    /// Observed maximum conditional Cramér's V.
    pub statistic: f64,
    pub p_value: f64,
    pub reps: usize,
}

/// Class-conditional marginal of every variable implied by a model.
pub fn class_marginals(model: &CmmModel) -> Vec<Vec<Vec<f64>>> {
    let n_levels = model.schema.n_levels();
    model
        .params
        .blocks
        .iter()
        .map(|row| {
            let mut marg: Vec<Vec<f64>> = n_levels.iter().map(|&m| vec![0.0; m]).collect();
            for ((block, bp), &m) in model.spec.partition().blocks().iter().zip(row).zip(model.spec.block_sizes()) {
                let radices: Vec<usize> = block.iter().map(|&b| n_levels[b]).collect();
                for (c, p) in bp.expand(m).into_iter().enumerate() {
                    for (&b, v) in block.iter().zip(decode_crossing(c as u32, &radices)) {
                        marg[b][v as usize] += p;
                    }
                }
            }
            marg
        })
        .collect()
}

/// Parametric bootstrap test of the null "no conditional dependence".
///
/// The statistic is the largest Cramér's V over classes and variable pairs.
/// `null` must be a fitted conditional-independence model (singleton
/// blocks). Each replicate draws `n` individuals from it, assigns them to
/// classes by maximum posterior probability under `null`, and recomputes
/// the statistic.
pub fn bootstrap_independence_test(
    data: &CategoricalDataset,
    labels: &[usize],
    null: &CmmModel,
    reps: usize,
    seed: Seed,
) -> Result<BootstrapTest> {
    if reps == 0 {
        return Err(CmmError::Domain("bootstrap needs at least one replicate".into()));
    }
    if data.n_vars() < 2 {
        return Err(CmmError::Domain("bootstrap needs at least two variables".into()));
    }
    if null.spec.partition().blocks().iter().any(|b| b.len() != 1) {
        return Err(CmmError::Structure("the bootstrap null must have singleton blocks".into()));
    }
    let g = null.spec.g();
    let observed = max_off_diagonal(&cramers_v_by_class(data, labels, labels.iter().max().map_or(1, |m| m + 1))?);
    let marginals = class_marginals(null);
    let ln_marg: Vec<Vec<Vec<f64>>> =
        marginals.iter().map(|row| row.iter().map(|v| v.iter().map(|p| p.ln()).collect()).collect()).collect();
    let ln_pi: Vec<f64> = null.params.pi.iter().map(|p| p.ln()).collect();
    let n = data.n();
    let schema = null.schema.clone();
    let exceed: usize = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<usize> {
            let mut rng = seed.derive("bootstrap", r as u64).rng();
            let mut cells = Vec::with_capacity(n * schema.n_vars());
            for _ in 0..n {
                let k = sample_categorical(&null.params.pi, &mut rng);
                for marg in &marginals[k] {
                    cells.push(sample_categorical(marg, &mut rng) as u32);
                }
            }
            let boot = CategoricalDataset::new(schema.clone(), cells)?;
            let relabel: Vec<usize> = boot
                .rows()
                .map(|x| {
                    let score = |k: usize| ln_pi[k] + x.iter().zip(&ln_marg[k]).map(|(&c, l)| l[c as usize]).sum::<f64>();
                    (1..g).fold(0, |best, k| if score(k) > score(best) { k } else { best })
                })
                .collect();
            let stat = max_off_diagonal(&cramers_v_by_class(&boot, &relabel, g)?);
            Ok(usize::from(stat >= observed))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(BootstrapTest { statistic: observed, p_value: exceed as f64 / reps as f64, reps })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Identifiability {
    /// Sufficient condition met; the witness groups block indices.
    Identifiable { witness: [Vec<usize>; 3] },
    Unknown { reason: String },
}

/// Above this many blocks the tri-partition search is greedy.
const EXHAUSTIVE_TRIPARTITION_BLOCKS: usize = 14;

/// Looks for a tri-partition `S₁,S₂,S₃` of the blocks with
/// `Σ min(g, Π_{j∈S_i} ξ_j) ≥ 2g + 2`, `ξ_j = min_k ℓ_kj + 1`.
pub fn identifiability_check(spec: &ModelSpec) -> Identifiability {
    let d = spec.n_blocks();
    let g = spec.g() as u128;
    if d < 3 {
        return Identifiability::Unknown {
            reason: format!("the sufficient condition needs at least 3 blocks, model has {d}"),
        };
    }
    let xi: Vec<u128> = (0..d)
        .map(|j| (0..spec.g()).map(|k| spec.mode_count(k, j)).min().unwrap_or(0) as u128 + 1)
        .collect();
    let score = |assign: &[usize]| -> u128 {
        let mut gamma = [1u128; 3];
        for (j, &s) in assign.iter().enumerate() {
            gamma[s] = gamma[s].saturating_mul(xi[j]);
        }
        gamma.iter().map(|&x| x.min(g)).sum()
    };
    let witness = |assign: &[usize]| -> [Vec<usize>; 3] {
        let mut w: [Vec<usize>; 3] = Default::default();
        for (j, &s) in assign.iter().enumerate() {
            w[s].push(j);
        }
        w
    };
    let need = 2 * g + 2;
    if d <= EXHAUSTIVE_TRIPARTITION_BLOCKS {
        // restricted growth strings with exactly three labels
        let mut assign = vec![0usize; d];
        loop {
            let used = assign.iter().max().map_or(0, |m| m + 1);
            if used == 3 && score(&assign) >= need {
                return Identifiability::Identifiable { witness: witness(&assign) };
            }
            if !next_growth_string(&mut assign, 3) {
                break;
            }
        }
        Identifiability::Unknown {
            reason: format!("no tri-partition of the {d} blocks reaches 2g + 2 = {need}"),
        }
    } else {
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| xi[b].cmp(&xi[a]).then(a.cmp(&b)));
        let mut assign = vec![0usize; d];
        let mut gamma = [1u128; 3];
        for (pos, &j) in order.iter().enumerate() {
            let s = if pos < 3 { pos } else { (0..3).min_by_key(|&s| gamma[s]).unwrap_or(0) };
            assign[j] = s;
            gamma[s] = gamma[s].saturating_mul(xi[j]);
        }
        if score(&assign) >= need {
            Identifiability::Identifiable { witness: witness(&assign) }
        } else {
            Identifiability::Unknown {
                reason: format!("greedy search over {d} blocks found no tri-partition reaching {need}"),
            }
        }
    }
}

/// Next restricted growth string with labels below `k`; false when done.
fn next_growth_string(a: &mut [usize], k: usize) -> bool {
    for i in (1..a.len()).rev() {
        let prefix_max = a[..i].iter().max().copied().unwrap_or(0);
        if a[i] + 1 < k && a[i] <= prefix_max {
            a[i] += 1;
            a[i + 1..].fill(0);
            return true;
        }
    }
    false
}
