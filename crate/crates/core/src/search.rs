//! Metropolis-within-Gibbs search over the block partition and the mode
//! numbers at a fixed number of classes, and the final choice of the class
//! number by BIC.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{bic, log_integrated_block, log_integrated_block_upto, sample_labels, sample_params};
use crate::data::CategoricalDataset;
use crate::em::{cim_em_fit, em_fit, EmFit, EmSettings};
use crate::encode::{BlockColumn, EncodedData};
use crate::error::{CmmError, Result};
use crate::likelihood::log_sum_exp;
use crate::model::{block_size, BlockPartition, ModelSpec};
use crate::rng::Seed;
use crate::sim::sample_categorical;
use crate::stats::{block_counts, SufficientStats};

/// How the mode number of one (class, block) is refreshed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSweep {
    /// Draw from the block evidence restricted to `{ℓ−1, ℓ, ℓ+1}`.
    Neighbourhood,
    /// Same draw used as a proposal, then corrected by a Metropolis step so
    /// the evidence is left invariant.
    Metropolized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConfig {
    pub iters: usize,
    pub burnin: usize,
    /// Largest block (in crossings) a proposal may create.
    pub max_block_size: usize,
    pub mode_sweep: ModeSweep,
    pub record_trace: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { iters: 3000, burnin: 1000, max_block_size: 512, mode_sweep: ModeSweep::Metropolized, record_trace: true }
    }
}

/// A block partition together with its mode numbers `[k][j]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Structure {
    pub partition: BlockPartition,
    pub modes: Vec<Vec<usize>>,
}

impl Structure {
    pub fn spec(&self, n_levels: &[usize]) -> Result<ModelSpec> {
        ModelSpec::new(self.modes.len(), self.partition.clone(), self.modes.clone(), n_levels)
    }

    /// Mode numbers flattened class by class, e.g. `2 2 2|1 2 2`.
    pub fn modes_string(&self) -> String {
        self.modes
            .iter()
            .map(|row| row.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" "))
            .collect::<Vec<_>>()
            .join("|")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TallyEntry {
    pub visits: u64,
    /// Best integrated complete-data log-likelihood seen in this state.
    pub best_log_evidence: f64,
}

/// Post-burn-in visit counts per structure.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally(pub BTreeMap<Structure, TallyEntry>);

impl Tally {
    pub fn record(&mut self, s: &Structure, log_evidence: f64) {
        match self.0.get_mut(s) {
            Some(e) => {
                e.visits += 1;
                e.best_log_evidence = e.best_log_evidence.max(log_evidence);
            }
            None => {
                self.0.insert(s.clone(), TallyEntry { visits: 1, best_log_evidence: log_evidence });
            }
        }
    }

    pub fn merge(&mut self, other: &Tally) {
        for (s, o) in &other.0 {
            let e = self.0.entry(s.clone()).or_insert(TallyEntry { visits: 0, best_log_evidence: f64::NEG_INFINITY });
            e.visits += o.visits;
            e.best_log_evidence = e.best_log_evidence.max(o.best_log_evidence);
        }
    }

    pub fn total(&self) -> u64 {
        self.0.values().map(|e| e.visits).sum()
    }

    /// Most visited structure; ties by best evidence, then by order.
    pub fn best(&self) -> Option<(&Structure, &TallyEntry)> {
        self.0.iter().fold(None, |best, cur| match best {
            None => Some(cur),
            Some(b) => {
                let better = cur.1.visits > b.1.visits
                    || (cur.1.visits == b.1.visits && cur.1.best_log_evidence > b.1.best_log_evidence);
                Some(if better { cur } else { b })
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub sigma: String,
    pub modes: String,
    pub log_evidence: f64,
    pub accepted: bool,
}

/// Partition obtained by moving variable `v` into block `target`, or into
/// a new singleton when `target` is `None`.
fn move_variable(sigma: &BlockPartition, v: usize, target: Option<usize>) -> BlockPartition {
    let mut blocks: Vec<Vec<usize>> =
        sigma.blocks().iter().map(|b| b.iter().copied().filter(|&x| x != v).collect()).collect();
    match target {
        Some(t) => blocks[t].push(v),
        None => blocks.push(vec![v]),
    }
    blocks.retain(|b| !b.is_empty());
    BlockPartition::new(blocks, sigma.n_vars()).expect("moving one variable keeps a partition")
}

/// All partitions differing from `sigma` by the block of exactly one
/// variable, canonical and without duplicates.
pub fn neighborhood(sigma: &BlockPartition) -> Vec<BlockPartition> {
    let mut out = BTreeSet::new();
    let owner = sigma.assignment();
    for v in 0..sigma.n_vars() {
        for t in 0..sigma.n_blocks() {
            if t != owner[v] {
                out.insert(move_variable(sigma, v, Some(t)));
            }
        }
        if sigma.blocks()[owner[v]].len() > 1 {
            out.insert(move_variable(sigma, v, None));
        }
    }
    out.into_iter().collect()
}

/// A candidate structure with the blocks it creates and removes.
#[derive(Debug, Clone)]
pub struct Proposal {
    pub partition: BlockPartition,
    /// New blocks with their mode numbers per class.
    pub added: Vec<(Vec<usize>, Vec<usize>)>,
    pub removed: Vec<Vec<usize>>,
    /// `ln q(σ★ → σ) − ln q(σ → σ★)`.
    pub log_q_ratio: f64,
    /// Set when a new block exceeds the size cap.
    pub auto_reject: bool,
}

/// Draws a neighbour uniformly and fresh mode numbers for every class of
/// each new block.
pub fn propose<R: Rng + ?Sized>(
    sigma: &BlockPartition,
    g: usize,
    n_levels: &[usize],
    max_block_size: usize,
    rng: &mut R,
) -> Result<Proposal> {
    let hood = neighborhood(sigma);
    if hood.is_empty() {
        return Err(CmmError::Domain("a single variable has no neighbouring partitions".into()));
    }
    let candidate = hood[rng.random_range(0..hood.len())].clone();
    let back = neighborhood(&candidate).len();
    let old: BTreeSet<&Vec<usize>> = sigma.blocks().iter().collect();
    let new: BTreeSet<&Vec<usize>> = candidate.blocks().iter().collect();
    let mut log_q_ratio = (hood.len() as f64).ln() - (back as f64).ln();
    let mut auto_reject = false;
    let mut added = Vec::new();
    for &b in new.difference(&old) {
        let m = block_size(b, n_levels)?;
        if m > max_block_size {
            auto_reject = true;
            added.push((b.clone(), vec![1; g]));
            continue;
        }
        log_q_ratio += g as f64 * ((m - 1) as f64).ln();
        let modes = (0..g).map(|_| rng.random_range(1..m)).collect();
        added.push((b.clone(), modes));
    }
    let removed: Vec<Vec<usize>> = old.difference(&new).map(|&b| b.clone()).collect();
    for b in &removed {
        let m = block_size(b, n_levels)?;
        log_q_ratio -= g as f64 * ((m - 1) as f64).ln();
    }
    Ok(Proposal { partition: candidate, added, removed, log_q_ratio, auto_reject })
}

/// Metropolis decision from the evidence difference and the proposal ratio.
pub fn mh_accept<R: Rng + ?Sized>(log_evidence_diff: f64, log_q_ratio: f64, rng: &mut R) -> bool {
    let log_mu = log_evidence_diff + log_q_ratio;
    if log_mu.is_nan() {
        return false;
    }
    if log_mu >= 0.0 {
        return true;
    }
    rng.random::<f64>().ln() < log_mu
}

/// Refreshes one mode number. Returns the new value and its evidence.
pub fn sweep_one<R: Rng + ?Sized>(counts: &[f64], l: usize, rule: ModeSweep, rng: &mut R) -> Result<(usize, f64)> {
    let m = counts.len();
    if m == 2 {
        return Ok((1, log_integrated_block(counts, 1)?));
    }
    let reach = match rule {
        ModeSweep::Neighbourhood => l + 1,
        ModeSweep::Metropolized => l + 2,
    }
    .min(m - 1);
    let ev = log_integrated_block_upto(counts, reach)?;
    let window = |c: usize| (c.max(2) - 1)..=(c + 1).min(m - 1);
    let weights = |c: usize| -> Vec<f64> { window(c).map(|x| ev[x - 1]).collect() };
    let here = weights(l);
    let lse_here = log_sum_exp(&here);
    let probs: Vec<f64> = here.iter().map(|w| (w - lse_here).exp()).collect();
    let pick = window(l).nth(sample_categorical(&probs, rng)).unwrap_or(l);
    let next = match rule {
        ModeSweep::Neighbourhood => pick,
        ModeSweep::Metropolized => {
            let log_ratio = lse_here - log_sum_exp(&weights(pick));
            if pick == l || mh_accept(log_ratio, 0.0, rng) {
                pick
            } else {
                l
            }
        }
    };
    Ok((next, ev[next - 1]))
}

/// Mutable sampler state for one chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub structure: Structure,
    pub labels: Vec<usize>,
    pub columns: Vec<BlockColumn>,
    pub iteration: usize,
    pub log_evidence: f64,
}

#[derive(Debug, Clone)]
pub struct ChainResult {
    pub best: Structure,
    pub tally: Tally,
    pub trace: Vec<TraceRow>,
    pub proposed: usize,
    pub accepted: usize,
    /// Iterations whose label draw left a class empty twice; the previous
    /// labels were kept.
    pub empty_class_events: usize,
}

fn stats_for(columns: &[BlockColumn], labels: &[usize], g: usize) -> SufficientStats {
    let mut nk = vec![0.0; g];
    for &k in labels {
        nk[k] += 1.0;
    }
    let per_block: Vec<Vec<Vec<f64>>> =
        columns.iter().map(|c| block_counts(&c.crossings, c.size, labels, g)).collect();
    let counts = (0..g).map(|k| per_block.iter().map(|b| b[k].clone()).collect()).collect();
    SufficientStats { nk, counts }
}

fn has_empty_class(labels: &[usize], g: usize) -> bool {
    let mut seen = vec![false; g];
    for &k in labels {
        seen[k] = true;
    }
    seen.contains(&false)
}

/// Initial labels: drawn from soft responsibilities when given, uniform
/// otherwise; redrawn until no class is empty.
fn initial_labels<R: Rng + ?Sized>(n: usize, g: usize, init: Option<&[f64]>, rng: &mut R) -> Result<Vec<usize>> {
    if g == 1 {
        return Ok(vec![0; n]);
    }
    if n < g {
        return Err(CmmError::Data(format!("{n} individuals cannot fill {g} classes")));
    }
    let uniform = vec![1.0; g];
    for _ in 0..1000 {
        let labels: Vec<usize> = (0..n)
            .map(|i| sample_categorical(init.map_or(&uniform[..], |r| &r[i * g..(i + 1) * g]), rng))
            .collect();
        if !has_empty_class(&labels, g) {
            return Ok(labels);
        }
    }
    // fall back to a round-robin start
    Ok((0..n).map(|i| i % g).collect())
}

/// Runs one chain at `g` classes from the singleton partition with
/// `ℓ = m − 1` everywhere.
pub fn run_chain(
    data: &CategoricalDataset,
    g: usize,
    config: &ChainConfig,
    init: Option<&[f64]>,
    seed: Seed,
) -> Result<ChainResult> {
    if config.burnin >= config.iters {
        return Err(CmmError::Domain(format!("burn-in {} must be below iterations {}", config.burnin, config.iters)));
    }
    if data.n() == 0 {
        return Err(CmmError::Data("no individuals".into()));
    }
    let mut rng = seed.rng();
    let n_levels = data.schema().n_levels();
    let partition = BlockPartition::singletons(data.n_vars());
    let modes = vec![n_levels.iter().map(|m| m - 1).collect(); g];
    let columns = partition.blocks().iter().map(|b| BlockColumn::encode(data, b)).collect::<Result<Vec<_>>>()?;
    let labels = initial_labels(data.n(), g, init, &mut rng)?;
    let mut state = ChainState {
        structure: Structure { partition, modes },
        labels,
        columns,
        iteration: 0,
        log_evidence: f64::NEG_INFINITY,
    };
    let mut tally = Tally::default();
    let mut trace = Vec::new();
    let (mut proposed, mut accepted, mut empty_events) = (0, 0, 0);

    for it in 0..config.iters {
        state.iteration = it;
        // θ then Z; with one class the labels never change
        if g > 1 {
            let spec = state.structure.spec(&n_levels)?;
            let enc = EncodedData::from_columns(data.n(), state.columns.clone());
            let stats = stats_for(&state.columns, &state.labels, g);
            let theta = sample_params(&stats, &spec, &mut rng)?;
            let mut z = sample_labels(&enc, &theta, &spec, &mut rng);
            if has_empty_class(&z, g) {
                z = sample_labels(&enc, &theta, &spec, &mut rng);
            }
            if has_empty_class(&z, g) {
                empty_events += 1;
            } else {
                state.labels = z;
            }
        }

        // structure move
        let mut moved = false;
        if data.n_vars() > 1 {
            proposed += 1;
            let prop = propose(&state.structure.partition, g, &n_levels, config.max_block_size, &mut rng)?;
            if !prop.auto_reject {
                let mut new_cols = Vec::with_capacity(prop.added.len());
                let mut diff = 0.0;
                for (block, modes) in &prop.added {
                    let col = BlockColumn::encode(data, block)?;
                    let counts = block_counts(&col.crossings, col.size, &state.labels, g);
                    for (c, &l) in counts.iter().zip(modes) {
                        diff += log_integrated_block(c, l)?;
                    }
                    new_cols.push(col);
                }
                for block in &prop.removed {
                    let j = state.structure.partition.position(block).expect("removed block is current");
                    let col = &state.columns[j];
                    let counts = block_counts(&col.crossings, col.size, &state.labels, g);
                    for (k, c) in counts.iter().enumerate() {
                        diff -= log_integrated_block(c, state.structure.modes[k][j])?;
                    }
                }
                if mh_accept(diff, prop.log_q_ratio, &mut rng) {
                    moved = true;
                    accepted += 1;
                    let old = std::mem::take(&mut state.columns);
                    let old_structure = state.structure.clone();
                    let mut modes = vec![Vec::with_capacity(prop.partition.n_blocks()); g];
                    let mut columns = Vec::with_capacity(prop.partition.n_blocks());
                    let mut fresh = prop.added.iter().zip(new_cols);
                    for block in prop.partition.blocks() {
                        if let Some(j) = old_structure.partition.position(block) {
                            columns.push(old[j].clone());
                            for (k, row) in modes.iter_mut().enumerate() {
                                row.push(old_structure.modes[k][j]);
                            }
                        } else {
                            let ((_, ls), col) = fresh.next().expect("every new block was proposed");
                            columns.push(col);
                            for (row, &l) in modes.iter_mut().zip(ls) {
                                row.push(l);
                            }
                        }
                    }
                    state.structure = Structure { partition: prop.partition, modes };
                    state.columns = columns;
                }
            }
        }

        // mode numbers, class by class then block by block
        let stats = stats_for(&state.columns, &state.labels, g);
        let mut log_evidence = 0.0;
        for k in 0..g {
            for j in 0..state.structure.partition.n_blocks() {
                let (l, ev) =
                    sweep_one(&stats.counts[k][j], state.structure.modes[k][j], config.mode_sweep, &mut rng)?;
                state.structure.modes[k][j] = l;
                log_evidence += ev;
            }
        }
        state.log_evidence = log_evidence;

        if it >= config.burnin {
            tally.record(&state.structure, log_evidence);
        }
        if config.record_trace {
            trace.push(TraceRow {
                iteration: it,
                sigma: state.structure.partition.to_string(),
                modes: state.structure.modes_string(),
                log_evidence,
                accepted: moved,
            });
        }
    }
    let best = tally.best().map(|(s, _)| s.clone()).expect("at least one post burn-in iteration");
    Ok(ChainResult { best, tally, trace, proposed, accepted, empty_class_events: empty_events })
}

/// Chains run independently and are pooled in chain order.
pub fn run_chains(
    data: &CategoricalDataset,
    g: usize,
    chains: usize,
    config: &ChainConfig,
    init: Option<&[f64]>,
    seed: Seed,
) -> Result<(Tally, Vec<ChainResult>)> {
    if chains == 0 {
        return Err(CmmError::Domain("at least one chain is needed".into()));
    }
    let results = (0..chains)
        .into_par_iter()
        .map(|c| run_chain(data, g, config, init, seed.derive("chain", c as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut pooled = Tally::default();
    for r in &results {
        pooled.merge(&r.tally);
    }
    Ok((pooled, results))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectConfig {
    pub g_min: usize,
    pub g_max: usize,
    pub chains: usize,
    pub chain: ChainConfig,
    pub em: EmSettings,
    /// Also fit the conditional-independence model at each `g`.
    pub with_cim: bool,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self { g_min: 1, g_max: 4, chains: 25, chain: ChainConfig::default(), em: EmSettings::default(), with_cim: false }
    }
}

/// Starts drawn for the conditional-independence fit that seeds the labels.
const INIT_STARTS: usize = 5;

#[derive(Debug, Clone)]
pub struct ClassCountResult {
    pub g: usize,
    pub structure: Structure,
    pub spec: ModelSpec,
    pub fit: EmFit,
    pub bic: f64,
    pub tally: Tally,
    pub chains: Vec<ChainResult>,
    pub cim: Option<(ModelSpec, EmFit, f64)>,
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub results: Vec<ClassCountResult>,
    /// Index into `results` of the highest CMM BIC.
    pub best: usize,
    pub best_cim: Option<usize>,
}

/// For each `g`: pooled chains pick a structure, EM fits it, BIC ranks.
pub fn select_model(data: &CategoricalDataset, config: &SelectConfig, seed: Seed) -> Result<Selection> {
    if config.g_min == 0 || config.g_min > config.g_max {
        return Err(CmmError::Domain(format!("invalid class range {}..={}", config.g_min, config.g_max)));
    }
    let n_levels = data.schema().n_levels();
    let singles = EncodedData::new(data, &BlockPartition::singletons(data.n_vars()))?;
    let mut results = Vec::new();
    for g in config.g_min..=config.g_max {
        let gseed = seed.derive("classes", g as u64);
        let init = if g > 1 {
            let quick = EmSettings { starts: config.em.starts.min(INIT_STARTS), ..config.em };
            Some(cim_em_fit(&singles, g, &quick, gseed.derive("init", 0))?.1.responsibilities)
        } else {
            None
        };
        let (tally, chains) = run_chains(data, g, config.chains, &config.chain, init.as_deref(), gseed)?;
        let structure = tally.best().map(|(s, _)| s.clone()).expect("chains record visits");
        let spec = structure.spec(&n_levels)?;
        let enc = EncodedData::new(data, spec.partition())?;
        let fit = em_fit(&enc, &spec, &config.em, gseed.derive("em", 0))?;
        let score = bic(fit.loglik, spec.nu(), data.n());
        let cim = if config.with_cim {
            let (cspec, cfit) = cim_em_fit(&singles, g, &config.em, gseed.derive("cim", 0))?;
            let cbic = bic(cfit.loglik, cspec.nu(), data.n());
            Some((cspec, cfit, cbic))
        } else {
            None
        };
        results.push(ClassCountResult { g, structure, spec, fit, bic: score, tally, chains, cim });
    }
    let argmax = |score: &dyn Fn(&ClassCountResult) -> Option<f64>| -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, r) in results.iter().enumerate() {
            if let Some(s) = score(r) {
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((i, s));
                }
            }
        }
        best.map(|b| b.0)
    };
    let best = argmax(&|r| Some(r.bic)).expect("at least one class count");
    let best_cim = argmax(&|r| r.cim.as_ref().map(|c| c.2));
    Ok(Selection { results, best, best_cim })
}
