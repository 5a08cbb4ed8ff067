//! Priors, full-conditional samplers and the integrated complete-data
//! likelihood of a block.
//!
//! Block probabilities are handled through the stick-breaking coordinates
//! `ε_h = a_h / (1 − a_1 − … − a_{h−1})`. Under the flat truncated prior the
//! `ε_h` are independent, uniform on `[1/(m−h+1), 1]`, and the likelihood of
//! a block factorizes as `(m−ℓ)^(−n̄^ℓ) Π_h ε_h^n(h) (1−ε_h)^n̄^h`, so the
//! posterior and the evidence both reduce to one-dimensional beta integrals.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::em::e_step;
use crate::encode::EncodedData;
use crate::error::{CmmError, Result};
use crate::model::{BlockParams, MixtureParams, ModelSpec};
use crate::sim::sample_categorical;
use crate::special_fn::{inv_trunc_beta_cdf, log_inc_beta_upper};
use crate::stats::{OrderedCounts, SufficientStats};

/// Fixed hyperparameters: Jeffreys prior on the proportions and unit
/// shapes for the truncated Dirichlet on block probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams;

impl HyperParams {
    pub const DIRICHLET_HALF: f64 = 0.5;
    pub const GAMMA: f64 = 1.0;
}

/// Draw from Dirichlet(1/2 + n_1, …, 1/2 + n_g).
pub fn sample_proportions<R: Rng + ?Sized>(nk: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if nk.len() == 1 {
        return Ok(vec![1.0]);
    }
    let mut draws = nk
        .iter()
        .map(|&n| {
            let shape = HyperParams::DIRICHLET_HALF + n;
            Gamma::new(shape, 1.0)
                .map(|d| d.sample(rng).max(f64::MIN_POSITIVE))
                .map_err(|e| CmmError::Numeric(format!("gamma shape {shape}: {e}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let total: f64 = draws.iter().sum();
    for d in &mut draws {
        *d /= total;
    }
    Ok(draws)
}

/// The `l` crossings with largest counts, decreasing, ties by index.
pub fn posterior_mode_locations(counts: &[f64], l: usize) -> Vec<u32> {
    OrderedCounts::new(counts).order[..l].to_vec()
}

/// δ̃ for every (class, block).
pub fn posterior_mode_locations_all(stats: &SufficientStats, spec: &ModelSpec) -> Vec<Vec<Vec<u32>>> {
    (0..spec.g())
        .map(|k| {
            (0..spec.n_blocks())
                .map(|j| posterior_mode_locations(&stats.counts[k][j], spec.mode_count(k, j)))
                .collect()
        })
        .collect()
}

const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Block probabilities drawn from their full conditional with modes fixed
/// at the `l` largest counts.
///
/// Each `ε_h` is drawn by inversion from Beta(n(h)+1, n̄^h+1) truncated to
/// `[1/(m−h+1), 1]`; the masses are then rebuilt and sorted decreasingly
/// together with their crossings.
pub fn sample_block_probs<R: Rng + ?Sized>(counts: &[f64], l: usize, rng: &mut R) -> Result<BlockParams> {
    let m = counts.len();
    if l == 0 || l >= m {
        return Err(CmmError::Domain(format!("{l} modes for a block of {m} crossings")));
    }
    let oc = OrderedCounts::new(counts);
    let mut pairs: Vec<(u32, f64)> = Vec::with_capacity(l);
    let mut rest = 1.0;
    for h in 1..=l {
        let lower = 1.0 / (m - h + 1) as f64;
        let (a, b) = (oc.sorted[h - 1] + 1.0, oc.residual(h) + 1.0);
        let u: f64 = rng.random();
        let eps = inv_trunc_beta_cdf(u, a, b, lower)
            .map_err(|e| CmmError::Numeric(format!("block draw for mode {h} of {l} (m={m}): {e}")))?
            .clamp(lower, BELOW_ONE);
        pairs.push((oc.order[h - 1], eps * rest));
        rest *= 1.0 - eps;
    }
    pairs.sort_by(|x, y| y.1.total_cmp(&x.1));
    let mut a: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    a.push(rest);
    let bp = BlockParams { delta: pairs.into_iter().map(|p| p.0).collect(), a };
    bp.validate(m)?;
    Ok(bp)
}

/// θ drawn given the labels: proportions plus every block.
pub fn sample_params<R: Rng + ?Sized>(stats: &SufficientStats, spec: &ModelSpec, rng: &mut R) -> Result<MixtureParams> {
    let pi = sample_proportions(&stats.nk, rng)?;
    let blocks = (0..spec.g())
        .map(|k| {
            (0..spec.n_blocks())
                .map(|j| sample_block_probs(&stats.counts[k][j], spec.mode_count(k, j), rng))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MixtureParams { pi, blocks })
}

/// Labels drawn from their posterior class probabilities.
pub fn sample_labels<R: Rng + ?Sized>(
    data: &EncodedData,
    params: &MixtureParams,
    spec: &ModelSpec,
    rng: &mut R,
) -> Vec<usize> {
    let g = spec.g();
    e_step(data, params, spec).chunks_exact(g).map(|row| sample_categorical(row, rng)).collect()
}

/// Per-mode terms `ln Bi(1/(m−h+1); n(h)+1, n̄^h+1) − ln(m−h)` for
/// `h = 1..=upto`.
fn evidence_terms(oc: &OrderedCounts, upto: usize) -> Result<Vec<f64>> {
    let m = oc.size();
    (1..=upto)
        .map(|h| {
            let x = 1.0 / (m - h + 1) as f64;
            Ok(log_inc_beta_upper(x, oc.sorted[h - 1] + 1.0, oc.residual(h) + 1.0)? - ((m - h) as f64).ln())
        })
        .collect()
}

fn check_modes(l: usize, m: usize) -> Result<()> {
    if l == 0 || l >= m {
        return Err(CmmError::Domain(format!("mode number {l} outside 1..{m}")));
    }
    Ok(())
}

/// `ln p(X^j | Z, ℓ)` for one (class, block) with the modes at the `ℓ`
/// largest counts.
pub fn log_integrated_block(counts: &[f64], l: usize) -> Result<f64> {
    let m = counts.len();
    check_modes(l, m)?;
    let oc = OrderedCounts::new(counts);
    let terms = evidence_terms(&oc, l)?;
    Ok(terms.iter().sum::<f64>() - oc.residual(l) * ((m - l) as f64).ln())
}

/// `ln p(X^j | Z, ℓ)` for every `ℓ` in `1..=upto`, sharing the per-mode terms.
pub fn log_integrated_block_upto(counts: &[f64], upto: usize) -> Result<Vec<f64>> {
    let m = counts.len();
    check_modes(upto, m)?;
    let oc = OrderedCounts::new(counts);
    let mut acc = 0.0;
    Ok(evidence_terms(&oc, upto)?
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            acc += t;
            let l = i + 1;
            acc - oc.residual(l) * ((m - l) as f64).ln()
        })
        .collect())
}

/// `Σ_{k,j} ln p(X^j | Z, ℓ_kj)`; the label prior is left out since it does
/// not depend on the structure.
pub fn log_integrated_complete(stats: &SufficientStats, spec: &ModelSpec) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..spec.g() {
        for j in 0..spec.n_blocks() {
            total += log_integrated_block(&stats.counts[k][j], spec.mode_count(k, j))?;
        }
    }
    Ok(total)
}

/// `loglik − (ν/2) ln n`.
pub fn bic(loglik: f64, nu: usize, n: usize) -> f64 {
    loglik - 0.5 * nu as f64 * (n as f64).ln()
}

/// Mode number of a single block maximizing the integrated likelihood;
/// ties go to fewer modes.
pub fn mode_number_by_evidence(counts: &[f64]) -> Result<usize> {
    let ev = log_integrated_block_upto(counts, counts.len() - 1)?;
    Ok(argmax_first(&ev) + 1)
}

/// Mode number of a single block maximizing the complete-data BIC
/// `max ln L(ℓ) − (ℓ/2) ln n`; ties go to fewer modes.
pub fn mode_number_by_bic(counts: &[f64]) -> Result<usize> {
    let m = counts.len();
    check_modes(1, m)?;
    let oc = OrderedCounts::new(counts);
    let n = oc.total();
    let xlogy = |x: f64, y: f64| if x > 0.0 { x * y.ln() } else { 0.0 };
    let scores: Vec<f64> = (1..m)
        .map(|l| {
            let modes: f64 = oc.sorted[..l].iter().map(|&c| xlogy(c, c / n)).sum();
            let rest = oc.residual(l);
            bic(modes + xlogy(rest, rest / (n * (m - l) as f64)), l, n as usize)
        })
        .collect();
    Ok(argmax_first(&scores) + 1)
}

fn argmax_first(v: &[f64]) -> usize {
    (1..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b })
}
