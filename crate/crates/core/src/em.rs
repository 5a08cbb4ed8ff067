//! Maximum-likelihood estimation of the block parameters by EM.

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::encode::EncodedData;
use crate::error::{CmmError, Result};
use crate::likelihood::{log_sum_exp, LogTables};
use crate::model::{BlockParams, MixtureParams, ModelSpec};
use crate::rng::Seed;
use crate::stats::SufficientStats;

/// Smallest probability the M-step assigns to a single crossing.
///
/// Without it an unobserved crossing gets probability zero and the next
/// E-step takes logs of zero.
pub const CELL_FLOOR: f64 = 1e-10;

/// Classes with less responsibility mass than this are treated as empty.
pub const EMPTY_CLASS_MASS: f64 = 1e-8;

/// Redraws allowed per start before the start is declared degenerate.
const MAX_REDRAWS: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmSettings {
    pub starts: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EmSettings {
    fn default() -> Self {
        Self { starts: 25, tol: 1e-6, max_iter: 500 }
    }
}

/// Posterior class probabilities (row-major `n × g`) and the observed
/// log-likelihood at `params`, computed in one pass.
pub fn e_step_with_loglik(data: &EncodedData, params: &MixtureParams, spec: &ModelSpec) -> (Vec<f64>, f64) {
    let tables = LogTables::new(params, spec);
    let g = spec.g();
    let mut resp = vec![0.0; data.n() * g];
    let mut loglik = 0.0;
    for (i, row) in resp.chunks_exact_mut(g).enumerate() {
        tables.joint_into(data, i, row);
        let lse = log_sum_exp(row);
        loglik += lse;
        for t in row.iter_mut() {
            *t = (*t - lse).exp();
        }
    }
    (resp, loglik)
}

pub fn e_step(data: &EncodedData, params: &MixtureParams, spec: &ModelSpec) -> Vec<f64> {
    e_step_with_loglik(data, params, spec).0
}

/// Maximizes `Σ w_h ln x_h` subject to `Σ x_h = 1` and `x_h ≥ floor_h`.
///
/// Returns plain proportions `w_h / Σw` when no floor binds.
fn floored_proportions(weights: &[f64], floors: &[f64]) -> Vec<f64> {
    let mut pinned = vec![false; weights.len()];
    loop {
        let free_w: f64 = weights.iter().zip(&pinned).filter(|(_, &p)| !p).map(|(w, _)| w).sum();
        let pinned_mass: f64 = floors.iter().zip(&pinned).filter(|(_, &p)| p).map(|(f, _)| f).sum();
        let scale = (1.0 - pinned_mass) / free_w;
        let mut changed = false;
        for h in 0..weights.len() {
            if !pinned[h] && (free_w == 0.0 || weights[h] * scale < floors[h]) {
                pinned[h] = true;
                changed = true;
            }
        }
        if !changed {
            return weights
                .iter()
                .zip(floors)
                .zip(&pinned)
                .map(|((&w, &f), &p)| if p { f } else { w / free_w * (1.0 - pinned_mass) })
                .collect();
        }
        if pinned.iter().all(|&p| p) {
            // only reachable when every weight is zero
            let total: f64 = floors.iter().sum();
            return floors.iter().map(|f| f / total).collect();
        }
    }
}

/// Block parameters maximizing the expected complete log-likelihood for
/// one (class, block) pair with `l` modes.
pub fn block_m_step(counts: &[f64], l: usize) -> BlockParams {
    let m = counts.len();
    let ordered = crate::stats::OrderedCounts::new(counts);
    let mut weights: Vec<f64> = ordered.sorted[..l].to_vec();
    weights.push(ordered.residual(l));
    let mut floors = vec![CELL_FLOOR; l];
    floors.push(CELL_FLOOR * (m - l) as f64);
    let a = if weights.iter().sum::<f64>() > 0.0 {
        floored_proportions(&weights, &floors)
    } else {
        vec![1.0 / m as f64; l].into_iter().chain([(m - l) as f64 / m as f64]).collect()
    };
    BlockParams { delta: ordered.order[..l].to_vec(), a }
}

pub fn m_step(stats: &SufficientStats, spec: &ModelSpec) -> Result<MixtureParams> {
    if let Some(k) = stats.nk.iter().position(|&n| !(n > EMPTY_CLASS_MASS)) {
        return Err(CmmError::EmptyClass { class: k });
    }
    let n: f64 = stats.nk.iter().sum();
    let pi = stats.nk.iter().map(|&nk| nk / n).collect();
    let blocks = stats
        .counts
        .iter()
        .enumerate()
        .map(|(k, row)| row.iter().enumerate().map(|(j, c)| block_m_step(c, spec.mode_count(k, j))).collect())
        .collect();
    Ok(MixtureParams { pi, blocks })
}

/// Flat-Dirichlet responsibilities, one row per individual.
pub fn random_responsibilities<R: Rng + ?Sized>(n: usize, g: usize, rng: &mut R) -> Vec<f64> {
    let mut resp = Vec::with_capacity(n * g);
    for _ in 0..n {
        let row: Vec<f64> = (0..g).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let s: f64 = row.iter().sum();
        resp.extend(row.iter().map(|x| x / s));
    }
    resp
}

/// One EM run from given responsibilities.
#[derive(Debug, Clone)]
pub struct EmRun {
    pub params: MixtureParams,
    pub loglik: f64,
    pub responsibilities: Vec<f64>,
    /// Observed log-likelihood after each M-step.
    pub trace: Vec<f64>,
    pub converged: bool,
}

pub fn em_from_responsibilities(
    data: &EncodedData,
    spec: &ModelSpec,
    init: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<EmRun> {
    let g = spec.g();
    let mut params = m_step(&SufficientStats::from_responsibilities(data, init, g)?, spec)?;
    let (mut resp, mut loglik) = e_step_with_loglik(data, &params, spec);
    let mut trace = vec![loglik];
    let mut converged = false;
    for _ in 0..max_iter {
        let next = m_step(&SufficientStats::from_responsibilities(data, &resp, g)?, spec)?;
        let (next_resp, next_ll) = e_step_with_loglik(data, &next, spec);
        trace.push(next_ll);
        let gain = next_ll - loglik;
        params = next;
        resp = next_resp;
        loglik = next_ll;
        if gain < tol {
            converged = true;
            break;
        }
    }
    if !loglik.is_finite() {
        return Err(CmmError::Numeric(format!("non-finite log-likelihood {loglik}")));
    }
    Ok(EmRun { params, loglik, responsibilities: resp, trace, converged })
}

#[derive(Debug, Clone)]
pub struct EmFit {
    pub params: MixtureParams,
    pub loglik: f64,
    pub responsibilities: Vec<f64>,
    /// Index of the winning start.
    pub start: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Starts abandoned because a class emptied on every redraw.
    pub degenerate_starts: usize,
}

/// One start: draws and redraws until a run completes without an empty class.
fn em_start(data: &EncodedData, spec: &ModelSpec, settings: &EmSettings, seed: Seed, s: usize) -> Result<EmRun> {
    let mut last_err = None;
    for attempt in 0..MAX_REDRAWS {
        let mut rng = seed.derive("em-start", s as u64).derive("redraw", attempt).rng();
        let init = random_responsibilities(data.n(), spec.g(), &mut rng);
        match em_from_responsibilities(data, spec, &init, settings.tol, settings.max_iter) {
            Ok(run) => return Ok(run),
            Err(e @ CmmError::EmptyClass { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or_else(|| CmmError::Estimation("no EM attempt made".into())))
}

/// Best of `settings.starts` random starts; ties go to the lowest index.
pub fn em_fit(data: &EncodedData, spec: &ModelSpec, settings: &EmSettings, seed: Seed) -> Result<EmFit> {
    if data.block_sizes() != spec.block_sizes() {
        return Err(CmmError::Structure("data encoding does not match the model blocks".into()));
    }
    if settings.starts == 0 {
        return Err(CmmError::Domain("EM needs at least one start".into()));
    }
    if data.n() == 0 {
        return Err(CmmError::Data("no individuals".into()));
    }
    let runs: Vec<Result<EmRun>> =
        (0..settings.starts).into_par_iter().map(|s| em_start(data, spec, settings, seed, s)).collect();
    let mut best: Option<(usize, EmRun)> = None;
    let mut degenerate = 0;
    let mut diagnostics = Vec::new();
    for (s, run) in runs.into_iter().enumerate() {
        match run {
            Ok(run) => {
                if best.as_ref().is_none_or(|(_, b)| run.loglik > b.loglik) {
                    best = Some((s, run));
                }
            }
            Err(CmmError::EmptyClass { class }) => {
                degenerate += 1;
                diagnostics.push(format!("start {s}: class {} emptied", class + 1));
            }
            Err(e) => diagnostics.push(format!("start {s}: {e}")),
        }
    }
    let Some((start, run)) = best else {
        return Err(CmmError::Estimation(format!(
            "all {} EM starts failed: {}",
            settings.starts,
            diagnostics.join("; ")
        )));
    };
    Ok(EmFit {
        iterations: run.trace.len() - 1,
        params: run.params,
        loglik: run.loglik,
        responsibilities: run.responsibilities,
        start,
        converged: run.converged,
        degenerate_starts: degenerate,
    })
}

/// Latent class model: one unconstrained multinomial per variable.
pub fn cim_em_fit(data: &EncodedData, g: usize, settings: &EmSettings, seed: Seed) -> Result<(ModelSpec, EmFit)> {
    if data.columns().iter().any(|c| c.vars.len() != 1) {
        return Err(CmmError::Structure("the independence model needs singleton blocks".into()));
    }
    let spec = ModelSpec::conditional_independence(g, &data.block_sizes())?;
    let fit = em_fit(data, &spec, settings, seed)?;
    Ok((spec, fit))
}

/// Index of the largest responsibility in each row, ties to the lowest class.
pub fn map_labels(resp: &[f64], g: usize) -> Vec<usize> {
    resp.chunks_exact(g)
        .map(|row| {
            row.iter().enumerate().fold(0, |best, (k, &t)| if t > row[best] { k } else { best })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CategoricalDataset, Schema};
    use crate::model::BlockPartition;
    use crate::sim::{gen_cmm, section52_model, section52_truth};

    fn encoded(data: &CategoricalDataset, p: &BlockPartition) -> EncodedData {
        EncodedData::new(data, p).unwrap()
    }

    #[test]
    fn block_m_step_hand_values() {
        let bp = block_m_step(&[7.0, 3.0], 1);
        assert_eq!(bp.delta, vec![0]);
        assert!((bp.a[0] - 0.7).abs() < 1e-15 && (bp.a[1] - 0.3).abs() < 1e-15);

        let bp = block_m_step(&[5.0, 5.0, 5.0], 1);
        assert_eq!(bp.delta, vec![0]);
        for p in bp.expand(3) {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }

        let bp = block_m_step(&[8.0, 1.0, 1.0], 2);
        assert_eq!(bp.delta, vec![0, 1]);
        let alpha = bp.expand(3);
        for (p, want) in alpha.iter().zip([0.8, 0.1, 0.1]) {
            assert!((p - want).abs() < 1e-15);
        }
    }

    #[test]
    fn floor_binds_on_zero_counts() {
        let bp = block_m_step(&[10.0, 0.0, 0.0, 0.0], 2);
        bp.validate(4).unwrap();
        assert_eq!(bp.a[1], CELL_FLOOR);
        assert_eq!(bp.a[2], 2.0 * CELL_FLOOR);
        assert!((bp.a.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn floored_proportions_is_the_constrained_maximizer() {
        let w = [5.0, 1e-12, 0.0, 3.0];
        let f = [1e-3; 4];
        let x = floored_proportions(&w, &f);
        assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(x[1], 1e-3);
        assert_eq!(x[2], 1e-3);
        assert!((x[0] / x[3] - 5.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn e_step_examples() {
        let (spec, params) = section52_truth();
        let row = vec![vec![0u32, 0, 0, 0, 0, 0]];
        let data = CategoricalDataset::from_rows(Schema::uniform(6, 3), &row).unwrap();
        let enc = encoded(&data, spec.partition());
        let t = e_step(&enc, &params, &spec);
        let p1 = 0.4f64.powi(3);
        let p2 = (0.2f64 / 7.0).powi(3);
        assert!((t[0] - p1 / (p1 + p2)).abs() < 1e-14);
        assert!((t[0] + t[1] - 1.0).abs() < 1e-15);

        let mut same = params.clone();
        same.blocks[1] = same.blocks[0].clone();
        let t = e_step(&enc, &same, &spec);
        assert!(t.iter().all(|&x| (x - 0.5).abs() < 1e-15));

        let mut lopsided = params;
        lopsided.pi = vec![1.0 - 1e-15, 1e-15];
        lopsided.blocks[1] = lopsided.blocks[0].clone();
        assert!(e_step(&enc, &lopsided, &spec)[0] > 1.0 - 1e-14);
    }

    #[test]
    fn single_class_fit_is_the_one_step_mle() {
        let model = section52_model();
        let (data, _) = gen_cmm(&model, 300, 9);
        let p = model.spec.partition().clone();
        let spec = ModelSpec::with_uniform_modes(1, p.clone(), 2, &[3; 6]).unwrap();
        let enc = encoded(&data, &p);
        let fit = em_fit(&enc, &spec, &EmSettings { starts: 3, ..Default::default() }, Seed(1)).unwrap();
        let direct = m_step(&SufficientStats::from_labels(&enc, &vec![0; 300], 1).unwrap(), &spec).unwrap();
        assert_eq!(fit.params, direct);
    }

    #[test]
    fn separated_classes_are_recovered() {
        let model = section52_model();
        let mut sharp = model.clone();
        for row in &mut sharp.params.blocks {
            for bp in row {
                bp.a = vec![0.5, 0.5 - 7e-9, 7e-9];
            }
        }
        let (data, labels) = gen_cmm(&sharp, 200, 4);
        let enc = encoded(&data, model.spec.partition());
        let fit = em_fit(&enc, &model.spec, &EmSettings { starts: 5, ..Default::default() }, Seed(2)).unwrap();
        let est = map_labels(&fit.responsibilities, 2);
        let agree = est.iter().zip(&labels).filter(|(a, b)| a == b).count();
        assert!(agree == 200 || agree == 0, "{agree}");
        assert!(fit.responsibilities.iter().all(|&t| !(1e-6..1.0 - 1e-6).contains(&t)));
    }

    #[test]
    fn cim_fit_matches_cmm_with_full_modes() {
        let model = section52_model();
        let (data, _) = gen_cmm(&model, 150, 5);
        let p = BlockPartition::singletons(6);
        let enc = encoded(&data, &p);
        let settings = EmSettings { starts: 4, ..Default::default() };
        let (spec, cim) = cim_em_fit(&enc, 2, &settings, Seed(3)).unwrap();
        let cmm = em_fit(&enc, &ModelSpec::with_uniform_modes(2, p, 2, &[3; 6]).unwrap(), &settings, Seed(3)).unwrap();
        assert_eq!(spec.nu(), 1 + 2 * 6 * 2);
        assert!((cim.loglik - cmm.loglik).abs() <= 1e-8);
    }

    #[test]
    fn cim_single_class_is_product_of_marginals() {
        let model = section52_model();
        let (data, _) = gen_cmm(&model, 120, 6);
        let enc = encoded(&data, &BlockPartition::singletons(6));
        let (spec, fit) = cim_em_fit(&enc, 1, &EmSettings { starts: 1, ..Default::default() }, Seed(0)).unwrap();
        for (b, bp) in fit.params.blocks[0].iter().enumerate() {
            let mut freq = [0.0; 3];
            for v in data.column(b) {
                freq[v as usize] += 1.0 / 120.0;
            }
            for (p, f) in bp.expand(spec.block_sizes()[b]).iter().zip(freq) {
                assert!((p - f).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn fits_are_reproducible() {
        let model = section52_model();
        let (data, _) = gen_cmm(&model, 200, 8);
        let enc = encoded(&data, model.spec.partition());
        let s = EmSettings { starts: 4, ..Default::default() };
        let a = em_fit(&enc, &model.spec, &s, Seed(11)).unwrap();
        let b = em_fit(&enc, &model.spec, &s, Seed(11)).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.loglik.to_bits(), b.loglik.to_bits());
    }

    #[test]
    fn empty_class_is_reported() {
        let stats = SufficientStats { nk: vec![3.0, 0.0], counts: vec![vec![vec![2.0, 1.0]], vec![vec![0.0, 0.0]]] };
        let spec = ModelSpec::with_uniform_modes(2, BlockPartition::singletons(1), 1, &[2]).unwrap();
        assert!(matches!(m_step(&stats, &spec), Err(CmmError::EmptyClass { class: 1 })));
    }
}
