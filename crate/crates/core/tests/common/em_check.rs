//! Random EM instances and the per-iteration checks run on them.

use cmm_core::em::{e_step_with_loglik, m_step, random_responsibilities};
use cmm_core::model::{BlockPartition, ModelSpec};
use cmm_core::rng::Seed;
use cmm_core::stats::SufficientStats;
use cmm_core::{CategoricalDataset, EncodedData, Schema};
use rand::Rng;

/// A random structure and a dataset with some dependence inside blocks.
pub fn random_instance(seed: u64) -> (EncodedData, ModelSpec) {
    let mut rng = Seed(seed).derive("instance", 0).rng();
    let b = rng.random_range(2..=5);
    let n_levels: Vec<usize> = (0..b).map(|_| rng.random_range(2..=4)).collect();
    let g = rng.random_range(1..=3);
    let assign: Vec<usize> = (0..b).map(|_| rng.random_range(0..3)).collect();
    let partition = BlockPartition::from_assignment(&assign);
    let sizes: Vec<usize> =
        partition.blocks().iter().map(|bl| bl.iter().map(|&v| n_levels[v]).product()).collect();
    let modes = (0..g).map(|_| sizes.iter().map(|&m| rng.random_range(1..m)).collect()).collect();
    let spec = ModelSpec::new(g, partition.clone(), modes, &n_levels).unwrap();
    let n = rng.random_range(g.max(5)..=120);
    let schema = Schema::new(
        n_levels.iter().enumerate().map(|(i, &m)| cmm_core::Variable::numbered(format!("V{}", i + 1), m)).collect(),
    )
    .unwrap();
    let rows: Vec<Vec<u32>> = (0..n)
        .map(|_| {
            let base = rng.random_range(0..4u32);
            n_levels
                .iter()
                .map(|&m| if rng.random::<f64>() < 0.5 { base % m as u32 } else { rng.random_range(0..m as u32) })
                .collect()
        })
        .collect();
    let data = CategoricalDataset::from_rows(schema, &rows).unwrap();
    (EncodedData::new(&data, &partition).unwrap(), spec)
}

/// Runs 40 EM iterations from a random start, checking that every M-step
/// is valid and the log-likelihood never drops by more than `1e-10`.
/// Returns `Ok(false)` when a class empties before the end.
pub fn check_instance(seed: u64) -> Result<bool, String> {
    let (enc, spec) = random_instance(seed);
    let g = spec.g();
    let mut rng = Seed(seed).derive("init", 0).rng();
    let mut resp = random_responsibilities(enc.n(), g, &mut rng);
    let mut prev = f64::NEG_INFINITY;
    for it in 0..40 {
        let stats = SufficientStats::from_responsibilities(&enc, &resp, g).map_err(|e| e.to_string())?;
        let params = match m_step(&stats, &spec) {
            Ok(p) => p,
            Err(cmm_core::CmmError::EmptyClass { .. }) => return Ok(false),
            Err(e) => return Err(format!("instance {seed}: {e}")),
        };
        params.validate(&spec).map_err(|e| format!("instance {seed} iteration {it}: {e}"))?;
        let (next, ll) = e_step_with_loglik(&enc, &params, &spec);
        if ll < prev - 1e-10 {
            return Err(format!("instance {seed} iteration {it}: {prev} -> {ll}"));
        }
        if next.chunks_exact(g).any(|row| (row.iter().sum::<f64>() - 1.0).abs() > 1e-12) {
            return Err(format!("instance {seed} iteration {it}: responsibilities do not sum to one"));
        }
        prev = ll;
        resp = next;
    }
    Ok(true)
}
