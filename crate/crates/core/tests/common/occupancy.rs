//! Exact stationary distribution of the one-class structure chain on three
//! binary variables, and the chain's distance from it.

use std::collections::BTreeMap;

use cmm_core::bayes::log_integrated_complete;
use cmm_core::model::{BlockPartition, ModelSpec};
use cmm_core::rng::Seed;
use cmm_core::search::{run_chain, ChainConfig, ModeSweep, Structure};
use cmm_core::sim::sample_categorical;
use cmm_core::stats::SufficientStats;
use cmm_core::{CategoricalDataset, EncodedData, Schema};
use rand::Rng;

pub fn dataset(seed: u64) -> CategoricalDataset {
    // correlated pair (1,2), independent third variable
    let mut rng = Seed(seed).rng();
    let rows: Vec<Vec<u32>> = (0..50)
        .map(|_| {
            let a = sample_categorical(&[0.6, 0.4], &mut rng) as u32;
            let b = if rng.random::<f64>() < 0.7 { a } else { 1 - a };
            vec![a, b, sample_categorical(&[0.5, 0.5], &mut rng) as u32]
        })
        .collect();
    CategoricalDataset::from_rows(Schema::uniform(3, 2), &rows).unwrap()
}

pub fn all_partitions() -> Vec<BlockPartition> {
    let raw = vec![
        vec![vec![0], vec![1], vec![2]],
        vec![vec![0, 1], vec![2]],
        vec![vec![0, 2], vec![1]],
        vec![vec![0], vec![1, 2]],
        vec![vec![0, 1, 2]],
    ];
    raw.into_iter().map(|b| BlockPartition::new(b, 3).unwrap()).collect()
}

pub fn exact_distribution(data: &CategoricalDataset) -> BTreeMap<Structure, f64> {
    let mut logs = BTreeMap::new();
    for p in all_partitions() {
        let enc = EncodedData::new(data, &p).unwrap();
        let stats = SufficientStats::from_labels(&enc, &vec![0; data.n()], 1).unwrap();
        let sizes = enc.block_sizes();
        // every mode-number vector of this partition
        let mut grid: Vec<Vec<usize>> = vec![vec![]];
        for &m in &sizes {
            grid = grid.into_iter().flat_map(|v| (1..m).map(move |l| [v.clone(), vec![l]].concat())).collect();
        }
        for modes in grid {
            let spec = ModelSpec::new(1, p.clone(), vec![modes.clone()], &[2, 2, 2]).unwrap();
            let s = Structure { partition: p.clone(), modes: vec![modes] };
            logs.insert(s, log_integrated_complete(&stats, &spec).unwrap());
        }
    }
    let max = logs.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logs.values().map(|l| (l - max).exp()).sum();
    logs.into_iter().map(|(s, l)| (s, (l - max).exp() / z)).collect()
}

pub fn occupancy_tv(rule: ModeSweep, data_seed: u64, chain_seed: u64, iters: usize) -> f64 {
    let data = dataset(data_seed);
    let exact = exact_distribution(&data);
    assert_eq!(exact.len(), 17);
    let cfg = ChainConfig { iters, burnin: 1000, mode_sweep: rule, record_trace: false, ..Default::default() };
    let res = run_chain(&data, 1, &cfg, None, Seed(chain_seed)).unwrap();
    let total = res.tally.total() as f64;
    0.5 * exact
        .iter()
        .map(|(s, p)| {
            let f = res.tally.0.get(s).map_or(0.0, |e| e.visits as f64 / total);
            (f - p).abs()
        })
        .sum::<f64>()
}
