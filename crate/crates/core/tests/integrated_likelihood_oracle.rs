//! The closed-form block evidence checked against direct numerical
//! integration of the likelihood over the stick-breaking box.

mod common {
    pub mod oracle;
    pub mod quad;
}

use cmm_core::bayes::{log_integrated_block, log_integrated_complete};
use cmm_core::model::{BlockPartition, ModelSpec};
use cmm_core::rng::Seed;
use cmm_core::sim::sample_categorical;
use cmm_core::stats::SufficientStats;
use cmm_core::{CategoricalDataset, EncodedData, Schema};
use common::oracle::{log_sum_exp, one_mode_oracle, top_index, two_mode_term, unique_top};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn one_mode_matches_quadrature_on_all_binary_count_pairs() {
    let mut worst: f64 = 0.0;
    for n1 in 0..=50u32 {
        for n2 in 0..n1.min(51 - n1) {
            let c = [f64::from(n1), f64::from(n2)];
            let rel = (log_integrated_block(&c, 1).unwrap() - one_mode_oracle(&c, 0)).exp_m1().abs();
            worst = worst.max(rel);
        }
    }
    assert!(worst <= 1e-8, "worst relative error {worst:e}");
}

#[test]
fn one_mode_matches_quadrature_for_three_and_four_crossings() {
    let mut rng = Seed(17).rng();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < 600 {
        let m = if checked % 2 == 0 { 3 } else { 4 };
        let n = rng.random_range(0..=50u32);
        let mut counts = vec![0.0; m];
        let weights: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        for _ in 0..n {
            counts[sample_categorical(&weights, &mut rng)] += 1.0;
        }
        if !unique_top(&counts) {
            continue;
        }
        let rel = (log_integrated_block(&counts, 1).unwrap() - one_mode_oracle(&counts, top_index(&counts)))
            .exp_m1()
            .abs();
        worst = worst.max(rel);
        checked += 1;
    }
    assert!(worst <= 1e-8, "worst relative error {worst:e}");
}

#[test]
fn empty_block_closed_form() {
    let c = [0.0; 3];
    let v = log_integrated_block(&c, 1).unwrap();
    assert!((v - one_mode_oracle(&c, 0)).abs() <= 1e-10);
}

#[test]
fn dominant_crossing_prefers_fewer_modes_under_both_computations() {
    let c = [50.0, 1.0, 1.0, 1.0];
    assert!(log_integrated_block(&c, 1).unwrap() > log_integrated_block(&c, 3).unwrap());
    assert!(one_mode_oracle(&c, 0) > log_integrated_block(&c, 3).unwrap());
}

#[test]
fn two_modes_lie_within_the_max_term_bound() {
    let mut rng = Seed(23).rng();
    for case in 0..40 {
        let m = 3 + case % 2;
        let n = rng.random_range(0..=40u32);
        let mut counts = vec![0.0; m];
        for _ in 0..n {
            counts[rng.random_range(0..m)] += 1.0;
        }
        let closed = log_integrated_block(&counts, 2).unwrap();
        let order = cmm_core::stats::decreasing_order(&counts);
        let top = two_mode_term(&counts, order[0], order[1]);
        assert!((closed - top).exp_m1().abs() <= 1e-8, "{counts:?}: {closed} vs {top}");
        let mut terms = Vec::new();
        for c1 in 0..m {
            for c2 in 0..m {
                if c1 != c2 {
                    terms.push(two_mode_term(&counts, c1, c2));
                }
            }
        }
        let exact = log_sum_exp(&terms);
        let gap = exact - closed;
        let bound = ((m * (m - 1)) as f64).ln();
        assert!(gap >= -1e-9 && gap <= bound + 1e-9, "{counts:?}: gap {gap}, bound {bound}");
    }
}

#[test]
fn two_separated_modes_rank_first() {
    let mut rng = Seed(29).rng();
    for case in 0..100 {
        let m = 3 + case % 2;
        // two heavy crossings over a flat floor
        let mut counts: Vec<f64> = vec![
            f64::from(rng.random_range(40..=100u32)),
            f64::from(rng.random_range(40..=100u32)),
        ];
        let base = rng.random_range(0..=8u32);
        counts.extend((2..m).map(|_| f64::from(base + rng.random_range(0..=1u32))));
        for i in (1..m).rev() {
            counts.swap(i, rng.random_range(0..=i));
        }
        let best = (1..m)
            .max_by(|&a, &b| {
                log_integrated_block(&counts, a).unwrap().total_cmp(&log_integrated_block(&counts, b).unwrap())
            })
            .unwrap();
        assert_eq!(best, 2, "case {case}: {counts:?}");
    }
}

#[test]
fn complete_evidence_on_a_tiny_instance() {
    let rows = vec![vec![0, 0], vec![0, 1], vec![0, 0], vec![1, 0]];
    let data = CategoricalDataset::from_rows(Schema::uniform(2, 2), &rows).unwrap();
    let p = BlockPartition::singletons(2);
    let enc = EncodedData::new(&data, &p).unwrap();
    let spec = ModelSpec::with_uniform_modes(1, p, 1, &[2, 2]).unwrap();
    let stats = SufficientStats::from_labels(&enc, &[0; 4], 1).unwrap();
    let got = log_integrated_complete(&stats, &spec).unwrap();
    let want = one_mode_oracle(&[3.0, 1.0], 0) + one_mode_oracle(&[3.0, 1.0], 0);
    assert!((got - want).abs() < 1e-10);

    let joint = BlockPartition::new(vec![vec![0, 1]], 2).unwrap();
    let enc = EncodedData::new(&data, &joint).unwrap();
    let stats = SufficientStats::from_labels(&enc, &[0; 4], 1).unwrap();
    let spec = ModelSpec::with_uniform_modes(1, joint, 1, &[2, 2]).unwrap();
    let got = log_integrated_complete(&stats, &spec).unwrap();
    let want = log_integrated_block(&stats.counts[0][0], 1).unwrap();
    assert_eq!(got, want);
}

proptest! {
    #[test]
    fn non_mode_counts_are_exchangeable(
        counts in prop::collection::vec(0u32..40, 3..8),
        l_frac in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let m = counts.len();
        let l = 1 + ((m - 1) as f64 * l_frac) as usize % (m - 1);
        let c: Vec<f64> = counts.iter().map(|&x| f64::from(x)).collect();
        let order = cmm_core::stats::decreasing_order(&c);
        let mut shuffled = c.clone();
        let mut tail: Vec<usize> = order[l..].to_vec();
        let mut rng = Seed(seed).rng();
        let original: Vec<f64> = tail.iter().map(|&i| c[i]).collect();
        for i in (1..tail.len()).rev() {
            tail.swap(i, rng.random_range(0..=i));
        }
        for (&i, &v) in tail.iter().zip(&original) {
            shuffled[i] = v;
        }
        let a = log_integrated_block(&c, l).unwrap();
        let b = log_integrated_block(&shuffled, l).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn complete_evidence_is_additive(
        c1 in prop::collection::vec(0u32..30, 2..6),
        c2 in prop::collection::vec(0u32..30, 2..6),
    ) {
        let a: Vec<f64> = c1.iter().map(|&x| f64::from(x)).collect();
        let b: Vec<f64> = c2.iter().map(|&x| f64::from(x)).collect();
        let stats = SufficientStats { nk: vec![0.0], counts: vec![vec![a.clone(), b.clone()]] };
        let p = BlockPartition::singletons(2);
        let spec = ModelSpec::with_uniform_modes(1, p, 1, &[a.len(), b.len()]).unwrap();
        let total = log_integrated_complete(&stats, &spec).unwrap();
        let parts = log_integrated_block(&a, 1).unwrap() + log_integrated_block(&b, 1).unwrap();
        prop_assert!((total - parts).abs() <= 1e-12 * total.abs().max(1.0));
    }
}
