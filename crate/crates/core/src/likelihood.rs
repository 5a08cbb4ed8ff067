//! Component and mixture densities, log-likelihoods and the κ/ρ summaries.
//!
//! Everything is evaluated in log space.

use serde::{Deserialize, Serialize};

use crate::encode::EncodedData;
use crate::model::{BlockParams, MixtureParams, ModelSpec};

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `ln p(x; α_k)` for an individual given by its block crossings.
pub fn component_logpdf(crossings: &[u32], class_params: &[BlockParams], spec: &ModelSpec) -> f64 {
    crossings
        .iter()
        .zip(class_params)
        .zip(spec.block_sizes())
        .map(|((&c, bp), &m)| match bp.delta.iter().position(|&d| d == c) {
            Some(h) => bp.a[h].ln(),
            None => bp.non_mode_prob(m).ln(),
        })
        .sum()
}

/// `ln Σ_k π_k p(x; α_k)`.
pub fn mixture_logpdf(crossings: &[u32], params: &MixtureParams, spec: &ModelSpec) -> f64 {
    let terms: Vec<f64> = params
        .pi
        .iter()
        .zip(&params.blocks)
        .map(|(&p, row)| p.ln() + component_logpdf(crossings, row, spec))
        .collect();
    log_sum_exp(&terms)
}

/// Precomputed `ln π_k` and `ln α_kjh` tables for repeated evaluation.
#[derive(Debug, Clone)]
pub struct LogTables {
    pub ln_pi: Vec<f64>,
    pub ln_alpha: Vec<Vec<Vec<f64>>>,
}

impl LogTables {
    pub fn new(params: &MixtureParams, spec: &ModelSpec) -> Self {
        Self {
            ln_pi: params.pi.iter().map(|p| p.ln()).collect(),
            ln_alpha: params.log_alpha(spec),
        }
    }

    pub fn g(&self) -> usize {
        self.ln_pi.len()
    }

    /// `ln π_k + ln p(x_i; α_k)` for every class, written into `out`.
    pub fn joint_into(&self, data: &EncodedData, i: usize, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = self.ln_pi[k];
            for (j, table) in self.ln_alpha[k].iter().enumerate() {
                acc += table[data.crossing(i, j) as usize];
            }
            *o = acc;
        }
    }

    pub fn mixture_ln(&self, data: &EncodedData, i: usize, buf: &mut [f64]) -> f64 {
        self.joint_into(data, i, buf);
        log_sum_exp(buf)
    }
}

pub fn observed_loglik(data: &EncodedData, params: &MixtureParams, spec: &ModelSpec) -> f64 {
    let tables = LogTables::new(params, spec);
    let mut buf = vec![0.0; spec.g()];
    (0..data.n()).map(|i| tables.mixture_ln(data, i, &mut buf)).sum()
}

/// `Σ_i ln(π_{z_i} p(x_i; α_{z_i}))` under hard labels.
pub fn complete_loglik(
    data: &EncodedData,
    labels: &[usize],
    params: &MixtureParams,
    spec: &ModelSpec,
) -> f64 {
    let tables = LogTables::new(params, spec);
    labels
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            tables.ln_pi[k]
                + tables.ln_alpha[k]
                    .iter()
                    .enumerate()
                    .map(|(j, t)| t[data.crossing(i, j) as usize])
                    .sum::<f64>()
        })
        .sum()
}

/// Complexity `κ = ℓ/(m − 1)` and strength `ρ = Σ mode masses` of a block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub kappa: f64,
    pub rho: f64,
}

pub fn summaries(params: &MixtureParams, spec: &ModelSpec) -> Vec<Vec<BlockSummary>> {
    params
        .blocks
        .iter()
        .map(|row| {
            row.iter()
                .zip(spec.block_sizes())
                .map(|(bp, &m)| BlockSummary {
                    kappa: bp.n_modes() as f64 / (m - 1) as f64,
                    rho: bp.a[..bp.n_modes()].iter().sum(),
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CategoricalDataset, Schema};
    use crate::model::BlockPartition;
    use crate::sim::section52_truth;

    fn blocks_of(p: &ModelSpec) -> Vec<usize> {
        p.block_sizes().to_vec()
    }

    #[test]
    fn uniform_binary_block() {
        let spec = ModelSpec::with_uniform_modes(1, BlockPartition::singletons(1), 1, &[2]).unwrap();
        let bp = vec![BlockParams { delta: vec![0], a: vec![0.5, 0.5] }];
        for c in 0..2 {
            assert!((component_logpdf(&[c], &bp, &spec) - 0.5f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn mode_and_non_mode_crossings() {
        let (spec, params) = section52_truth();
        assert_eq!(blocks_of(&spec), vec![9, 9, 9]);
        let lp = component_logpdf(&[0, 1, 0], &params.blocks[0], &spec);
        assert!((lp.exp() - 0.064).abs() < 1e-15);
        let lp = component_logpdf(&[0, 1, 4], &params.blocks[0], &spec);
        assert!((lp.exp() - 0.16 * 0.2 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn component_pdf_sums_to_one_over_joint_space() {
        let (spec, params) = section52_truth();
        for row in &params.blocks {
            let mut total = 0.0;
            for c0 in 0..9 {
                for c1 in 0..9 {
                    for c2 in 0..9 {
                        total += component_logpdf(&[c0, c1, c2], row, &spec).exp();
                    }
                }
            }
            assert!((total - 1.0).abs() < 1e-10, "{total}");
        }
    }

    #[test]
    fn mixture_matches_explicit_two_term_sum() {
        let (spec, params) = section52_truth();
        for x in [[0u32, 1, 8], [7, 8, 8], [3, 4, 5]] {
            let direct = params.pi[0] * component_logpdf(&x, &params.blocks[0], &spec).exp()
                + params.pi[1] * component_logpdf(&x, &params.blocks[1], &spec).exp();
            assert!((mixture_logpdf(&x, &params, &spec) - direct.ln()).abs() < 1e-13);
        }
    }

    #[test]
    fn mixture_collapses_to_component() {
        let (spec, params) = section52_truth();
        let single_spec = ModelSpec::new(1, spec.partition().clone(), vec![spec.modes()[0].clone()], &[3; 6]).unwrap();
        let single = MixtureParams { pi: vec![1.0], blocks: vec![params.blocks[0].clone()] };
        let x = [0u32, 4, 8];
        assert_eq!(mixture_logpdf(&x, &single, &single_spec), component_logpdf(&x, &single.blocks[0], &single_spec));
        let twin = MixtureParams { pi: vec![0.5, 0.5], blocks: vec![params.blocks[0].clone(); 2] };
        let c = component_logpdf(&x, &twin.blocks[0], &spec);
        assert!((mixture_logpdf(&x, &twin, &spec) - c).abs() < 1e-14);
    }

    #[test]
    fn loglik_additivity() {
        let (spec, params) = section52_truth();
        let schema = Schema::uniform(6, 3);
        let empty = CategoricalDataset::new(schema.clone(), vec![]).unwrap();
        let enc = EncodedData::new(&empty, spec.partition()).unwrap();
        assert_eq!(observed_loglik(&enc, &params, &spec), 0.0);
        assert_eq!(complete_loglik(&enc, &[], &params, &spec), 0.0);

        let row = vec![1u32, 0, 2, 2, 0, 1];
        let one = CategoricalDataset::from_rows(schema.clone(), &[row.clone()]).unwrap();
        let enc1 = EncodedData::new(&one, spec.partition()).unwrap();
        let x: Vec<u32> = (0..3).map(|j| enc1.crossing(0, j)).collect();
        let single = mixture_logpdf(&x, &params, &spec);
        assert!((observed_loglik(&enc1, &params, &spec) - single).abs() < 1e-14);

        let many = CategoricalDataset::from_rows(schema, &vec![row; 7]).unwrap();
        let enc7 = EncodedData::new(&many, spec.partition()).unwrap();
        assert!((observed_loglik(&enc7, &params, &spec) - 7.0 * single).abs() < 1e-12);
        let c1 = complete_loglik(&enc1, &[1], &params, &spec);
        assert!((complete_loglik(&enc7, &[1; 7], &params, &spec) - 7.0 * c1).abs() < 1e-12);
        assert!((c1 - (0.5f64.ln() + component_logpdf(&x, &params.blocks[1], &spec))).abs() < 1e-14);
    }

    #[test]
    fn kappa_rho() {
        let (spec, params) = section52_truth();
        for row in summaries(&params, &spec) {
            for s in row {
                assert!((s.rho - 0.8).abs() < 1e-15);
                assert!((s.kappa - 0.25).abs() < 1e-15);
            }
        }
        let spec = ModelSpec::with_uniform_modes(1, BlockPartition::singletons(1), 2, &[3]).unwrap();
        let p = MixtureParams { pi: vec![1.0], blocks: vec![vec![BlockParams { delta: vec![0, 1], a: vec![0.5, 0.3, 0.2] }]] };
        assert_eq!(summaries(&p, &spec)[0][0].kappa, 1.0);
        // a four-modality variable with two modes
        let spec = ModelSpec::with_uniform_modes(1, BlockPartition::singletons(1), 2, &[4]).unwrap();
        let p = MixtureParams { pi: vec![1.0], blocks: vec![vec![BlockParams { delta: vec![0, 1], a: vec![0.5, 0.3, 0.2] }]] };
        assert!((summaries(&p, &spec)[0][0].kappa - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn cim_is_a_special_case() {
        // singleton blocks with ℓ = m − 1 reproduce any unconstrained α exactly
        let levels = [3usize, 2, 4];
        let spec = ModelSpec::conditional_independence(2, &levels).unwrap();
        let alphas: Vec<Vec<Vec<f64>>> = vec![
            vec![vec![0.2, 0.5, 0.3], vec![0.9, 0.1], vec![0.1, 0.2, 0.3, 0.4]],
            vec![vec![0.6, 0.1, 0.3], vec![0.35, 0.65], vec![0.25, 0.25, 0.4, 0.1]],
        ];
        let params = MixtureParams {
            pi: vec![0.3, 0.7],
            blocks: alphas
                .iter()
                .map(|row| row.iter().zip(&levels).map(|(a, &m)| BlockParams::from_alpha(a, m - 1).unwrap()).collect())
                .collect(),
        };
        for x0 in 0..3u32 {
            for x1 in 0..2u32 {
                for x2 in 0..4u32 {
                    let x = [x0, x1, x2];
                    let direct: f64 = (0..2)
                        .map(|k| [0.3, 0.7][k] * (0..3).map(|b| alphas[k][b][x[b] as usize]).product::<f64>())
                        .sum();
                    assert!((mixture_logpdf(&x, &params, &spec) - direct.ln()).abs() < 1e-14);
                }
            }
        }
    }
}
