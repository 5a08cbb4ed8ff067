//! Generators for the three simulation designs: a single multinomial with
//! three modes, data drawn from a CMM, and a misspecified mixture with
//! pairwise couplings that differ between classes.

use rand::Rng;

use crate::data::{CategoricalDataset, Schema};
use crate::encode::decode_crossing;
use crate::error::{CmmError, Result};
use crate::eval::JointModel;
use crate::model::{BlockParams, BlockPartition, CmmModel, MixtureParams, ModelSpec};
use crate::rng::Seed;

/// Index drawn from a probability vector by inversion.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// `M_s(r, r, r, (1−3r)/(s−3), …)`: three leading modes of mass `r`.
pub fn modes_probabilities(s: usize, r: f64) -> Result<Vec<f64>> {
    if s <= 3 {
        return Err(CmmError::Domain(format!("need more than 3 modalities, got {s}")));
    }
    let rest = (1.0 - 3.0 * r) / (s - 3) as f64;
    if !(r > 0.0 && 3.0 * r < 1.0) || r <= rest {
        return Err(CmmError::Domain(format!(
            "r = {r} must satisfy 0 < 3r < 1 and r > (1 − 3r)/(s − 3) = {rest}"
        )));
    }
    let mut p = vec![rest; s];
    p[..3].fill(r);
    Ok(p)
}

/// i.i.d. sample of one variable `X` with `s` modalities.
pub fn gen_modes_multinomial(n: usize, s: usize, r: f64, seed: u64) -> Result<CategoricalDataset> {
    let probs = modes_probabilities(s, r)?;
    let mut rng = Seed(seed).rng();
    let cells = (0..n).map(|_| sample_categorical(&probs, &mut rng) as u32).collect();
    CategoricalDataset::new(Schema::uniform(1, s).renamed(&["X"]), cells)
}

/// Counts of the modalities only, for the mode-number benchmark.
pub fn modes_multinomial_counts(n: usize, s: usize, r: f64, seed: Seed) -> Result<Vec<f64>> {
    let probs = modes_probabilities(s, r)?;
    let mut rng = seed.rng();
    let mut counts = vec![0.0; s];
    for _ in 0..n {
        counts[sample_categorical(&probs, &mut rng)] += 1.0;
    }
    Ok(counts)
}

/// The two-class design on six ternary variables: blocks `{1,2}{3,4}{5,6}`,
/// two modes per block of mass 0.4 each, equal proportions. Class 1 puts
/// its modes on crossings 0 and 1 of every block, class 2 on crossings 7
/// and 8.
pub fn section52_truth() -> (ModelSpec, MixtureParams) {
    let partition = BlockPartition::new(vec![vec![0, 1], vec![2, 3], vec![4, 5]], 6)
        .expect("fixed partition is valid");
    let spec = ModelSpec::with_uniform_modes(2, partition, 2, &[3; 6]).expect("fixed spec");
    let class = |d: [u32; 2]| vec![BlockParams { delta: d.to_vec(), a: vec![0.4, 0.4, 0.2] }; 3];
    let params = MixtureParams { pi: vec![0.5, 0.5], blocks: vec![class([0, 1]), class([7, 8])] };
    (spec, params)
}

pub fn section52_model() -> CmmModel {
    let (spec, params) = section52_truth();
    CmmModel::new(Schema::uniform(6, 3), spec, params).expect("fixed model is valid")
}

/// Draws `n` individuals from a CMM; returns the data and the true classes.
pub fn gen_cmm(model: &CmmModel, n: usize, seed: u64) -> (CategoricalDataset, Vec<usize>) {
    let mut rng = Seed(seed).rng();
    let n_levels = model.schema.n_levels();
    let b = model.schema.n_vars();
    let alphas: Vec<Vec<Vec<f64>>> = model
        .params
        .blocks
        .iter()
        .map(|row| row.iter().zip(model.spec.block_sizes()).map(|(bp, &m)| bp.expand(m)).collect())
        .collect();
    let radices: Vec<Vec<usize>> = model
        .spec
        .partition()
        .blocks()
        .iter()
        .map(|blk| blk.iter().map(|&v| n_levels[v]).collect())
        .collect();
    let mut cells = vec![0u32; n * b];
    let mut labels = Vec::with_capacity(n);
    for row in cells.chunks_exact_mut(b) {
        let k = sample_categorical(&model.params.pi, &mut rng);
        labels.push(k);
        for (j, block) in model.spec.partition().blocks().iter().enumerate() {
            let c = sample_categorical(&alphas[k][j], &mut rng) as u32;
            for (&v, x) in block.iter().zip(decode_crossing(c, &radices[j])) {
                row[v] = x;
            }
        }
    }
    let data = CategoricalDataset::new(model.schema.clone(), cells).expect("generated cells are in range");
    (data, labels)
}

/// Bi-component mixture on six ternary variables with pairwise coupling of
/// strength `λ`: class 1 couples (1,2), (3,4), (5,6); class 2 couples
/// (2,3), (4,5) and leaves 1 and 6 free. Within a coupled pair the second
/// variable copies the first with probability `λ`, otherwise it is uniform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Misspecified {
    pub lambda: f64,
}

impl Misspecified {
    pub const PAIRS: [&'static [(usize, usize)]; 2] = [&[(0, 1), (2, 3), (4, 5)], &[(1, 2), (3, 4)]];

    pub fn new(lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(CmmError::Domain(format!("lambda = {lambda} outside [0, 1]")));
        }
        Ok(Self { lambda })
    }

    fn class_prob(&self, k: usize, x: &[u32]) -> f64 {
        let mut p = 1.0;
        let mut coupled = [false; 6];
        for &(a, b) in Self::PAIRS[k] {
            coupled[a] = true;
            coupled[b] = true;
            let same = if x[a] == x[b] { 1.0 } else { 0.0 };
            p *= (1.0 / 3.0) * (self.lambda * same + (1.0 - self.lambda) / 3.0);
        }
        for c in coupled {
            if !c {
                p /= 3.0;
            }
        }
        p
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, [u32; 6]) {
        let k = usize::from(rng.random::<f64>() >= 0.5);
        let mut x = [0u32; 6];
        let mut coupled = [false; 6];
        for &(a, b) in Self::PAIRS[k] {
            coupled[a] = true;
            coupled[b] = true;
            x[a] = rng.random_range(0..3);
            x[b] = if rng.random::<f64>() < self.lambda { x[a] } else { rng.random_range(0..3) };
        }
        for v in 0..6 {
            if !coupled[v] {
                x[v] = rng.random_range(0..3);
            }
        }
        (k, x)
    }
}

impl JointModel for Misspecified {
    fn schema(&self) -> &Schema {
        static SCHEMA: std::sync::OnceLock<Schema> = std::sync::OnceLock::new();
        SCHEMA.get_or_init(|| Schema::uniform(6, 3))
    }

    fn log_prob(&self, cells: &[u32]) -> f64 {
        (0.5 * self.class_prob(0, cells) + 0.5 * self.class_prob(1, cells)).ln()
    }

    fn sample_cells(&self, rng: &mut dyn rand::RngCore) -> Vec<u32> {
        self.sample(rng).1.to_vec()
    }
}

pub fn gen_misspecified(n: usize, lambda: f64, seed: u64) -> Result<(CategoricalDataset, Vec<usize>)> {
    let model = Misspecified::new(lambda)?;
    let mut rng = Seed(seed).rng();
    let mut cells = Vec::with_capacity(n * 6);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let (k, x) = model.sample(&mut rng);
        labels.push(k);
        cells.extend_from_slice(&x);
    }
    Ok((CategoricalDataset::new(Schema::uniform(6, 3), cells)?, labels))
}
