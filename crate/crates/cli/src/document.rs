//! On-disk JSON documents: fitted models and simulation truths.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use cmm_core::likelihood::{summaries, BlockSummary};
use cmm_core::{BlockParams, BlockPartition, CmmModel, MixtureParams, ModelSpec, Schema, Variable};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Fit statistics stored next to the parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    pub loglik: Option<f64>,
    pub bic: Option<f64>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDocument {
    /// Crossing index of each mode, by decreasing mass.
    pub delta: Vec<u32>,
    /// Mode masses, then the total non-mode mass.
    pub a: Vec<f64>,
    /// Level labels of each mode, for reading; ignored on load.
    #[serde(default)]
    pub mode_levels: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub software_version: String,
    pub variables: Vec<Variable>,
    pub g: usize,
    /// Blocks as lists of variable names.
    pub sigma: Vec<Vec<String>>,
    /// Mode numbers `[class][block]`.
    pub modes: Vec<Vec<usize>>,
    pub pi: Vec<f64>,
    /// Parameters `[class][block]`.
    pub blocks: Vec<Vec<BlockDocument>>,
    pub nu: usize,
    pub loglik: Option<f64>,
    pub bic: Option<f64>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    /// Complexity and strength `[class][block]`; ignored on load.
    #[serde(default)]
    pub summaries: Vec<Vec<BlockSummary>>,
}

impl ModelDocument {
    pub fn from_model(model: &CmmModel, info: &FitInfo) -> Self {
        let names = model.schema.names();
        let n_levels = model.schema.n_levels();
        let blocks = model
            .params
            .blocks
            .iter()
            .map(|row| {
                row.iter()
                    .zip(model.spec.partition().blocks())
                    .map(|(bp, block)| BlockDocument {
                        delta: bp.delta.clone(),
                        a: bp.a.clone(),
                        mode_levels: bp
                            .delta
                            .iter()
                            .map(|&c| {
                                let radices: Vec<usize> = block.iter().map(|&b| n_levels[b]).collect();
                                cmm_core::encode::decode_crossing(c, &radices)
                                    .into_iter()
                                    .zip(block)
                                    .map(|(v, &b)| model.schema.variables[b].levels[v as usize].clone())
                                    .collect()
                            })
                            .collect(),
                    })
                    .collect()
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            software_version: env!("CARGO_PKG_VERSION").to_owned(),
            variables: model.schema.variables.clone(),
            g: model.spec.g(),
            sigma: model
                .spec
                .partition()
                .blocks()
                .iter()
                .map(|b| b.iter().map(|&v| names[v].to_owned()).collect())
                .collect(),
            modes: model.spec.modes().to_vec(),
            pi: model.params.pi.clone(),
            blocks,
            nu: model.spec.nu(),
            loglik: info.loglik,
            bic: info.bic,
            n: info.n,
            seed: info.seed,
            summaries: summaries(&model.params, &model.spec),
        }
    }

    pub fn info(&self) -> FitInfo {
        FitInfo { loglik: self.loglik, bic: self.bic, n: self.n, seed: self.seed }
    }

    /// Rebuilds and validates the model. Blocks may be listed in any order.
    pub fn to_model(&self) -> CliResult<CmmModel> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::data(format!(
                "unsupported model schema_version {} (expected {})",
                self.schema_version, SCHEMA_VERSION
            )));
        }
        let schema = Schema::new(self.variables.clone())?;
        let (partition, order) = partition_from_names(&schema, &self.sigma)?;
        let g = self.g;
        if self.modes.len() != g || self.blocks.len() != g || self.pi.len() != g {
            return Err(CliError::structure(format!("model lists {g} classes but rows do not match")));
        }
        let d = order.len();
        if self.modes.iter().any(|r| r.len() != d) || self.blocks.iter().any(|r| r.len() != d) {
            return Err(CliError::structure("mode or block rows do not match sigma"));
        }
        let modes: Vec<Vec<usize>> = self.modes.iter().map(|r| order.iter().map(|&j| r[j]).collect()).collect();
        let spec = ModelSpec::new(g, partition, modes, &schema.n_levels())?;
        let blocks = self
            .blocks
            .iter()
            .map(|r| order.iter().map(|&j| BlockParams { delta: r[j].delta.clone(), a: r[j].a.clone() }).collect())
            .collect();
        let params = MixtureParams { pi: self.pi.clone(), blocks };
        Ok(CmmModel::new(schema, spec, params)?)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        read_json(path)
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        write_json(path, self)
    }
}

/// Partition from blocks of variable names, plus for each canonical block
/// the index of the listed block it came from.
pub fn partition_from_names(schema: &Schema, sigma: &[Vec<String>]) -> CliResult<(BlockPartition, Vec<usize>)> {
    let blocks = sigma
        .iter()
        .map(|b| {
            b.iter()
                .map(|name| {
                    schema
                        .index_of(name)
                        .ok_or_else(|| CliError::structure(format!("unknown variable '{name}' in sigma")))
                })
                .collect::<CliResult<Vec<usize>>>()
        })
        .collect::<CliResult<Vec<_>>>()?;
    let partition = BlockPartition::new(blocks.clone(), schema.n_vars())?;
    let order = partition
        .blocks()
        .iter()
        .map(|canon| {
            blocks
                .iter()
                .position(|b| {
                    let mut s = b.clone();
                    s.sort_unstable();
                    &s == canon
                })
                .expect("partition blocks come from the listed blocks")
        })
        .collect();
    Ok((partition, order))
}

/// Generating process of a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TruthDocument {
    Cmm { model: ModelDocument },
    Misspecified { lambda: f64 },
}

impl TruthDocument {
    pub fn load(path: &Path) -> CliResult<Self> {
        read_json(path)
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        write_json(path, self)
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::data(e.to_string()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}
