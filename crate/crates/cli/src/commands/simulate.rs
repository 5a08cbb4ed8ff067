use std::path::Path;

use cmm_core::sim::{gen_cmm, gen_misspecified, gen_modes_multinomial, section52_model};
use cmm_core::{BlockParams, BlockPartition, CategoricalDataset, CmmModel, MixtureParams, ModelSpec, Schema, Seed};

use super::csv_writer;
use crate::document::{FitInfo, ModelDocument, TruthDocument};
use crate::error::{CliError, CliResult};
use crate::{Common, Design, SimulateArgs};

pub fn run(common: &Common, args: &SimulateArgs) -> CliResult<()> {
    if args.n == 0 || args.reps == 0 {
        return Err(CliError::usage("--n and --reps must be at least 1"));
    }
    let cmm_truth = match args.design {
        Design::Cmm => Some(match &args.model {
            Some(path) => ModelDocument::load(path)?.to_model()?,
            None => section52_model(),
        }),
        Design::Modes => Some(modes_model(args.s, args.r)?),
        Design::Misspec => None,
    };
    let truth = match &cmm_truth {
        Some(m) => TruthDocument::Cmm { model: ModelDocument::from_model(m, &FitInfo::default()) },
        None => TruthDocument::Misspecified { lambda: args.lambda },
    };
    for rep in 0..args.reps {
        let seed = Seed(common.seed).derive("simulate", rep as u64).0;
        let (data, labels) = match args.design {
            Design::Cmm => gen_cmm(cmm_truth.as_ref().expect("cmm truth"), args.n, seed),
            Design::Modes => (gen_modes_multinomial(args.n, args.s, args.r, seed)?, vec![0; args.n]),
            Design::Misspec => gen_misspecified(args.n, args.lambda, seed)?,
        };
        let dir = common.out_dir.join(format!("rep_{:03}", rep + 1));
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        write_data(&dir.join("data.csv"), &data)?;
        write_labels(&dir.join("labels.csv"), &labels)?;
        truth.save(&dir.join("truth.json"))?;
    }
    println!("wrote {} replicate(s) of n = {} to {}", args.reps, args.n, common.out_dir.display());
    Ok(())
}

/// The three-mode multinomial as a one-class model with three modes.
pub fn modes_model(s: usize, r: f64) -> CliResult<CmmModel> {
    let probs = cmm_core::sim::modes_probabilities(s, r)?;
    let schema = Schema::uniform(1, s).renamed(&["X"]);
    let spec = ModelSpec::with_uniform_modes(1, BlockPartition::singletons(1), 3, &[s])?;
    let rest: f64 = probs[3..].iter().sum();
    let params = MixtureParams { pi: vec![1.0], blocks: vec![vec![BlockParams { delta: vec![0, 1, 2], a: vec![r, r, r, rest] }]] };
    Ok(CmmModel::new(schema, spec, params)?)
}

fn write_data(path: &Path, data: &CategoricalDataset) -> CliResult<()> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(data.write_csv(std::io::BufWriter::new(file))?)
}

fn write_labels(path: &Path, labels: &[usize]) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["row", "label"])?;
    for (i, l) in labels.iter().enumerate() {
        w.write_record([(i + 1).to_string(), (l + 1).to_string()])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
