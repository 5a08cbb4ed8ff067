use cmm_core::bayes::bic;
use cmm_core::em::{em_fit, map_labels, EmFit};
use cmm_core::search::{select_model, SelectConfig};
use cmm_core::{CategoricalDataset, CmmModel, EncodedData, ModelSpec, Seed};

use super::{read_data, report, write_partition};
use crate::document::{partition_from_names, FitInfo, ModelDocument};
use crate::error::{CliError, CliResult};
use crate::{Common, FitArgs};

pub fn run(common: &Common, args: &FitArgs) -> CliResult<()> {
    let data = read_data(&args.data)?;
    let settings = args.em.settings()?;
    let seed = Seed(common.seed);
    let (spec, fit) = match (&args.spec, args.classes) {
        (Some(path), _) => {
            let spec = spec_from_document(&ModelDocument::load(path)?, &data)?;
            let fit = estimate(&data, &spec, &settings, seed)?;
            (spec, fit)
        }
        (None, Some(g)) if args.cim => {
            if g == 0 {
                return Err(CliError::usage("--classes must be at least 1"));
            }
            let spec = ModelSpec::conditional_independence(g, &data.schema().n_levels())?;
            let fit = estimate(&data, &spec, &settings, seed)?;
            (spec, fit)
        }
        (None, Some(g)) => {
            if g == 0 {
                return Err(CliError::usage("--classes must be at least 1"));
            }
            let config = SelectConfig {
                g_min: g,
                g_max: g,
                chains: args.chain.chains,
                chain: args.chain.config()?,
                em: settings,
                with_cim: false,
            };
            let mut sel = select_model(&data, &config, seed)?;
            let r = sel.results.swap_remove(0);
            (r.spec, r.fit)
        }
        (None, None) => return Err(CliError::usage("either --spec or --classes is required")),
    };
    let g = spec.g();
    let labels = map_labels(&fit.responsibilities, g);
    let info = FitInfo {
        loglik: Some(fit.loglik),
        bic: Some(bic(fit.loglik, spec.nu(), data.n())),
        n: Some(data.n()),
        seed: Some(common.seed),
    };
    let model = CmmModel::new(data.schema().clone(), spec, fit.params)?;
    ModelDocument::from_model(&model, &info).save(&common.out_dir.join("model.json"))?;
    write_partition(&common.out_dir.join("partition.csv"), &labels, &fit.responsibilities, g)?;
    print!("{}", report(&model, &info));
    if !fit.converged {
        println!("warning: EM stopped at the iteration limit");
    }
    Ok(())
}

fn estimate(
    data: &CategoricalDataset,
    spec: &ModelSpec,
    settings: &cmm_core::em::EmSettings,
    seed: Seed,
) -> CliResult<EmFit> {
    let enc = EncodedData::new(data, spec.partition())?;
    Ok(em_fit(&enc, spec, settings, seed.derive("fit", 0))?)
}

/// The structure of a model file applied to the variables of `data`.
pub fn spec_from_document(doc: &ModelDocument, data: &CategoricalDataset) -> CliResult<ModelSpec> {
    let (partition, order) = partition_from_names(data.schema(), &doc.sigma)?;
    if doc.modes.len() != doc.g || doc.modes.iter().any(|r| r.len() != order.len()) {
        return Err(CliError::structure("mode matrix does not match g and sigma"));
    }
    let modes = doc.modes.iter().map(|r| order.iter().map(|&j| r[j]).collect()).collect();
    Ok(ModelSpec::new(doc.g, partition, modes, &data.schema().n_levels())?)
}
