use cmm_core::em::{cim_em_fit, e_step_with_loglik, map_labels};
use cmm_core::eval::{
    bootstrap_independence_test, confusion, cramers_v_by_class, identifiability_check, kl_divergence, BootstrapTest,
    Identifiability, JointModel, KlEstimate,
};
use cmm_core::likelihood::{summaries, BlockSummary};
use cmm_core::sim::Misspecified;
use cmm_core::{BlockPartition, CmmModel, EncodedData, Seed};
use serde::{Deserialize, Serialize};

use super::{read_data_with_schema, read_labels};
use crate::document::{write_json, ModelDocument, TruthDocument};
use crate::error::{CliError, CliResult};
use crate::{Common, EvaluateArgs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub n: usize,
    pub g: usize,
    pub loglik: f64,
    /// `KL(truth ‖ model)`, when a truth file is given.
    pub kl: Option<KlEstimate>,
    /// Class sizes under maximum posterior assignment.
    pub class_sizes: Vec<usize>,
    /// Rows: given labels; columns: fitted classes.
    pub confusion: Option<Vec<Vec<usize>>>,
    /// Cramér's V `[class][variable][variable]`.
    pub cramers_v: Vec<Vec<Vec<f64>>>,
    pub bootstrap: Option<BootstrapTest>,
    pub identifiability: Identifiability,
    pub summaries: Vec<Vec<BlockSummary>>,
}

pub fn run(common: &Common, args: &EvaluateArgs) -> CliResult<()> {
    let model = ModelDocument::load(&args.model)?.to_model()?;
    let data = read_data_with_schema(&args.data, &model.schema)?;
    let eval = evaluate(&model, &data, args, Seed(common.seed))?;
    write_json(&common.out_dir.join("evaluation.json"), &eval)?;
    println!("n: {}  g: {}  loglik: {:.4}", eval.n, eval.g, eval.loglik);
    if let Some(kl) = &eval.kl {
        match kl.std_error {
            Some(se) => println!("KL(truth || model): {:.6} (se {:.6})", kl.value, se),
            None => println!("KL(truth || model): {:.6}", kl.value),
        }
    }
    if let Some(b) = &eval.bootstrap {
        println!("independence test: max V = {:.4}, p = {:.4} ({} replicates)", b.statistic, b.p_value, b.reps);
    }
    match &eval.identifiability {
        Identifiability::Identifiable { .. } => println!("identifiability: identifiable"),
        Identifiability::Unknown { reason } => println!("identifiability: unknown ({reason})"),
    }
    Ok(())
}

pub fn evaluate(
    model: &CmmModel,
    data: &cmm_core::CategoricalDataset,
    args: &EvaluateArgs,
    seed: Seed,
) -> CliResult<Evaluation> {
    let g = model.spec.g();
    let enc = EncodedData::new(data, model.spec.partition())?;
    let (resp, loglik) = e_step_with_loglik(&enc, &model.params, &model.spec);
    let labels = map_labels(&resp, g);
    let mut class_sizes = vec![0; g];
    for &l in &labels {
        class_sizes[l] += 1;
    }

    let kl = match &args.truth {
        Some(path) => {
            let est = match TruthDocument::load(path)? {
                TruthDocument::Cmm { model: doc } => kl_divergence(&doc.to_model()?, model, seed)?,
                TruthDocument::Misspecified { lambda } => {
                    let truth = Misspecified::new(lambda)?;
                    let truth_ref: &dyn JointModel = &truth;
                    kl_divergence(truth_ref, model, seed)?
                }
            };
            Some(est)
        }
        None => None,
    };

    let confusion = match &args.labels {
        Some(path) => {
            let given = read_labels(path)?;
            if given.len() != labels.len() {
                return Err(CliError::data(format!(
                    "{} labels for {} individuals",
                    given.len(),
                    labels.len()
                )));
            }
            Some(confusion(&given, &labels)?)
        }
        None => None,
    };

    let bootstrap = if args.bootstrap_reps > 0 && data.n_vars() >= 2 {
        let singles = EncodedData::new(data, &BlockPartition::singletons(data.n_vars()))?;
        let (cspec, cfit) = cim_em_fit(&singles, g, &args.em.settings()?, seed.derive("null", 0))?;
        let null = CmmModel::new(data.schema().clone(), cspec, cfit.params)?;
        Some(bootstrap_independence_test(data, &labels, &null, args.bootstrap_reps, seed.derive("bootstrap", 0))?)
    } else {
        None
    };

    Ok(Evaluation {
        n: data.n(),
        g,
        loglik,
        kl,
        class_sizes,
        confusion,
        cramers_v: cramers_v_by_class(data, &labels, g)?,
        bootstrap,
        identifiability: identifiability_check(&model.spec),
        summaries: summaries(&model.params, &model.spec),
    })
}
