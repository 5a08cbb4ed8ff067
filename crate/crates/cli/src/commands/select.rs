use std::path::Path;

use cmm_core::bayes::bic;
use cmm_core::search::{select_model, ChainResult, SelectConfig, Tally};
use cmm_core::{CategoricalDataset, CmmModel, Seed};

use super::{csv_writer, read_data, sigma_names};
use crate::document::{FitInfo, ModelDocument};
use crate::error::{CliError, CliResult};
use crate::{Common, SelectArgs};

pub fn run(common: &Common, args: &SelectArgs) -> CliResult<()> {
    if args.gmin == 0 || args.gmin > args.gmax {
        return Err(CliError::usage(format!("invalid class range --gmin {} --gmax {}", args.gmin, args.gmax)));
    }
    let data = read_data(&args.data)?;
    let config = SelectConfig {
        g_min: args.gmin,
        g_max: args.gmax,
        chains: args.chain.chains,
        chain: args.chain.config()?,
        em: args.em.settings()?,
        with_cim: args.cim,
    };
    let sel = select_model(&data, &config, Seed(common.seed))?;
    let out = &common.out_dir;
    let schema = data.schema();

    let mut table = csv_writer(&out.join("bic_table.csv"))?;
    let mut header = vec!["g", "sigma", "modes", "loglik", "nu", "bic", "visit_share"];
    if args.cim {
        header.extend(["cim_loglik", "cim_nu", "cim_bic"]);
    }
    table.write_record(&header)?;
    println!("{:>3}  {:>14}  {:>6}  {:>14}  structure", "g", "loglik", "nu", "bic");
    for (i, r) in sel.results.iter().enumerate() {
        let share = r.tally.0.get(&r.structure).map_or(0, |e| e.visits) as f64 / r.tally.total().max(1) as f64;
        let sigma = sigma_names(schema, r.spec.partition());
        let mut rec = vec![
            r.g.to_string(),
            sigma.clone(),
            r.structure.modes_string(),
            r.fit.loglik.to_string(),
            r.spec.nu().to_string(),
            r.bic.to_string(),
            share.to_string(),
        ];
        if let Some((cspec, cfit, cbic)) = &r.cim {
            rec.extend([cfit.loglik.to_string(), cspec.nu().to_string(), cbic.to_string()]);
        }
        table.write_record(&rec)?;
        let mark = if i == sel.best { "*" } else { " " };
        println!(
            "{:>3}{mark} {:>14.4}  {:>6}  {:>14.4}  {sigma} [{}]",
            r.g,
            r.fit.loglik,
            r.spec.nu(),
            r.bic,
            r.structure.modes_string()
        );
        if let Some((_, cfit, cbic)) = &r.cim {
            let mark = if Some(i) == sel.best_cim { "*" } else { " " };
            println!("{:>3}{mark} {:>14.4}  {:>6}  {:>14.4}  independence model", r.g, cfit.loglik, r.cim.as_ref().unwrap().0.nu(), cbic);
        }

        let model = CmmModel::new(schema.clone(), r.spec.clone(), r.fit.params.clone())?;
        let info = FitInfo { loglik: Some(r.fit.loglik), bic: Some(r.bic), n: Some(data.n()), seed: Some(common.seed) };
        let doc = ModelDocument::from_model(&model, &info);
        doc.save(&out.join(format!("model_g{}.json", r.g)))?;
        if i == sel.best {
            doc.save(&out.join("model.json"))?;
        }
        if let Some((cspec, cfit, _)) = &r.cim {
            save_cim(&data, cspec, cfit, common, &out.join(format!("model_cim_g{}.json", r.g)))?;
            if Some(i) == sel.best_cim {
                save_cim(&data, cspec, cfit, common, &out.join("model_cim.json"))?;
            }
        }
        write_tally(&out.join(format!("tally_g{}.csv", r.g)), schema, &r.tally)?;
        if config.chain.record_trace {
            write_traces(out, r.g, &r.chains)?;
        }
    }
    table.flush().map_err(|e| CliError::io(out, e))?;
    Ok(())
}

fn save_cim(
    data: &CategoricalDataset,
    spec: &cmm_core::ModelSpec,
    fit: &cmm_core::em::EmFit,
    common: &Common,
    path: &Path,
) -> CliResult<()> {
    let model = CmmModel::new(data.schema().clone(), spec.clone(), fit.params.clone())?;
    let info = FitInfo {
        loglik: Some(fit.loglik),
        bic: Some(bic(fit.loglik, spec.nu(), data.n())),
        n: Some(data.n()),
        seed: Some(common.seed),
    };
    ModelDocument::from_model(&model, &info).save(path)
}

fn write_tally(path: &Path, schema: &cmm_core::Schema, tally: &Tally) -> CliResult<()> {
    let mut rows: Vec<_> = tally.0.iter().collect();
    rows.sort_by(|a, b| b.1.visits.cmp(&a.1.visits).then_with(|| a.0.cmp(b.0)));
    let mut w = csv_writer(path)?;
    w.write_record(["sigma", "modes", "visits", "best_log_evidence"])?;
    for (s, e) in rows {
        w.write_record([
            sigma_names(schema, &s.partition),
            s.modes_string(),
            e.visits.to_string(),
            e.best_log_evidence.to_string(),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_traces(out: &Path, g: usize, chains: &[ChainResult]) -> CliResult<()> {
    let dir = out.join("traces");
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    for (c, chain) in chains.iter().enumerate() {
        let path = dir.join(format!("g{}_chain{:02}.csv", g, c + 1));
        let mut w = csv_writer(&path)?;
        w.write_record(["iteration", "sigma", "modes", "log_evidence", "accepted"])?;
        for row in &chain.trace {
            w.write_record([
                row.iteration.to_string(),
                row.sigma.clone(),
                row.modes.clone(),
                row.log_evidence.to_string(),
                u8::from(row.accepted).to_string(),
            ])?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
    }
    Ok(())
}
