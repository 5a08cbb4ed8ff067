pub mod bench;
pub mod evaluate;
pub mod fit;
pub mod select;
pub mod simulate;

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use cmm_core::likelihood::summaries;
use cmm_core::{BlockPartition, CategoricalDataset, CmmModel, Schema};

use crate::document::FitInfo;
use crate::error::{CliError, CliResult};

pub fn read_data(path: &Path) -> CliResult<CategoricalDataset> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    CategoricalDataset::read_csv(BufReader::new(file))
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn read_data_with_schema(path: &Path, schema: &Schema) -> CliResult<CategoricalDataset> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    CategoricalDataset::read_csv_with_schema(BufReader::new(file), schema)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn csv_writer(path: &Path) -> CliResult<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// `{a,b}{c}` with variable names.
pub fn sigma_names(schema: &Schema, partition: &BlockPartition) -> String {
    partition
        .blocks()
        .iter()
        .map(|b| format!("{{{}}}", b.iter().map(|&v| schema.variables[v].name.as_str()).collect::<Vec<_>>().join(",")))
        .collect()
}

/// Labels (1-based) and responsibilities per row.
pub fn write_partition(path: &Path, labels: &[usize], resp: &[f64], g: usize) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["row".to_owned(), "label".to_owned()];
    header.extend((1..=g).map(|k| format!("t{k}")));
    w.write_record(&header)?;
    for (i, (l, row)) in labels.iter().zip(resp.chunks_exact(g)).enumerate() {
        let mut rec = vec![(i + 1).to_string(), (l + 1).to_string()];
        rec.extend(row.iter().map(|t| t.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads a `row,label` file with 1-based labels.
pub fn read_labels(path: &Path) -> CliResult<Vec<usize>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let col = rdr
        .headers()?
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| CliError::data(format!("{}: no 'label' column", path.display())))?;
    rdr.records()
        .enumerate()
        .map(|(r, rec)| {
            let rec = rec?;
            let v: usize = rec
                .get(col)
                .and_then(|s| s.trim().parse().ok())
                .filter(|&v| v >= 1)
                .ok_or_else(|| CliError::data(format!("{}: row {}: bad label", path.display(), r + 1)))?;
            Ok(v - 1)
        })
        .collect()
}

/// Human-readable summary of a fitted model.
pub fn report(model: &CmmModel, info: &FitInfo) -> String {
    let mut out = String::new();
    let spec = &model.spec;
    out.push_str(&format!("classes: {}\n", spec.g()));
    out.push_str(&format!("sigma: {}\n", sigma_names(&model.schema, spec.partition())));
    if let Some(n) = info.n {
        out.push_str(&format!("n: {n}\n"));
    }
    if let Some(l) = info.loglik {
        out.push_str(&format!("loglik: {l:.4}\n"));
    }
    out.push_str(&format!("nu: {}\n", spec.nu()));
    if let Some(b) = info.bic {
        out.push_str(&format!("bic: {b:.4}\n"));
    }
    let sums = summaries(&model.params, spec);
    for (k, row) in sums.iter().enumerate() {
        out.push_str(&format!("class {} (pi = {:.4})\n", k + 1, model.params.pi[k]));
        for (j, s) in row.iter().enumerate() {
            let block = &spec.partition().blocks()[j];
            let names: Vec<&str> = block.iter().map(|&v| model.schema.variables[v].name.as_str()).collect();
            out.push_str(&format!(
                "  {{{}}}  modes {}  kappa {:.3}  rho {:.3}\n",
                names.join(","),
                spec.mode_count(k, j),
                s.kappa,
                s.rho
            ));
        }
    }
    out
}
