//! Categorical datasets and CSV ingestion.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{CmmError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub levels: Vec<String>,
}

impl Variable {
    pub fn new(name: impl Into<String>, levels: Vec<String>) -> Self {
        Self { name: name.into(), levels }
    }

    /// Variable with levels labelled `"1"`, ..., `"m"`.
    pub fn numbered(name: impl Into<String>, m: usize) -> Self {
        Self::new(name, (1..=m).map(|l| l.to_string()).collect())
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }
}

/// Names and ordered modality labels of every variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub variables: Vec<Variable>,
}

impl Schema {
    pub fn new(variables: Vec<Variable>) -> Result<Self> {
        let mut seen = HashMap::new();
        for (b, v) in variables.iter().enumerate() {
            if v.levels.len() < 2 {
                return Err(CmmError::Data(format!(
                    "variable '{}' has {} modality; at least 2 are required",
                    v.name,
                    v.levels.len()
                )));
            }
            if seen.insert(v.name.as_str(), b).is_some() {
                return Err(CmmError::Data(format!("duplicate variable name '{}'", v.name)));
            }
            let mut lv = HashMap::new();
            for l in &v.levels {
                if lv.insert(l.as_str(), ()).is_some() {
                    return Err(CmmError::Data(format!(
                        "duplicate level '{}' in variable '{}'",
                        l, v.name
                    )));
                }
            }
        }
        Ok(Self { variables })
    }

    /// `count` variables `V1..Vcount`, each with `m` numbered levels.
    pub fn uniform(count: usize, m: usize) -> Self {
        Self::new((1..=count).map(|b| Variable::numbered(format!("V{b}"), m)).collect())
            .expect("numbered schema is valid")
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    /// Same levels under new variable names.
    pub fn renamed(mut self, names: &[&str]) -> Self {
        for (v, n) in self.variables.iter_mut().zip(names) {
            v.name = (*n).to_owned();
        }
        self
    }

    pub fn n_levels(&self) -> Vec<usize> {
        self.variables.iter().map(Variable::n_levels).collect()
    }

    pub fn names(&self) -> Vec<&str> {
        self.variables.iter().map(|v| v.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// For each variable, the map from this schema's level index to the
    /// corresponding level index of `other`. Both schemas must describe the
    /// same variables (same names, same order) with the same level sets.
    pub fn level_map_to(&self, other: &Schema) -> Result<Vec<Vec<u32>>> {
        if self.n_vars() != other.n_vars() {
            return Err(CmmError::Data(format!(
                "schemas have {} and {} variables",
                self.n_vars(),
                other.n_vars()
            )));
        }
        self.variables
            .iter()
            .zip(&other.variables)
            .map(|(a, b)| {
                if a.name != b.name || a.levels.len() != b.levels.len() {
                    return Err(CmmError::Data(format!(
                        "variable mismatch: '{}' ({} levels) vs '{}' ({} levels)",
                        a.name,
                        a.levels.len(),
                        b.name,
                        b.levels.len()
                    )));
                }
                a.levels
                    .iter()
                    .map(|l| {
                        b.levels.iter().position(|x| x == l).map(|p| p as u32).ok_or_else(|| {
                            CmmError::Data(format!("level '{}' of '{}' missing", l, a.name))
                        })
                    })
                    .collect()
            })
            .collect()
    }
}

/// `n` individuals described by `B` categorical variables.
///
/// Cells are stored row-major as modality indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalDataset {
    schema: Schema,
    cells: Vec<u32>,
    n: usize,
}

impl CategoricalDataset {
    pub fn new(schema: Schema, cells: Vec<u32>) -> Result<Self> {
        let b = schema.n_vars();
        if b == 0 {
            return Err(CmmError::Data("dataset has no variables".into()));
        }
        if cells.len() % b != 0 {
            return Err(CmmError::Data(format!(
                "{} cells do not fill rows of {} variables",
                cells.len(),
                b
            )));
        }
        let m = schema.n_levels();
        for (idx, &c) in cells.iter().enumerate() {
            let var = idx % b;
            if c as usize >= m[var] {
                return Err(CmmError::Data(format!(
                    "row {}: modality index {} out of range for '{}'",
                    idx / b,
                    c,
                    schema.variables[var].name
                )));
            }
        }
        let n = cells.len() / b;
        Ok(Self { schema, cells, n })
    }

    pub fn from_rows(schema: Schema, rows: &[Vec<u32>]) -> Result<Self> {
        let cells = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(schema, cells)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_vars(&self) -> usize {
        self.schema.n_vars()
    }

    pub fn row(&self, i: usize) -> &[u32] {
        let b = self.n_vars();
        &self.cells[i * b..(i + 1) * b]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        self.cells.chunks_exact(self.n_vars())
    }

    pub fn column(&self, b: usize) -> impl Iterator<Item = u32> + '_ {
        self.rows().map(move |r| r[b])
    }

    /// Subset of rows, keeping the schema.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let cells = idx.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        Self { schema: self.schema.clone(), cells, n: idx.len() }
    }

    /// Reads a CSV whose header names the variables. Modality labels are
    /// indexed in order of first appearance.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if names.is_empty() || names.iter().all(String::is_empty) {
            return Err(CmmError::Data("missing header row".into()));
        }
        let b = names.len();
        let mut levels: Vec<Vec<String>> = vec![Vec::new(); b];
        let mut lookup: Vec<HashMap<String, u32>> = vec![HashMap::new(); b];
        let mut cells = Vec::new();
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != b {
                return Err(CmmError::Data(format!(
                    "row {}: expected {} fields, found {}",
                    r + 1,
                    b,
                    rec.len()
                )));
            }
            for (var, field) in rec.iter().enumerate() {
                if field.is_empty() {
                    return Err(CmmError::Data(format!(
                        "row {}: empty cell for variable '{}'",
                        r + 1,
                        names[var]
                    )));
                }
                let next = levels[var].len() as u32;
                let idx = *lookup[var].entry(field.to_owned()).or_insert_with(|| {
                    levels[var].push(field.to_owned());
                    next
                });
                cells.push(idx);
            }
        }
        let schema = Schema::new(
            names.into_iter().zip(levels).map(|(n, l)| Variable::new(n, l)).collect(),
        )?;
        Self::new(schema, cells)
    }

    /// Reads a CSV against a known schema: the header must list the schema's
    /// variables in order and every label must be a known level.
    pub fn read_csv_with_schema<R: Read>(reader: R, schema: &Schema) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if names != schema.names() {
            return Err(CmmError::Data(format!(
                "header {:?} does not match model variables {:?}",
                names,
                schema.names()
            )));
        }
        let lookup: Vec<HashMap<&str, u32>> = schema
            .variables
            .iter()
            .map(|v| v.levels.iter().enumerate().map(|(i, l)| (l.as_str(), i as u32)).collect())
            .collect();
        let mut cells = Vec::new();
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != names.len() {
                return Err(CmmError::Data(format!("row {}: wrong field count", r + 1)));
            }
            for (var, field) in rec.iter().enumerate() {
                let idx = lookup[var].get(field).ok_or_else(|| {
                    CmmError::Data(format!(
                        "row {}: unknown level '{}' for variable '{}'",
                        r + 1,
                        field,
                        names[var]
                    ))
                })?;
                cells.push(*idx);
            }
        }
        Self::new(schema.clone(), cells)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.schema.names())?;
        for row in self.rows() {
            w.write_record(
                row.iter()
                    .zip(&self.schema.variables)
                    .map(|(&c, v)| v.levels[c as usize].as_str()),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_levels_follow_first_appearance() {
        let text = "a,b\nx,2\ny,1\nx,3\n";
        let ds = CategoricalDataset::read_csv(text.as_bytes()).unwrap();
        assert_eq!(ds.n(), 3);
        assert_eq!(ds.schema().variables[0].levels, vec!["x", "y"]);
        assert_eq!(ds.schema().variables[1].levels, vec!["2", "1", "3"]);
        assert_eq!(ds.row(2), &[0, 2]);

        let mut out = Vec::new();
        ds.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn empty_cell_is_rejected() {
        let err = CategoricalDataset::read_csv("a,b\nx,\ny,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, CmmError::Data(_)), "{err}");
    }

    #[test]
    fn single_modality_variable_is_rejected() {
        let err = CategoricalDataset::read_csv("a,b\nx,1\ny,1\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("'b'"), "{err}");
    }

    #[test]
    fn ragged_row_is_rejected() {
        assert!(CategoricalDataset::read_csv("a,b\nx,1,3\n".as_bytes()).is_err());
    }

    #[test]
    fn schema_reading_maps_known_labels() {
        let schema = Schema::new(vec![
            Variable::new("a", vec!["y".into(), "x".into()]),
            Variable::new("b", vec!["1".into(), "2".into()]),
        ])
        .unwrap();
        let ds = CategoricalDataset::read_csv_with_schema("a,b\nx,2\n".as_bytes(), &schema).unwrap();
        assert_eq!(ds.row(0), &[1, 1]);
        assert!(CategoricalDataset::read_csv_with_schema("a,b\nz,2\n".as_bytes(), &schema).is_err());
        assert!(CategoricalDataset::read_csv_with_schema("b,a\n1,x\n".as_bytes(), &schema).is_err());
    }

    #[test]
    fn level_map_between_permuted_schemas() {
        let s1 = Schema::new(vec![Variable::new("a", vec!["p".into(), "q".into(), "r".into()])]).unwrap();
        let s2 = Schema::new(vec![Variable::new("a", vec!["r".into(), "p".into(), "q".into()])]).unwrap();
        assert_eq!(s1.level_map_to(&s2).unwrap(), vec![vec![1, 2, 0]]);
    }
}
