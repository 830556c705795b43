//! IHDP replication loader.
//!
//! One CSV per replication, named `ihdp_npci_<k>.csv` with `k = replication + 1`.
//! Columns: `treatment, y_factual, y_cfactual, mu0, mu1, x1, ..., xK`. A header
//! row is optional; without one the columns are read positionally. The
//! counterfactual column is ignored.

use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::{DomainDataset, GroundTruth};
use crate::error::{Error, Result};

pub const REPLICATIONS: usize = 10;
const REQUIRED: [&str; 5] = ["treatment", "y_factual", "y_cfactual", "mu0", "mu1"];

pub fn replication_path(dir: &Path, replication: usize) -> PathBuf {
    dir.join(format!("ihdp_npci_{}.csv", replication + 1))
}

pub fn load_ihdp(dir: &Path, replication: usize) -> Result<DomainDataset> {
    if replication >= REPLICATIONS {
        return Err(Error::InvalidInput(format!(
            "IHDP replication {replication} out of range [0, {REPLICATIONS})"
        )));
    }
    load_ihdp_file(&replication_path(dir, replication))
}

pub fn load_ihdp_file(path: &Path) -> Result<DomainDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut records = reader.records();
    let first = match records.next() {
        Some(r) => r?,
        None => {
            return Err(Error::InvalidInput(format!("{} is empty", path.display())));
        }
    };

    let schema_err = |column: &str, problem: String| Error::Schema {
        path: path.to_path_buf(),
        column: column.to_string(),
        problem,
    };

    let is_header = first.iter().any(|f| f.parse::<f64>().is_err());
    let (columns, x_columns, mut pending): (Vec<usize>, Vec<usize>, Option<csv::StringRecord>) =
        if is_header {
            let names: Vec<&str> = first.iter().collect();
            let mut cols = Vec::with_capacity(5);
            for req in REQUIRED {
                let idx = names
                    .iter()
                    .position(|&n| n == req)
                    .ok_or_else(|| schema_err(req, "is missing from the header".into()))?;
                cols.push(idx);
            }
            let xs: Vec<usize> = names
                .iter()
                .enumerate()
                .filter(|(_, n)| n.starts_with('x') && n[1..].parse::<usize>().is_ok())
                .map(|(i, _)| i)
                .collect();
            if let Some((i, n)) = names
                .iter()
                .enumerate()
                .find(|(i, _)| !cols.contains(i) && !xs.contains(i))
            {
                return Err(schema_err(n, format!("at position {i} is not part of the schema")));
            }
            (cols, xs, None)
        } else {
            if first.len() < 6 {
                return Err(schema_err(
                    "x1",
                    format!("is absent: headerless rows need at least 6 columns, found {}", first.len()),
                ));
            }
            ((0..5).collect(), (5..first.len()).collect(), Some(first))
        };
    if x_columns.is_empty() {
        return Err(schema_err("x1", "no covariate columns found".into()));
    }

    let width = columns.len() + x_columns.len();
    let (mut t, mut y, mut mu0, mut mu1, mut xs) = (vec![], vec![], vec![], vec![], vec![]);
    let mut line = if is_header { 1 } else { 0 };
    loop {
        let record = match pending.take() {
            Some(r) => r,
            None => match records.next() {
                Some(r) => r?,
                None => break,
            },
        };
        line += 1;
        if record.len() != width {
            return Err(schema_err(
                "row",
                format!("at line {line} has {} fields, expected {width}", record.len()),
            ));
        }
        let field = |i: usize, name: &str| -> Result<f64> {
            record[i]
                .parse::<f64>()
                .map_err(|_| schema_err(name, format!("holds non-numeric `{}` at line {line}", &record[i])))
        };
        let treat = field(columns[0], "treatment")?;
        if treat != 0.0 && treat != 1.0 {
            return Err(schema_err("treatment", format!("holds {treat} at line {line}, expected 0 or 1")));
        }
        t.push(treat);
        y.push(field(columns[1], "y_factual")?);
        mu0.push(field(columns[3], "mu0")?);
        mu1.push(field(columns[4], "mu1")?);
        for (k, &c) in x_columns.iter().enumerate() {
            xs.push(field(c, &format!("x{}", k + 1))?);
        }
    }

    let n = t.len();
    let covariates = Array2::from_shape_vec((n, x_columns.len()), xs).map_err(|e| Error::Shape(e.to_string()))?;
    let truth = GroundTruth::from_potentials(mu0, mu1)?;
    Ok(DomainDataset::target(covariates, t, y)?.with_ground_truth(truth))
}
