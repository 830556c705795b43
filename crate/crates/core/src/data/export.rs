//! Dataset CSV export/import and the JSON sidecar.
//!
//! One CSV per domain, header `d,t,y,x_0,...,x_{V-1}`. Source rows carry
//! `d = 0` and empty `t` and `y` fields. Floats are written in Rust's
//! shortest round-trip form, so a write/read cycle is exact.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::Serialize;

use super::{Domain, DomainDataset, GroundTruth};
use crate::error::{Error, Result};

pub fn write_domain_csv(path: &Path, data: &DomainDataset) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);

    let mut header = String::from("d,t,y");
    for j in 0..data.n_features() {
        header.push_str(&format!(",x_{j}"));
    }
    writeln!(w, "{header}").map_err(io)?;

    let d = data.domain().flag();
    for (i, row) in data.covariates.rows().into_iter().enumerate() {
        let mut line = match data.labels() {
            Some(l) => format!("{d},{},{}", l.treatments[i], l.outcomes[i]),
            None => format!("{d},,"),
        };
        for v in row {
            line.push(',');
            line.push_str(&v.to_string());
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a single-domain CSV written by [`write_domain_csv`].
pub fn read_domain_csv(path: &Path) -> Result<DomainDataset> {
    let mut reader = csv::ReaderBuilder::new().from_path(path)?;
    let headers = reader.headers()?.clone();
    let schema = |column: &str, problem: String| Error::Schema {
        path: path.to_path_buf(),
        column: column.to_string(),
        problem,
    };
    for (i, expected) in ["d", "t", "y"].iter().enumerate() {
        match headers.get(i) {
            Some(h) if h == *expected => {}
            Some(h) => return Err(schema(h, format!("found where `{expected}` was expected"))),
            None => return Err(schema(expected, "is missing".into())),
        }
    }
    for (j, h) in headers.iter().skip(3).enumerate() {
        if h != format!("x_{j}") {
            return Err(schema(h, format!("found where `x_{j}` was expected")));
        }
    }
    let v = headers.len() - 3;

    let mut domain = None;
    let (mut t, mut y, mut xs) = (Vec::new(), Vec::new(), Vec::new());
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|_| {
                schema(&headers[i], format!("holds `{}` at data row {}", &rec[i], line + 1))
            })
        };
        let row_domain = match &rec[0] {
            "1" => Domain::Target,
            "0" => Domain::Source,
            other => return Err(schema("d", format!("holds `{other}`, expected 0 or 1"))),
        };
        if *domain.get_or_insert(row_domain) != row_domain {
            return Err(schema("d", "mixes target and source rows in one file".into()));
        }
        match row_domain {
            Domain::Target => {
                t.push(num(1)?);
                y.push(num(2)?);
            }
            Domain::Source => {
                if !rec[1].is_empty() || !rec[2].is_empty() {
                    return Err(schema("t", "must be empty on source rows".into()));
                }
            }
        }
        for j in 0..v {
            xs.push(num(3 + j)?);
        }
    }

    let n = xs.len() / v.max(1);
    let x = Array2::from_shape_vec((n, v), xs).map_err(|e| Error::Shape(e.to_string()))?;
    match domain {
        Some(Domain::Target) => DomainDataset::target(x, t, y),
        _ => Ok(DomainDataset::source(x)),
    }
}

#[derive(Serialize)]
struct Sidecar<'a, C: Serialize> {
    ground_truth: Option<&'a GroundTruth>,
    config: &'a C,
}

/// Writes `{ "ground_truth": ..., "config": ... }` as pretty JSON.
pub fn write_sidecar<C: Serialize>(path: &Path, truth: Option<&GroundTruth>, config: &C) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(
        BufWriter::new(file),
        &Sidecar {
            ground_truth: truth,
            config,
        },
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_and_source_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let x = Array2::from_shape_fn((3, 2), |(i, j)| 0.1 * i as f64 - 1.0 / 3.0 * j as f64);
        let target = DomainDataset::target(x.clone(), vec![1.0, 0.0, 1.0], vec![0.25, -1e-17, 3.0]).unwrap();
        let p = dir.path().join("target.csv");
        write_domain_csv(&p, &target).unwrap();
        assert_eq!(read_domain_csv(&p).unwrap(), target);

        let source = DomainDataset::source(x);
        let p = dir.path().join("source.csv");
        write_domain_csv(&p, &source).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("0,,,"));
        assert_eq!(read_domain_csv(&p).unwrap(), source);
    }

    #[test]
    fn bad_header_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "d,t,y,x_0,x_2\n1,0,1,2,3\n").unwrap();
        assert!(matches!(read_domain_csv(&p), Err(Error::Schema { column, .. }) if column == "x_2"));
    }
}
