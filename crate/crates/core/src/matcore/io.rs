//! CSV formats.
//!
//! - dense matrix: one row per line, comma separated, no header;
//! - factored matrix: a directory holding `U.csv`, `sigma.csv` (one value per
//!   line) and `V.csv`;
//! - index set: two integer columns `i,j`, 0-based, sorted row-major, no header.
//!
//! Floats are written in Rust's shortest round-trip notation, so a write/read
//! cycle is lossless.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::{FactoredMatrix, IndexSet};
use crate::error::{Error, Result};

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?)
}

fn parse<T: std::str::FromStr>(field: &str, path: &Path) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::Parse(format!("{}: cannot parse {field:?}", path.display())))
}

pub fn write_dense_csv(path: &Path, a: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for i in 0..a.nrows() {
        let row: Vec<String> = a.row(i).iter().map(f64::to_string).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a dense matrix. An m×0 matrix is stored as m empty lines.
pub fn read_dense_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let text = fs::read_to_string(path)?;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            rows.push(Vec::new());
            continue;
        }
        rows.push(line.split(',').map(|f| parse(f.trim(), path)).collect::<Result<_>>()?);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse(format!("{}: ragged rows", path.display())));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &flat))
}

pub fn write_factored_dir(dir: &Path, f: &FactoredMatrix) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_dense_csv(&dir.join("U.csv"), f.u())?;
    write_dense_csv(&dir.join("V.csv"), f.v())?;
    let sigma = DMatrix::from_column_slice(f.rank(), 1, f.sigma().as_slice());
    write_dense_csv(&dir.join("sigma.csv"), &sigma)?;
    Ok(())
}

pub fn read_factored_dir(dir: &Path) -> Result<FactoredMatrix> {
    let u = read_dense_csv(&dir.join("U.csv"))?;
    let v = read_dense_csv(&dir.join("V.csv"))?;
    let sigma = read_dense_csv(&dir.join("sigma.csv"))?;
    let r = sigma.nrows();
    let fix = |a: DMatrix<f64>| if a.ncols() == 0 { DMatrix::zeros(a.nrows(), r) } else { a };
    FactoredMatrix::new(fix(u), DVector::from_column_slice(sigma.as_slice()), fix(v))
}

pub fn write_index_set_csv(path: &Path, mask: &IndexSet) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for &(i, j) in mask.pairs() {
        w.write_record([i.to_string(), j.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_index_set_csv(path: &Path, nrows: usize, ncols: usize) -> Result<IndexSet> {
    let mut pairs = Vec::new();
    for rec in reader(path)?.records() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::Parse(format!("{}: expected two columns", path.display())));
        }
        pairs.push((parse(&rec[0], path)?, parse(&rec[1], path)?));
    }
    IndexSet::new(nrows, ncols, pairs)
}

/// One value per line.
pub fn write_values_csv(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for v in values {
        w.write_record([v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_values_csv(path: &Path) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for rec in reader(path)?.records() {
        out.push(parse(&rec?[0], path)?);
    }
    Ok(out)
}
