//! Strict CSV plumbing: UTF-8, comma delimiter, `.` decimal point, LF line
//! endings, no missing-value handling. Floats are written with the shortest
//! representation that reparses to the same bits, so a written file read
//! back yields bit-identical values.

use std::path::Path;

use flogit::funcsample::RawCurves;
use nalgebra::DMatrix;

use crate::errors::CliError;

pub fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_string(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn parse_numeric_row(line: &str, row: usize, path: &Path) -> Result<Vec<f64>, CliError> {
    line.split(',')
        .enumerate()
        .map(|(col, cell)| {
            let v: f64 = cell.parse().map_err(|_| {
                CliError::Parse(format!(
                    "{}: row {row}, column {}: not a number: {cell:?}",
                    path.display(),
                    col + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::Parse(format!(
                    "{}: row {row}, column {}: non-finite value {cell:?}",
                    path.display(),
                    col + 1
                )));
            }
            Ok(v)
        })
        .collect()
}

/// Curves CSV: a header row holding the grid values, then one row of curve
/// values per observation, every row with exactly as many fields as the
/// header.
pub fn parse_curves_csv(path: &Path) -> Result<RawCurves, CliError> {
    let text = read_to_string(path)?;
    let mut lines = text.lines();
    let Some(header) = lines.next() else {
        return Err(CliError::Parse(format!("{}: empty file", path.display())));
    };
    let grid = parse_numeric_row(header, 1, path)?;
    if grid.len() < 2 {
        return Err(CliError::Parse(format!(
            "{}: header must list at least 2 grid points",
            path.display()
        )));
    }
    for (j, w) in grid.windows(2).enumerate() {
        if w[0] >= w[1] {
            return Err(CliError::Parse(format!(
                "{}: header column {}: grid values must be strictly increasing",
                path.display(),
                j + 2
            )));
        }
    }
    let mut flat = Vec::new();
    let mut n = 0usize;
    for (i, line) in lines.enumerate() {
        let row = parse_numeric_row(line, i + 2, path)?;
        if row.len() != grid.len() {
            return Err(CliError::Parse(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                i + 2,
                row.len(),
                grid.len()
            )));
        }
        flat.extend_from_slice(&row);
        n += 1;
    }
    if n == 0 {
        return Err(CliError::Parse(format!(
            "{}: no curve rows after the header",
            path.display()
        )));
    }
    let values = DMatrix::from_row_slice(n, grid.len(), &flat);
    RawCurves::new(grid, values).map_err(CliError::from)
}

/// Response CSV: a single column of 0/1 values, no header.
pub fn parse_response_csv(path: &Path) -> Result<Vec<u8>, CliError> {
    let text = read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        match line {
            "0" => out.push(0),
            "1" => out.push(1),
            other => {
                return Err(CliError::Parse(format!(
                    "{}: row {}: response must be 0 or 1, got {other:?}",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::Parse(format!(
            "{}: no response rows",
            path.display()
        )));
    }
    Ok(out)
}

pub fn curves_to_csv(raw: &RawCurves) -> String {
    let mut s = String::new();
    push_joined(&mut s, raw.grid().iter().copied());
    for r in 0..raw.n_curves() {
        push_joined(&mut s, raw.values().row(r).iter().copied());
    }
    s
}

pub fn responses_to_csv(y: &[u8]) -> String {
    let mut s = String::new();
    for &v in y {
        s.push(if v == 1 { '1' } else { '0' });
        s.push('\n');
    }
    s
}

pub fn predictions_to_csv(preds: &[(f64, u8)]) -> String {
    let mut s = String::from("index,probability,class\n");
    for (i, &(p, class)) in preds.iter().enumerate() {
        s.push_str(&format!("{i},{p},{class}\n"));
    }
    s
}

fn push_joined(s: &mut String, values: impl Iterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            s.push(',');
        }
        s.push_str(&format!("{v}"));
        first = false;
    }
    s.push('\n');
}
