//! CSV ingestion and file output.
//!
//! The CSV dialect is deliberately small: comma separators, `.` decimals,
//! UTF-8, one observation per row, optionally one non-numeric header line.
//! Written numbers carry 17 significant digits, so a write/load round trip
//! reproduces every finite double bit-exactly.

use std::path::Path;

use postclust::cov::CovFactor;
use postclust::model::DataMatrix;

use crate::CliError;

/// Formats a double with enough digits to parse back bit-exactly.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Reads a numeric matrix from a CSV file.
pub fn load_csv(path: &Path) -> Result<DataMatrix, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    parse_csv(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Parses CSV text into a matrix: headerless, or with a single non-numeric
/// header line. Rejects ragged rows and non-finite values, naming the line
/// and column.
pub fn parse_csv(text: &str) -> Result<DataMatrix, String> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    let mut header_allowed = true;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut values = Vec::new();
        let mut failed: Option<(usize, &str)> = None;
        for (col, field) in line.split(',').enumerate() {
            match field.trim().parse::<f64>() {
                Ok(v) => values.push(v),
                Err(_) => {
                    failed = Some((col, field.trim()));
                    break;
                }
            }
        }
        if let Some((col, field)) = failed {
            if header_allowed {
                header_allowed = false;
                continue;
            }
            return Err(format!(
                "line {}, column {}: cannot parse {field:?} as a number",
                idx + 1,
                col + 1
            ));
        }
        header_allowed = false;
        if let Some(w) = width {
            if values.len() != w {
                return Err(format!(
                    "line {}: {} fields, expected {w}",
                    idx + 1,
                    values.len()
                ));
            }
        } else {
            width = Some(values.len());
        }
        for (col, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(format!(
                    "line {}, column {}: non-finite value {v}",
                    idx + 1,
                    col + 1
                ));
            }
        }
        rows.push(values);
    }
    DataMatrix::from_rows(&rows).map_err(|e| e.to_string())
}

/// Renders a matrix as CSV with round-trip precision.
pub fn write_csv(x: &DataMatrix) -> String {
    let mut out = String::new();
    for i in 0..x.n() {
        let fields: Vec<String> = x.row(i).iter().copied().map(format_f64).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Reads a square covariance matrix and factors it.
pub fn load_cov(path: &Path) -> Result<CovFactor, CliError> {
    let m = load_csv(path)?;
    if m.n() != m.q() {
        return Err(CliError::Data(format!(
            "{}: covariance must be square, got {}x{}",
            path.display(),
            m.n(),
            m.q()
        )));
    }
    let rows: Vec<Vec<f64>> = (0..m.n()).map(|i| m.row(i).to_vec()).collect();
    Ok(CovFactor::from_matrix(&rows)?)
}

/// Writes text to a file, classifying failures as data errors.
pub fn write_text(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}
