//! Matrix CSV files: one row per line, comma separated, 17 significant
//! digits so every `f64` survives a write/read round trip exactly.
//!
//! An estimate may carry a two-line footer, `error_op,error_fro,error_max`
//! followed by the values; readers stop at that header.

use std::fmt::Write as _;
use std::path::Path;

use obcov_core::linalg::Matrix;

use crate::error::CliError;

pub const ERROR_FOOTER: &str = "error_op,error_fro,error_max";

pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|&v| format_f64(v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn append_error_footer(csv: &mut String, op: f64, fro: f64, max: f64) {
    let _ = writeln!(csv, "{ERROR_FOOTER}");
    let _ = writeln!(
        csv,
        "{},{},{}",
        format_f64(op),
        format_f64(fro),
        format_f64(max)
    );
}

pub fn parse_matrix_csv(text: &str) -> Result<Matrix, CliError> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with(ERROR_FOOTER) {
            break;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|field| field.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Config(format!("matrix line {}: {e}", lineno + 1)))?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(CliError::Config(format!(
                    "matrix line {} has {} columns, expected {c}",
                    lineno + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        data.extend(row);
        rows += 1;
    }
    let cols = cols.ok_or_else(|| CliError::Config("empty matrix file".into()))?;
    Ok(Matrix::from_row_major(rows, cols, data)?)
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_matrix_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let m = Matrix::from_fn(3, 3, |i, j| (i as f64 + 1.0) / (j as f64 + 3.0) * 1e-7);
        let back = parse_matrix_csv(&matrix_to_csv(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn footer_is_skipped() {
        let m = Matrix::identity(2);
        let mut csv = matrix_to_csv(&m);
        append_error_footer(&mut csv, 0.5, 0.25, 0.125);
        assert_eq!(parse_matrix_csv(&csv).unwrap(), m);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(parse_matrix_csv("1,2\n3\n").is_err());
        assert!(parse_matrix_csv("").is_err());
        assert!(parse_matrix_csv("1,x\n").is_err());
    }
}
