//! Result tables: CSV rows plus named scalar notes for the JSON sidecar.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::matrix_io::format_f64;

pub const CSV_HEADER: &str = "sweep,estimator,mean_error,std_error,trials";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep: f64,
    pub estimator: String,
    pub mean_error: f64,
    pub std_error: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub notes: BTreeMap<String, f64>,
}

impl ResultTable {
    /// Stable sort by sweep value; rows sharing a sweep keep insertion order.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| a.sweep.total_cmp(&b.sweep));
    }

    pub fn find(&self, sweep: f64, estimator: &str) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.sweep == sweep && r.estimator == estimator)
    }

    pub fn series(&self, estimator: &str) -> Vec<&ResultRow> {
        self.rows
            .iter()
            .filter(|r| r.estimator == estimator)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let sweep = if r.sweep.fract() == 0.0 && r.sweep.abs() < 1e15 {
                format!("{}", r.sweep as i64)
            } else {
                format_f64(r.sweep)
            };
            out.push_str(&format!(
                "{sweep},{},{},{},{}\n",
                r.estimator,
                format_f64(r.mean_error),
                format_f64(r.std_error),
                r.trials
            ));
        }
        out
    }
}
