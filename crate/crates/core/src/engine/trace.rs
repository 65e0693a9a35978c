//! Sampled trace and its CSV form.
//!
//! The file starts with the comment line `# entrap-trace v1`, then a header
//! row. Columns, in order (agents and edges use one-based labels):
//!
//! - `t`, `target_x`, `target_y`
//! - per agent `k`: `p{k}_x`, `p{k}_y`, `v{k}_x`, `v{k}_y`
//! - per follower `k`: `u{k}_x`, `u{k}_y`, `dp{k}_x`, `dp{k}_y`, `dv{k}_x`, `dv{k}_y`
//! - per follower edge `i-j`: `rho_hat_{i}_{j}`, `rho_{i}_{j}`, `rho_err_{i}_{j}`, `pe_{i}_{j}`
//! - `ef_norm`, `v_c`, `min_gap`
//!
//! `pe_{i}_{j}` is the excitation integral over the most recent window.

use std::io::Write;

use crate::error::Result;
use crate::estimation::DirectedEdge;

pub const TRACE_VERSION_LINE: &str = "# entrap-trace v1";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Trace {
    pub fn new(n_agents: usize, n_leaders: usize, edges: &[DirectedEdge]) -> Self {
        let mut columns: Vec<String> = vec!["t".into(), "target_x".into(), "target_y".into()];
        for k in 1..=n_agents {
            for name in ["p", "v"] {
                columns.push(format!("{name}{k}_x"));
                columns.push(format!("{name}{k}_y"));
            }
        }
        for k in n_leaders + 1..=n_agents {
            for name in ["u", "dp", "dv"] {
                columns.push(format!("{name}{k}_x"));
                columns.push(format!("{name}{k}_y"));
            }
        }
        for e in edges {
            let (i, j) = (e.from + 1, e.to + 1);
            for name in ["rho_hat", "rho", "rho_err", "pe"] {
                columns.push(format!("{name}_{i}_{j}"));
            }
        }
        columns.extend(["ef_norm".into(), "v_c".into(), "min_gap".into()]);
        Trace {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of one column across all rows.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Appends a row; panics if its width differs from the header or time
    /// does not increase, both of which are programming errors.
    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "trace row width");
        if let Some(last) = self.rows.last() {
            assert!(row[0] > last[0], "trace time must increase");
        }
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{TRACE_VERSION_LINE}")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|x| x.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}
