//! Labelled result tables and their CSV form.

use std::fmt;
use std::io::Write;

use super::config::Config;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Value(f64),
    /// No finite bound was found (stable at the limiting parameter).
    Unbounded,
    /// The evaluation failed.
    Nan,
}

impl Cell {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Cell::Value(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub label: String,
    pub cells: Vec<Cell>,
    /// Digits after the decimal point in the CSV.
    pub decimals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableResult {
    pub experiment: String,
    /// Header of the label column.
    pub corner: String,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    /// Everything needed to recompute the table.
    pub config: Config,
}

impl TableResult {
    pub fn new(experiment: &str, corner: &str, columns: Vec<String>, config: Config) -> Self {
        TableResult {
            experiment: experiment.to_string(),
            corner: corner.to_string(),
            columns,
            rows: Vec::new(),
            config,
        }
    }

    pub fn push_row(&mut self, label: impl Into<String>, cells: Vec<Cell>, decimals: usize) {
        assert_eq!(cells.len(), self.columns.len(), "row width must match the columns");
        self.rows.push(Row {
            label: label.into(),
            cells,
            decimals,
        });
    }

    pub fn row(&self, label: &str) -> Option<&Row> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn cell(&self, row: &str, column: &str) -> Option<Cell> {
        let c = self.columns.iter().position(|c| c == column)?;
        self.row(row).map(|r| r.cells[c])
    }

    pub fn has_failures(&self) -> bool {
        self.rows.iter().flat_map(|r| &r.cells).any(|c| *c == Cell::Nan)
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "# experiment: {}", self.experiment)?;
        writeln!(out, "# version: {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(out, "# config_hash: {}", self.config.hash())?;
        for (k, v) in self.config.iter() {
            writeln!(out, "# {k} = {v}")?;
        }
        write!(out, "{}", self.corner)?;
        for c in &self.columns {
            write!(out, ",{c}")?;
        }
        writeln!(out)?;
        for row in &self.rows {
            write!(out, "{}", row.label)?;
            for cell in &row.cells {
                write!(out, ",{}", Formatted(*cell, row.decimals))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

struct Formatted(Cell, usize);

impl fmt::Display for Formatted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Cell::Value(v) if v.is_nan() => f.write_str("nan"),
            Cell::Value(v) => {
                // avoid "-0.00"
                let s = format!("{v:.*}", self.1);
                if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
                    f.write_str(s.trim_start_matches('-'))
                } else {
                    f.write_str(&s)
                }
            }
            Cell::Unbounded => f.write_str("unbounded"),
            Cell::Nan => f.write_str("nan"),
        }
    }
}
