//! JSON reports and CSV tables.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::mtx::write_atomic;
use crate::problems::ProblemSpec;
use crate::solver::{IterationRecord, Method, SolverConfig};

use super::config::GridConfig;

#[derive(Debug, Clone, Copy)]
pub enum Cell {
    Real(f64),
    Int(usize),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v)
    }
}

/// Header plus rows; reals are written with 17 significant digits.
pub fn format_csv(header: &[&str], rows: &[Vec<Cell>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        for (i, c) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            match c {
                Cell::Real(v) => write!(out, "{v:.16e}"),
                Cell::Int(v) => write!(out, "{v}"),
            }
            .expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
    write_atomic(path, format_csv(header, rows).as_bytes())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| crate::Error::Config(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeRecord {
    pub t: f64,
    pub residual: f64,
    pub rank: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub setup_seconds: f64,
    pub solve_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorInfo {
    pub path: String,
    pub rank: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub problem: ProblemSpec,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub method: Method,
    pub converged: bool,
    pub m: usize,
    pub dim: usize,
    pub max_residual: f64,
    pub iterations: Vec<IterationRecord>,
    pub nodes: Vec<NodeRecord>,
    pub factor: Option<FactorInfo>,
    pub timings: Timings,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub method: Method,
    pub converged: bool,
    pub m: usize,
    pub max_residual: f64,
    pub solve_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub problem: ProblemSpec,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub runs: Vec<RunSummary>,
    /// Reason the dense reference was skipped, if it was.
    pub oracle_skipped: Option<String>,
    pub oracle_seconds: Option<f64>,
    pub final_rel_exp_oracle: Option<f64>,
    pub final_rel_bdf_oracle: Option<f64>,
    pub final_rel_exp_bdf: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub method: Method,
    pub axis_value: f64,
    pub residual: f64,
    pub error: Option<f64>,
    pub bound_eq19: Option<f64>,
    pub m: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub problem: ProblemSpec,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub axis: super::config::SweepAxis,
    pub points: Vec<SweepPoint>,
    pub oracle_skipped: Option<String>,
}
