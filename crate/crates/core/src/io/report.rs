use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, IoError};
use crate::bounds::BoundReport;
use crate::fem::CdrDescription;
use crate::krylov::{BreakdownInfo, ResidualRecord, SolveResult, SolveStatus, StoppingNorm};
use crate::schwarz::PartitionSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ProblemDescription {
    Cdr(CdrDescription),
    Matrix { path: String, dim: usize, nnz: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub problem: ProblemDescription,
    pub solver: String,
    pub preconditioner: String,
    pub weight: String,
    pub partition: Option<PartitionSpec>,
    pub rel_tolerance: f64,
    pub max_iterations: usize,
    pub stopping_norm: StoppingNorm,
}

/// One solver run: what was solved, how, and the residual history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub metadata: ReportMetadata,
    pub status: SolveStatus,
    pub iterations: usize,
    pub residuals: Vec<ResidualRecord<f64>>,
    pub restarts: Vec<usize>,
    pub breakdown: Option<BreakdownInfo<f64>>,
    pub bounds: Option<BoundReport<f64>>,
    pub wall_time_seconds: f64,
}

impl ExperimentReport {
    pub fn from_result(metadata: ReportMetadata, result: &SolveResult<f64>, wall_time_seconds: f64) -> Self {
        Self {
            metadata,
            status: result.status(),
            iterations: result.iterations,
            residuals: result.trace.residuals.clone(),
            restarts: result.trace.restarts.clone(),
            breakdown: result.trace.breakdown,
            bounds: None,
            wall_time_seconds,
        }
    }
}

pub fn write_report_json(report: &ExperimentReport, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(report).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn read_report_json(path: impl AsRef<Path>) -> Result<ExperimentReport, IoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Columns `iteration,res_w,res_euclid`, floats with 17 significant digits.
pub fn write_report_csv(residuals: &[ResidualRecord<f64>], path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let csv_err = |source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["iteration", "res_w", "res_euclid"]).map_err(csv_err)?;
    for r in residuals {
        w.write_record([
            r.iteration.to_string(),
            format!("{:.16e}", r.res_w),
            format!("{:.16e}", r.res_euclid),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_report_csv(path: impl AsRef<Path>) -> Result<Vec<ResidualRecord<f64>>, IoError> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|source| IoError::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    r.deserialize()
        .collect::<Result<Vec<ResidualRecord<f64>>, _>>()
        .map_err(|source| IoError::Csv {
            path: path.to_path_buf(),
            source,
        })
}
