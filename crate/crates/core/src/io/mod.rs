//! File formats: Matrix Market coordinate matrices, plain vectors and
//! experiment reports (JSON and CSV).

mod matrix_market;
mod report;

pub use matrix_market::{read_matrix_market, read_vector, write_matrix_market, write_vector};
pub use report::{
    read_report_csv, read_report_json, write_report_csv, write_report_json, ExperimentReport, ProblemDescription,
    ReportMetadata,
};

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed header: {detail}")]
    MalformedHeader { path: PathBuf, line: usize, detail: String },
    #[error("{path}: field '{field}' is not supported, only real matrices are")]
    NonRealField { path: PathBuf, field: String },
    #[error("{path}:{line}: index ({row}, {col}) outside {rows}x{cols}")]
    IndexOutOfRange {
        path: PathBuf,
        line: usize,
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("{path}:{line}: {detail}")]
    Parse { path: PathBuf, line: usize, detail: String },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}
