use std::path::PathBuf;

use fairkit_core::FairnessError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("{} malformed row(s):\n{}", .0.len(), summarize(.0))]
    Parse(Vec<RowError>),
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Core(#[from] FairnessError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Usage(String),
}

/// One rejected data row; `row` counts data rows from 1, `line` is the
/// physical line in the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub row: u64,
    pub line: u64,
    pub message: String,
}

const SHOWN_ROWS: usize = 20;

fn summarize(rows: &[RowError]) -> String {
    let mut lines: Vec<String> = rows
        .iter()
        .take(SHOWN_ROWS)
        .map(|r| format!("  row {} (line {}): {}", r.row, r.line, r.message))
        .collect();
    if rows.len() > SHOWN_ROWS {
        lines.push(format!("  ... and {} more", rows.len() - SHOWN_ROWS));
    }
    lines.join("\n")
}

pub type Result<T> = std::result::Result<T, CliError>;
