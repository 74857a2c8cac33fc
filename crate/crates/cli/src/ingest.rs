//! CSV to [`OutcomeRecord`]s.

use std::io::Read;
use std::path::Path;

use fairkit_core::OutcomeRecord;

use crate::error::{CliError, Result, RowError};
use crate::schema::{parse_flag, SchemaConfig};

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub records: Vec<OutcomeRecord>,
    /// Rows dropped under `skip_bad_rows`.
    pub skipped: Vec<RowError>,
}

pub fn ingest_csv(path: &Path, schema: &SchemaConfig, skip_bad_rows: bool) -> Result<Ingested> {
    let file = std::fs::File::open(path).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })?;
    ingest_reader(file, schema, skip_bad_rows)
}

struct Columns {
    group: usize,
    outcome: usize,
    prediction: Option<usize>,
    score: Option<usize>,
}

fn resolve(schema: &SchemaConfig, header: Option<&csv::StringRecord>) -> Result<Columns> {
    let find = |name: &str| -> Result<usize> {
        match header {
            Some(h) => h
                .iter()
                .position(|c| c.trim() == name)
                .ok_or_else(|| CliError::Schema(format!("missing column `{name}`"))),
            None => name.parse().map_err(|_| {
                CliError::Schema(format!(
                    "without a header, column `{name}` must be an index"
                ))
            }),
        }
    };
    Ok(Columns {
        group: find(&schema.group)?,
        outcome: find(&schema.outcome)?,
        prediction: schema.prediction.as_deref().map(find).transpose()?,
        score: schema.score.as_deref().map(find).transpose()?,
    })
}

pub fn ingest_reader<R: Read>(
    input: R,
    schema: &SchemaConfig,
    skip_bad_rows: bool,
) -> Result<Ingested> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .has_headers(schema.has_header)
        .flexible(true)
        .from_reader(input);
    let header = if schema.has_header {
        Some(reader.headers()?.clone())
    } else {
        None
    };
    let cols = resolve(schema, header.as_ref())?;

    let mut out = Ingested::default();
    let mut bad = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i as u64 + 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                bad.push(RowError {
                    row: row_no,
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = row.position().map_or(0, |p| p.line());
        match parse_row(&row, &cols, schema) {
            Ok(rec) => out.records.push(rec),
            Err(message) => bad.push(RowError {
                row: row_no,
                line,
                message,
            }),
        }
    }
    if !bad.is_empty() && !skip_bad_rows {
        return Err(CliError::Parse(bad));
    }
    out.skipped = bad;
    Ok(out)
}

fn parse_row(
    row: &csv::StringRecord,
    cols: &Columns,
    schema: &SchemaConfig,
) -> std::result::Result<OutcomeRecord, String> {
    let cell = |idx: usize| {
        row.get(idx)
            .ok_or_else(|| format!("row has no column {idx}"))
    };
    let group = cell(cols.group)?.trim();
    if group.is_empty() {
        return Err("empty group".into());
    }
    let raw_y = cell(cols.outcome)?;
    let y = parse_flag(raw_y, &schema.outcome_true, &schema.outcome_false)
        .ok_or_else(|| format!("unrecognized outcome `{raw_y}`"))?;

    let score = match cols.score {
        Some(idx) => {
            let raw = cell(idx)?.trim();
            if raw.is_empty() && cols.prediction.is_some() {
                None
            } else {
                let s: f64 = raw
                    .parse()
                    .map_err(|_| format!("score `{raw}` is not a number"))?;
                if !(0.0..=1.0).contains(&s) {
                    return Err(format!("score {s} out of range [0, 1]"));
                }
                Some(s)
            }
        }
        None => None,
    };

    match cols.prediction {
        Some(idx) => {
            let raw = cell(idx)?;
            let pred = parse_flag(raw, &schema.prediction_true, &schema.prediction_false)
                .ok_or_else(|| format!("unrecognized prediction `{raw}`"))?;
            Ok(OutcomeRecord {
                y,
                pred,
                group: group.to_string(),
                score,
            })
        }
        None => {
            let s = score.ok_or("missing score")?;
            OutcomeRecord::scored(group, y, s).map_err(|e| e.to_string())
        }
    }
}
