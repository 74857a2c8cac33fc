//! Column mapping for CSV input.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

fn default_true_tokens() -> Vec<String> {
    ["1", "true", "yes"].map(String::from).to_vec()
}

fn default_false_tokens() -> Vec<String> {
    ["0", "false", "no"].map(String::from).to_vec()
}

fn default_delimiter() -> char {
    ','
}

fn yes() -> bool {
    true
}

/// Which columns hold what, and how booleans are spelled.
///
/// Without a header row, column names are zero-based indices (`"0"`, `"3"`).
/// Token matching ignores case and surrounding whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaConfig {
    pub group: String,
    pub outcome: String,
    #[serde(default)]
    pub prediction: Option<String>,
    #[serde(default)]
    pub score: Option<String>,
    #[serde(default = "default_true_tokens")]
    pub outcome_true: Vec<String>,
    #[serde(default = "default_false_tokens")]
    pub outcome_false: Vec<String>,
    #[serde(default = "default_true_tokens")]
    pub prediction_true: Vec<String>,
    #[serde(default = "default_false_tokens")]
    pub prediction_false: Vec<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "yes")]
    pub has_header: bool,
}

impl Default for SchemaConfig {
    /// `group,y,pred,score`, the layout written by `fairkit generate`.
    fn default() -> Self {
        SchemaConfig {
            group: "group".into(),
            outcome: "y".into(),
            prediction: Some("pred".into()),
            score: Some("score".into()),
            outcome_true: default_true_tokens(),
            outcome_false: default_false_tokens(),
            prediction_true: default_true_tokens(),
            prediction_false: default_false_tokens(),
            delimiter: ',',
            has_header: true,
        }
    }
}

pub const PRESETS: &[&str] = &["default", "propublica"];

impl SchemaConfig {
    /// ProPublica's `compas-scores-two-years.csv`: race, two-year recidivism,
    /// and the Medium/High score text as the positive prediction.
    pub fn propublica() -> Self {
        SchemaConfig {
            group: "race".into(),
            outcome: "two_year_recid".into(),
            prediction: Some("score_text".into()),
            score: None,
            prediction_true: vec!["Medium".into(), "High".into()],
            prediction_false: vec!["Low".into()],
            ..SchemaConfig::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "default" => Ok(SchemaConfig::default()),
            "propublica" => Ok(SchemaConfig::propublica()),
            other => Err(CliError::Usage(format!(
                "unknown schema preset `{other}` (known: {})",
                PRESETS.join(", ")
            ))),
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::File {
            path: path.to_path_buf(),
            source,
        })?;
        let schema: SchemaConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.prediction.is_none() && self.score.is_none() {
            return Err(CliError::Schema(
                "at least one of `prediction` and `score` columns is required".into(),
            ));
        }
        if !self.delimiter.is_ascii() {
            return Err(CliError::Schema(format!(
                "delimiter {:?} is not ASCII",
                self.delimiter
            )));
        }
        for (what, t, f) in [
            ("outcome", &self.outcome_true, &self.outcome_false),
            ("prediction", &self.prediction_true, &self.prediction_false),
        ] {
            if t.is_empty() {
                return Err(CliError::Schema(format!("no true tokens for {what}")));
            }
            if let Some(both) = t
                .iter()
                .find(|x| f.iter().any(|y| y.eq_ignore_ascii_case(x)))
            {
                return Err(CliError::Schema(format!(
                    "{what} token `{both}` is both true and false"
                )));
            }
        }
        Ok(())
    }
}

/// Interpret `raw` as a boolean; `None` if it matches neither token list.
pub(crate) fn parse_flag(raw: &str, truthy: &[String], falsy: &[String]) -> Option<bool> {
    let v = raw.trim();
    if truthy.iter().any(|t| t.eq_ignore_ascii_case(v)) {
        Some(true)
    } else if falsy.iter().any(|t| t.eq_ignore_ascii_case(v)) {
        Some(false)
    } else {
        None
    }
}
