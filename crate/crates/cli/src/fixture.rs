//! Aggregate-only group data: totals, actual positives, predicted positives.

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const COMPAS_JSON: &str = include_str!("../data/compas_aggregates.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateGroup {
    pub group: String,
    pub n: u64,
    pub actual_positive: u64,
    pub predicted_positive: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateFixture {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub groups: Vec<AggregateGroup>,
}

impl AggregateFixture {
    pub fn from_json(text: &str) -> Result<Self> {
        let f: AggregateFixture = serde_json::from_str(text)?;
        f.validate()?;
        Ok(f)
    }

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "compas" => Self::from_json(COMPAS_JSON),
            other => Err(CliError::Usage(format!(
                "unknown fixture `{other}` (known: compas)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups.is_empty() {
            return Err(CliError::Usage(format!(
                "fixture `{}` has no groups",
                self.name
            )));
        }
        for g in &self.groups {
            if g.n == 0 || g.actual_positive > g.n || g.predicted_positive > g.n {
                return Err(CliError::Usage(format!(
                    "fixture group `{}`: need 0 < n and counts <= n (n={}, actual={}, predicted={})",
                    g.group, g.n, g.actual_positive, g.predicted_positive
                )));
            }
        }
        Ok(())
    }
}
