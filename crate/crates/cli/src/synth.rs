//! Seeded synthetic scored data.

use std::io::Write;

use fairkit_core::rng::stream;
use fairkit_core::OutcomeRecord;
use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Beta distribution given by its mean and concentration `alpha + beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreShape {
    pub mean: f64,
    pub concentration: f64,
}

impl ScoreShape {
    fn beta(&self) -> Result<Beta<f64>> {
        if !(self.mean > 0.0 && self.mean < 1.0)
            || !(self.concentration > 0.0 && self.concentration.is_finite())
        {
            return Err(CliError::Spec(format!(
                "score shape needs mean in (0, 1) and positive concentration, got {:?}",
                self
            )));
        }
        Beta::new(
            self.mean * self.concentration,
            (1.0 - self.mean) * self.concentration,
        )
        .map_err(|e| CliError::Spec(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub name: String,
    pub n: u64,
    pub prevalence: f64,
    pub positive: ScoreShape,
    pub negative: ScoreShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(default)]
    pub seed: Option<u64>,
    pub groups: Vec<GroupSpec>,
}

pub const DEFAULT_SEED: u64 = 7;

impl SyntheticSpec {
    /// Two groups of 10 000 with prevalences 0.5 and 0.25 and identical
    /// score distributions given the outcome.
    pub fn two_group_demo() -> Self {
        let group = |name: &str, prevalence: f64| GroupSpec {
            name: name.into(),
            n: 10_000,
            prevalence,
            positive: ScoreShape {
                mean: 0.65,
                concentration: 6.0,
            },
            negative: ScoreShape {
                mean: 0.35,
                concentration: 6.0,
            },
        };
        SyntheticSpec {
            seed: Some(DEFAULT_SEED),
            groups: vec![group("a", 0.5), group("b", 0.25)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut names: Vec<&str> = self.groups.iter().map(|g| g.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::Spec("duplicate group name".into()));
        }
        for g in &self.groups {
            if g.name.trim().is_empty() {
                return Err(CliError::Spec("empty group name".into()));
            }
            if !(g.prevalence > 0.0 && g.prevalence < 1.0) {
                return Err(CliError::Spec(format!(
                    "group `{}`: prevalence {} outside (0, 1)",
                    g.name, g.prevalence
                )));
            }
            g.positive.beta()?;
            g.negative.beta()?;
        }
        Ok(())
    }
}

/// Group `i` draws from stream `(seed, i)`: per record, the outcome, then its
/// score. Predictions are `score >= 0.5`.
pub fn generate(spec: &SyntheticSpec, seed: u64) -> Result<Vec<OutcomeRecord>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.groups.iter().map(|g| g.n as usize).sum());
    for (i, g) in spec.groups.iter().enumerate() {
        let (pos, neg) = (g.positive.beta()?, g.negative.beta()?);
        let mut rng = stream(seed, i as u64);
        for _ in 0..g.n {
            let y = rng.random::<f64>() < g.prevalence;
            let score = if y {
                pos.sample(&mut rng)
            } else {
                neg.sample(&mut rng)
            };
            out.push(OutcomeRecord::scored(g.name.as_str(), y, score)?);
        }
    }
    Ok(out)
}

/// `group,y,pred,score` with shortest round-trip score formatting.
pub fn write_csv<W: Write>(records: &[OutcomeRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["group", "y", "pred", "score"])?;
    for r in records {
        let score = r.score.map(|s| s.to_string()).unwrap_or_default();
        w.write_record([
            r.group.as_str(),
            if r.y { "1" } else { "0" },
            if r.pred { "1" } else { "0" },
            score.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
