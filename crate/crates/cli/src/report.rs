//! Audit reports: per-group metrics, pairwise comparisons, proportion tests.

use std::fmt::Write as _;

use fairkit_core::impossibility::{check_pair, IncompatibilityReport, TolerancePolicy};
use fairkit_core::stats::EXACT_BINOMIAL_MAX_N;
use fairkit_core::stats::{
    exact_binomial, one_sample_proportion_z, two_proportion_z, TestMethod, TestResult,
};
use fairkit_core::{GroupAudit, MetricId, MetricSet, OutcomeRecord, Set3Metric};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::fixture::AggregateFixture;

/// A group known only through its totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateAudit {
    pub group: String,
    pub n: u64,
    pub actual_positive: u64,
    pub predicted_positive: u64,
    pub prevalence: f64,
    pub pred_rate: f64,
    pub set3: Option<Set3Metric>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupEntry {
    Records(GroupAudit),
    Aggregate(AggregateAudit),
}

impl GroupEntry {
    pub fn name(&self) -> &str {
        match self {
            GroupEntry::Records(a) => &a.group,
            GroupEntry::Aggregate(a) => &a.group,
        }
    }

    fn totals(&self) -> (u64, u64, u64) {
        match self {
            GroupEntry::Records(a) => (
                a.counts.total(),
                a.counts.actual_positive(),
                a.counts.predicted_positive(),
            ),
            GroupEntry::Aggregate(a) => (a.n, a.actual_positive, a.predicted_positive),
        }
    }

    pub fn prevalence(&self) -> f64 {
        match self {
            GroupEntry::Records(a) => a.metrics.prevalence,
            GroupEntry::Aggregate(a) => a.prevalence,
        }
    }

    /// Metric value if it is defined for this group.
    pub fn metric(&self, m: MetricId) -> Option<f64> {
        match self {
            GroupEntry::Records(a) => a.metrics.get(m),
            GroupEntry::Aggregate(a) => match m {
                MetricId::Calibration => a.set3.map(|s| s.calibration),
                MetricId::PredRate => Some(a.pred_rate),
                _ => None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub group_a: String,
    pub group_b: String,
    pub prevalence_gap: f64,
    pub calibration_gap: Option<f64>,
    /// Full comparison; absent for aggregate-only groups.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub report: Option<IncompatibilityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestEntry {
    pub group: String,
    pub hypothesis: String,
    pub result: TestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub seed: Option<u64>,
    pub tolerances: TolerancePolicy,
    pub version: String,
    pub source: String,
    pub reference: Option<String>,
    pub skipped_rows: usize,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub groups: Vec<GroupEntry>,
    pub pairs: Vec<PairEntry>,
    pub tests: Vec<TestEntry>,
    pub meta: Meta,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Pairing {
    /// Every group against one reference; lexicographically first if unset.
    #[default]
    FirstAsReference,
    Reference(String),
    All,
}

#[derive(Debug, Clone, Default)]
pub struct AuditOptions {
    pub tolerance: TolerancePolicy,
    pub pairing: Pairing,
    pub seed: Option<u64>,
    pub source: String,
}

pub fn audit_records(records: &[OutcomeRecord], opts: &AuditOptions) -> Result<AuditReport> {
    let groups = GroupAudit::from_records(records)?
        .into_iter()
        .map(GroupEntry::Records)
        .collect();
    build(groups, opts)
}

pub fn audit_fixture(fixture: &AggregateFixture, opts: &AuditOptions) -> Result<AuditReport> {
    fixture.validate()?;
    let mut groups: Vec<GroupEntry> = fixture
        .groups
        .iter()
        .map(|g| {
            let prevalence = g.actual_positive as f64 / g.n as f64;
            let pred_rate = g.predicted_positive as f64 / g.n as f64;
            GroupEntry::Aggregate(AggregateAudit {
                group: g.group.clone(),
                n: g.n,
                actual_positive: g.actual_positive,
                predicted_positive: g.predicted_positive,
                prevalence,
                pred_rate,
                set3: (g.actual_positive > 0).then(|| Set3Metric {
                    calibration: g.predicted_positive as f64 / g.actual_positive as f64,
                    pred_rate,
                    prevalence,
                }),
            })
        })
        .collect();
    groups.sort_by(|a, b| a.name().cmp(b.name()));
    build(groups, opts)
}

fn build(groups: Vec<GroupEntry>, opts: &AuditOptions) -> Result<AuditReport> {
    opts.tolerance.validate()?;
    if groups.is_empty() {
        return Err(CliError::Usage("no groups to audit".into()));
    }
    let index = |name: &str| {
        groups
            .iter()
            .position(|g| g.name() == name)
            .ok_or_else(|| CliError::Usage(format!("reference group `{name}` not present")))
    };
    let (reference, pair_idx): (Option<String>, Vec<(usize, usize)>) = match &opts.pairing {
        Pairing::All => (
            None,
            (0..groups.len())
                .flat_map(|i| (i + 1..groups.len()).map(move |j| (i, j)))
                .collect(),
        ),
        p => {
            let r = match p {
                Pairing::Reference(name) => index(name)?,
                _ => 0,
            };
            (
                Some(groups[r].name().to_string()),
                (0..groups.len())
                    .filter(|&j| j != r)
                    .map(|j| (r, j))
                    .collect(),
            )
        }
    };

    let pairs = pair_idx
        .into_iter()
        .map(|(i, j)| pair(&groups[i], &groups[j], &opts.tolerance))
        .collect();

    let mut notes = Vec::new();
    let mut tests = Vec::new();
    for g in &groups {
        group_tests(g, &mut tests, &mut notes);
    }

    Ok(AuditReport {
        groups,
        pairs,
        tests,
        meta: Meta {
            seed: opts.seed,
            tolerances: opts.tolerance,
            version: env!("CARGO_PKG_VERSION").to_string(),
            source: opts.source.clone(),
            reference,
            skipped_rows: 0,
            notes,
        },
    })
}

fn pair(a: &GroupEntry, b: &GroupEntry, tol: &TolerancePolicy) -> PairEntry {
    let report = match (a, b) {
        (GroupEntry::Records(x), GroupEntry::Records(y)) => Some(check_pair(x, y, tol)),
        _ => None,
    };
    let cal = |g: &GroupEntry| g.metric(MetricId::Calibration);
    PairEntry {
        group_a: a.name().to_string(),
        group_b: b.name().to_string(),
        prevalence_gap: (a.prevalence() - b.prevalence()).abs(),
        calibration_gap: cal(a).zip(cal(b)).map(|(x, y)| (x - y).abs()),
        report,
    }
}

fn group_tests(g: &GroupEntry, tests: &mut Vec<TestEntry>, notes: &mut Vec<String>) {
    let (n, actual, predicted) = g.totals();
    let p0 = actual as f64 / n as f64;
    let one_sample = "predicted positives against prevalence";
    let mut push = |hypothesis: &str, r: fairkit_core::Result<TestResult>| match r {
        Ok(result) => tests.push(TestEntry {
            group: g.name().to_string(),
            hypothesis: hypothesis.to_string(),
            result,
        }),
        Err(e) => notes.push(format!("{}: {hypothesis} not tested: {e}", g.name())),
    };
    push(one_sample, one_sample_proportion_z(predicted, n, p0));
    if n <= EXACT_BINOMIAL_MAX_N {
        push(one_sample, exact_binomial(predicted, n, p0));
    }
    push(
        "prediction rate against prevalence as two samples",
        two_proportion_z(predicted, n, actual, n),
    );
}

impl AuditReport {
    pub fn theorem_violated(&self) -> bool {
        self.pairs
            .iter()
            .any(|p| p.report.as_ref().is_some_and(|r| r.theorem_violated))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn to_markdown(&self) -> String {
        let mut md = String::new();
        let names: Vec<&str> = self.groups.iter().map(|g| g.name()).collect();
        let _ = writeln!(md, "# Fairness audit: {}\n", self.meta.source);
        if let Some(r) = &self.meta.reference {
            let _ = writeln!(md, "Reference group: {r}\n");
        }

        let table = |md: &mut String, title: &str, rows: &[(String, Vec<Option<f64>>)]| {
            let _ = writeln!(md, "## {title}\n");
            let _ = writeln!(md, "| metric | {} |", names.join(" | "));
            let _ = writeln!(md, "|---|{}", "---:|".repeat(names.len()));
            for (label, values) in rows {
                let cells: Vec<String> = values.iter().map(|v| fmt4(*v)).collect();
                let _ = writeln!(md, "| {label} | {} |", cells.join(" | "));
            }
            md.push('\n');
        };
        let row = |m: MetricId| {
            (
                m.describe().to_string(),
                self.groups.iter().map(|g| g.metric(m)).collect(),
            )
        };

        for set in MetricSet::ALL {
            let rows: Vec<(String, Vec<Option<f64>>)> = match set {
                MetricSet::Set1 => [MetricId::Tpr, MetricId::Fpr, MetricId::Fnr, MetricId::Tnr]
                    .map(row)
                    .to_vec(),
                MetricSet::Set2 => [
                    MetricId::Ppv,
                    MetricId::ForRate,
                    MetricId::Fdr,
                    MetricId::Npv,
                ]
                .map(row)
                .to_vec(),
                MetricSet::Set3 => vec![
                    (
                        "Prevalence P(Y)".to_string(),
                        self.groups.iter().map(|g| Some(g.prevalence())).collect(),
                    ),
                    row(MetricId::PredRate),
                    row(MetricId::Calibration),
                ],
            };
            if set != MetricSet::Set3 && rows.iter().all(|(_, v)| v.iter().all(Option::is_none)) {
                let _ = writeln!(
                    md,
                    "## {}\n\nNot available: joint counts unknown.\n",
                    set.label()
                );
                continue;
            }
            table(&mut md, set.label(), &rows);
        }

        if !self.pairs.is_empty() {
            let _ = writeln!(md, "## Pairwise comparison\n");
            let _ = writeln!(md, "| pair | prevalence gap | calibration gap | set1 equal | set2 equal | set3 equal | theorem violated |");
            let _ = writeln!(md, "|---|---:|---:|---|---|---|---|");
            for p in &self.pairs {
                let flag = |s: MetricSet| match p.report.as_ref().and_then(|r| r.set_equal(s)) {
                    Some(true) => "yes",
                    Some(false) => "no",
                    None => "n/a",
                };
                let violated = match &p.report {
                    Some(r) if r.theorem_violated => "YES",
                    Some(_) => "no",
                    None => "n/a",
                };
                let _ = writeln!(
                    md,
                    "| {} vs {} | {} | {} | {} | {} | {} | {} |",
                    p.group_a,
                    p.group_b,
                    fmt4(Some(p.prevalence_gap)),
                    fmt4(p.calibration_gap),
                    flag(MetricSet::Set1),
                    flag(MetricSet::Set2),
                    flag(MetricSet::Set3),
                    violated
                );
            }
            md.push('\n');
            let forced: Vec<String> = self
                .pairs
                .iter()
                .filter_map(|p| p.report.as_ref().map(|r| (p, r)))
                .flat_map(|(p, r)| {
                    r.forced.iter().map(move |f| {
                        format!(
                            "- {} vs {}: equal {} forces {} apart by {:.4}",
                            p.group_a, p.group_b, f.source_set, f.component, f.gap
                        )
                    })
                })
                .collect();
            if !forced.is_empty() {
                let _ = writeln!(md, "Forced differences:\n\n{}\n", forced.join("\n"));
            }
        }

        if !self.tests.is_empty() {
            let _ = writeln!(md, "## Proportion tests\n");
            let _ = writeln!(
                md,
                "| group | test | hypothesis | statistic | p (two-sided) |"
            );
            let _ = writeln!(md, "|---|---|---|---:|---:|");
            for t in &self.tests {
                let method = serde_json::to_value(t.result.method)
                    .ok()
                    .and_then(|v| v.as_str().map(String::from))
                    .unwrap_or_default();
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {} | {:.4e} |",
                    t.group,
                    method,
                    t.hypothesis,
                    if t.result.method == TestMethod::ExactBinomial {
                        format!("{:.4e}", t.result.statistic)
                    } else {
                        fmt4(Some(t.result.statistic))
                    },
                    t.result.p_two_sided
                );
            }
            md.push('\n');
        }
        for n in &self.meta.notes {
            let _ = writeln!(md, "> {n}");
        }
        md
    }
}

fn fmt4(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}
