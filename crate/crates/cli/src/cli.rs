//! Argument parsing and subcommand dispatch.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairkit_core::equalizer::{
    equalize_odds_pair_at, equalize_single_at, evaluate_rule, OddsEqualization, OddsObjective,
    SingleEqualization, DEFAULT_THRESHOLD,
};
use fairkit_core::fuzz::{theorem_fuzz_partitioned, FuzzReport};
use fairkit_core::impossibility::{check_pair, EqualityMode, TolerancePolicy};
use fairkit_core::{GroupAudit, MetricId, OutcomeRecord};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::fixture::AggregateFixture;
use crate::ingest::ingest_csv;
use crate::report::{audit_fixture, audit_records, AuditOptions, Meta, PairEntry, Pairing};
use crate::schema::SchemaConfig;
use crate::synth::{generate, write_csv, SyntheticSpec, DEFAULT_SEED};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

pub const SELFTEST_DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(
    name = "fairkit",
    version,
    about = "Group fairness audits: three metric sets, their forced trade-offs, threshold equalization"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-group metrics, pairwise comparison and proportion tests.
    Audit(AuditArgs),
    /// Choose per-group thresholds that equalize a metric or both error rates.
    Equalize(EqualizeArgs),
    /// Fuzz the pairwise exclusions between the three metric sets.
    Selftest(SelftestArgs),
    /// Write a seeded synthetic scored dataset as CSV.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Markdown,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// CSV file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// JSON schema file mapping columns.
    #[arg(long, conflicts_with = "preset")]
    pub schema: Option<PathBuf>,
    /// Built-in schema: default (group,y,pred,score) or propublica.
    #[arg(long)]
    pub preset: Option<String>,
    /// Drop malformed rows instead of aborting.
    #[arg(long)]
    pub skip_bad_rows: bool,
}

#[derive(Debug, Args)]
pub struct ToleranceArgs {
    /// Absolute tolerance for metric equality.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Smallest prevalence difference treated as a difference.
    #[arg(long, default_value_t = 1e-9)]
    pub prev_tolerance: f64,
    /// Count a set as equal when any one component matches.
    #[arg(long)]
    pub any_component: bool,
}

impl ToleranceArgs {
    fn policy(&self, default_rate: f64) -> Result<TolerancePolicy> {
        let tol =
            TolerancePolicy::new(self.tolerance.unwrap_or(default_rate), self.prev_tolerance)?;
        Ok(if self.any_component {
            tol.with_mode(EqualityMode::AnyComponent)
        } else {
            tol
        })
    }
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Bundled aggregate data instead of a CSV (available: compas).
    #[arg(long, conflicts_with = "input")]
    pub fixture: Option<String>,
    #[command(flatten)]
    pub tolerance: ToleranceArgs,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Compare every group against this one (default: first by name).
    #[arg(long)]
    pub ref_group: Option<String>,
    /// Compare every pair of groups.
    #[arg(long, conflicts_with = "ref_group")]
    pub all_pairs: bool,
    /// Recorded in the report metadata.
    #[arg(long, env = "FAIRKIT_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Objective {
    /// Shared point nearest the reference group's default operating point.
    Match,
    /// Shared point with the best pooled accuracy.
    Accuracy,
}

#[derive(Debug, Args)]
pub struct EqualizeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Metric to equalize (tpr, fpr, ppv, for, calibration, pred_rate, ...).
    #[arg(long, required_unless_present = "odds", conflicts_with = "odds")]
    pub target: Option<String>,
    /// Equalize true and false positive rates together.
    #[arg(long)]
    pub odds: bool,
    #[arg(long, value_enum, default_value_t = Objective::Match)]
    pub objective: Objective,
    #[arg(long)]
    pub ref_group: Option<String>,
    /// Second group for --odds when there are more than two.
    #[arg(long)]
    pub pair_with: Option<String>,
    /// Threshold the reference group keeps.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub ref_threshold: f64,
    /// Seed for randomized rules when evaluating them.
    #[arg(long, env = "FAIRKIT_SEED")]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub tolerance: ToleranceArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, env = "FAIRKIT_SEED")]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub tolerance: ToleranceArgs,
    /// Worker threads (default: available cores).
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// JSON synthetic spec (default: two groups, prevalences 0.5 and 0.25).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, env = "FAIRKIT_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parse `argv` and run; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Audit(a) => audit_cmd(a),
        Command::Equalize(a) => equalize_cmd(a),
        Command::Selftest(a) => selftest_cmd(a),
        Command::Generate(a) => generate_cmd(a),
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn load_records(input: &InputArgs) -> Result<(Vec<OutcomeRecord>, usize, String)> {
    let path = input
        .input
        .as_deref()
        .ok_or_else(|| CliError::Usage("--input is required".into()))?;
    let schema = match (&input.schema, &input.preset) {
        (Some(p), _) => SchemaConfig::from_json_file(p)?,
        (None, Some(name)) => SchemaConfig::preset(name)?,
        (None, None) => SchemaConfig::default(),
    };
    let got = ingest_csv(path, &schema, input.skip_bad_rows)?;
    for bad in &got.skipped {
        eprintln!(
            "skipped row {} (line {}): {}",
            bad.row, bad.line, bad.message
        );
    }
    Ok((got.records, got.skipped.len(), path.display().to_string()))
}

fn audit_cmd(a: AuditArgs) -> Result<i32> {
    let mut opts = AuditOptions {
        tolerance: a.tolerance.policy(1e-9)?,
        pairing: match (a.all_pairs, a.ref_group) {
            (true, _) => Pairing::All,
            (false, Some(r)) => Pairing::Reference(r),
            (false, None) => Pairing::FirstAsReference,
        },
        seed: a.seed,
        source: String::new(),
    };
    let report = match (&a.fixture, &a.input.input) {
        (Some(name), _) => {
            opts.source = format!("fixture {name}");
            audit_fixture(&AggregateFixture::builtin(name)?, &opts)?
        }
        (None, Some(_)) => {
            let (records, skipped, source) = load_records(&a.input)?;
            opts.source = source;
            let mut r = audit_records(&records, &opts)?;
            r.meta.skipped_rows = skipped;
            r
        }
        (None, None) => {
            return Err(CliError::Usage(
                "one of --input or --fixture is required".into(),
            ))
        }
    };
    let text = match a.format {
        Format::Json => report.to_json()?,
        Format::Markdown => report.to_markdown(),
    };
    emit(a.out.as_deref(), text.as_bytes())?;
    Ok(if report.theorem_violated() {
        EXIT_VIOLATION
    } else {
        EXIT_OK
    })
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
enum Equalization {
    Single(SingleEqualization),
    Odds(OddsEqualization),
}

#[derive(Debug, Serialize)]
struct EqualizeOutput {
    equalization: Equalization,
    /// Audits of the records under the chosen rules.
    evaluated: BTreeMap<String, GroupAudit>,
    pairs: Vec<PairEntry>,
    meta: Meta,
}

fn equalize_cmd(a: EqualizeArgs) -> Result<i32> {
    let tol = a.tolerance.policy(1e-3)?;
    let seed = a.seed.unwrap_or(DEFAULT_SEED);
    let (mut records, skipped, source) = load_records(&a.input)?;
    let mut names: Vec<String> = records.iter().map(|r| r.group.clone()).collect();
    names.sort();
    names.dedup();
    let ref_group = a
        .ref_group
        .clone()
        .or_else(|| names.first().cloned())
        .ok_or_else(|| CliError::Usage("no records".into()))?;
    if !names.contains(&ref_group) {
        return Err(CliError::Usage(format!(
            "reference group `{ref_group}` not present"
        )));
    }

    let equalization = if a.odds {
        let other = match a.pair_with {
            Some(g) if names.contains(&g) && g != ref_group => g,
            Some(g) => {
                return Err(CliError::Usage(format!(
                    "--pair-with `{g}` must name another present group"
                )))
            }
            None => {
                let others: Vec<&String> = names.iter().filter(|n| **n != ref_group).collect();
                match others.as_slice() {
                    [one] => (*one).clone(),
                    _ => {
                        return Err(CliError::Usage(
                            "--odds needs exactly two groups or --pair-with".into(),
                        ))
                    }
                }
            }
        };
        records.retain(|r| r.group == ref_group || r.group == other);
        let objective = match a.objective {
            Objective::Match => OddsObjective::MatchReference,
            Objective::Accuracy => OddsObjective::MaxAccuracy,
        };
        Equalization::Odds(equalize_odds_pair_at(
            &records,
            &ref_group,
            &other,
            objective,
            a.ref_threshold,
        )?)
    } else {
        let target: MetricId = a.target.as_deref().unwrap_or_default().parse()?;
        let others: Vec<&str> = names
            .iter()
            .filter(|n| **n != ref_group)
            .map(String::as_str)
            .collect();
        Equalization::Single(equalize_single_at(
            &records,
            &ref_group,
            &others,
            target,
            &tol,
            a.ref_threshold,
        )?)
    };
    let rules = match &equalization {
        Equalization::Single(s) => &s.rules,
        Equalization::Odds(o) => &o.rules,
    };
    let evaluated = evaluate_rule(&records, rules, seed)?;
    let reference = &evaluated[&ref_group];
    let pairs: Vec<PairEntry> = evaluated
        .values()
        .filter(|g| g.group != ref_group)
        .map(|g| {
            let report = check_pair(reference, g, &tol);
            let cal = |x: &GroupAudit| x.metrics.set3.map(|s| s.calibration);
            PairEntry {
                group_a: ref_group.clone(),
                group_b: g.group.clone(),
                prevalence_gap: (report.prevalence_a - report.prevalence_b).abs(),
                calibration_gap: cal(reference).zip(cal(g)).map(|(x, y)| (x - y).abs()),
                report: Some(report),
            }
        })
        .collect();
    let violated = pairs
        .iter()
        .any(|p| p.report.as_ref().is_some_and(|r| r.theorem_violated));
    let out = EqualizeOutput {
        equalization,
        evaluated,
        pairs,
        meta: Meta {
            seed: Some(seed),
            tolerances: tol,
            version: env!("CARGO_PKG_VERSION").to_string(),
            source,
            reference: Some(ref_group),
            skipped_rows: skipped,
            notes: Vec::new(),
        },
    };
    let mut text = serde_json::to_string_pretty(&out)?;
    text.push('\n');
    emit(a.out.as_deref(), text.as_bytes())?;
    Ok(if violated { EXIT_VIOLATION } else { EXIT_OK })
}

#[derive(Debug, Serialize)]
struct SelftestOutput {
    #[serde(flatten)]
    report: FuzzReport,
    tolerances: TolerancePolicy,
    version: &'static str,
}

fn selftest_cmd(a: SelftestArgs) -> Result<i32> {
    let tol = a.tolerance.policy(1e-9)?;
    let seed = a.seed.unwrap_or(SELFTEST_DEFAULT_SEED);
    let threads = a
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let report = theorem_fuzz_partitioned(a.trials, seed, &tol, threads)?;
    let violated = report.violations > 0;
    let out = SelftestOutput {
        report,
        tolerances: tol,
        version: env!("CARGO_PKG_VERSION"),
    };
    let mut text = serde_json::to_string_pretty(&out)?;
    text.push('\n');
    emit(a.out.as_deref(), text.as_bytes())?;
    Ok(if violated { EXIT_VIOLATION } else { EXIT_OK })
}

fn generate_cmd(a: GenerateArgs) -> Result<i32> {
    let spec = match &a.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| CliError::File {
                path: p.clone(),
                source,
            })?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Spec(format!("{}: {e}", p.display())))?
        }
        None => SyntheticSpec::two_group_demo(),
    };
    let seed = a.seed.or(spec.seed).unwrap_or(DEFAULT_SEED);
    let records = generate(&spec, seed)?;
    let mut buf = Vec::new();
    write_csv(&records, &mut buf)?;
    emit(a.out.as_deref(), &buf)?;
    Ok(EXIT_OK)
}
