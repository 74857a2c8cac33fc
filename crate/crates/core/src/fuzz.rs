//! Randomized check of the three-way exclusion.
//!
//! Each trial draws two distinct prevalences and a fallible predictor, builds
//! population-level profiles for both groups that share exactly one metric
//! set, and verifies that the other two sets come apart:
//!
//! * shared Set 1 or Set 2: every defining component of both other sets
//!   differs;
//! * shared Set 3: at least one component of each other set differs.
//!
//! Trial `i` draws from its own stream keyed by `(seed, i)`, so a run is
//! bit-reproducible and independent of how trials are partitioned.

use std::thread;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FairnessError, Result};
use crate::impossibility::{compare_profiles, IncompatibilityReport, TolerancePolicy};
use crate::metrics::{pred_rate_from_set2, JointRates, MetricProfile, MetricSet};
use crate::rng::{stream, StreamRng};

const PREV_RANGE: (f64, f64) = (0.05, 0.95);
const RATE_RANGE: (f64, f64) = (0.05, 0.95);
const MIN_PREV_GAP: f64 = 0.01;
const MAX_SAMPLED_EXAMPLES: usize = 3;
const MAX_VIOLATION_EXAMPLES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzInstance {
    pub trial: u64,
    pub source: MetricSet,
    pub prev_a: f64,
    pub prev_b: f64,
    pub joint_a: JointRates,
    pub joint_b: JointRates,
    pub violation: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceTally {
    pub set1: u64,
    pub set2: u64,
    pub set3: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzReport {
    pub trials: u64,
    pub violations: u64,
    pub seed: u64,
    /// Prevalence or rate draws rejected and redrawn.
    pub resampled: u64,
    pub per_source: SourceTally,
    pub examples: Vec<FuzzInstance>,
}

impl FuzzReport {
    fn empty(seed: u64) -> Self {
        FuzzReport {
            trials: 0,
            violations: 0,
            seed,
            resampled: 0,
            per_source: SourceTally::default(),
            examples: Vec::new(),
        }
    }

    fn absorb(&mut self, trial: u64, outcome: TrialOutcome) {
        self.trials += 1;
        self.resampled += outcome.resampled;
        match outcome.instance.source {
            MetricSet::Set1 => self.per_source.set1 += 1,
            MetricSet::Set2 => self.per_source.set2 += 1,
            MetricSet::Set3 => self.per_source.set3 += 1,
        }
        let violated = outcome.instance.violation.is_some();
        if violated {
            self.violations += 1;
        }
        if (violated && self.violations as usize <= MAX_VIOLATION_EXAMPLES)
            || trial < MAX_SAMPLED_EXAMPLES as u64
        {
            self.examples.push(outcome.instance);
        }
    }
}

struct TrialOutcome {
    instance: FuzzInstance,
    resampled: u64,
}

fn uniform(rng: &mut StreamRng, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Draw from `(0, hi)`, excluding zero.
fn open_uniform(rng: &mut StreamRng, hi: f64) -> f64 {
    loop {
        let v = hi * rng.random::<f64>();
        if v > 0.0 {
            return v;
        }
    }
}

fn default_prevalence(rng: &mut StreamRng) -> f64 {
    uniform(rng, PREV_RANGE)
}

/// Run the fuzzer sequentially.
pub fn theorem_fuzz(trials: u64, seed: u64, tol: &TolerancePolicy) -> Result<FuzzReport> {
    fuzz_with_prevalence_draw(trials, seed, tol, default_prevalence)
}

/// Same report as [`theorem_fuzz`], computed on `partitions` threads.
pub fn theorem_fuzz_partitioned(
    trials: u64,
    seed: u64,
    tol: &TolerancePolicy,
    partitions: usize,
) -> Result<FuzzReport> {
    check_args(trials, tol)?;
    let partitions = partitions.clamp(1, trials as usize) as u64;
    let chunk = trials.div_ceil(partitions);
    let outcomes: Vec<Vec<(u64, TrialOutcome)>> = thread::scope(|s| {
        let handles: Vec<_> = (0..partitions)
            .map(|p| {
                let range = (p * chunk)..((p + 1) * chunk).min(trials);
                s.spawn(move || {
                    range
                        .map(|t| (t, run_trial(t, seed, tol, &mut default_prevalence)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("fuzz worker panicked"))
            .collect()
    });
    let mut report = FuzzReport::empty(seed);
    for (t, outcome) in outcomes.into_iter().flatten() {
        report.absorb(t, outcome);
    }
    Ok(report)
}

fn check_args(trials: u64, tol: &TolerancePolicy) -> Result<()> {
    if trials == 0 {
        return Err(FairnessError::InvalidArgument(
            "trials must be positive".into(),
        ));
    }
    tol.validate()
}

/// Fuzz with a custom prevalence sampler (pairs closer than the minimum gap
/// are redrawn).
pub fn fuzz_with_prevalence_draw<F>(
    trials: u64,
    seed: u64,
    tol: &TolerancePolicy,
    mut draw: F,
) -> Result<FuzzReport>
where
    F: FnMut(&mut StreamRng) -> f64,
{
    check_args(trials, tol)?;
    let mut report = FuzzReport::empty(seed);
    for t in 0..trials {
        let outcome = run_trial(t, seed, tol, &mut draw);
        report.absorb(t, outcome);
    }
    Ok(report)
}

fn draw_prevalences<F>(rng: &mut StreamRng, draw: &mut F, resampled: &mut u64) -> (f64, f64)
where
    F: FnMut(&mut StreamRng) -> f64,
{
    loop {
        let (a, b) = (draw(rng), draw(rng));
        let valid = |p: f64| p > 0.0 && p < 1.0;
        if valid(a) && valid(b) && (a - b).abs() >= MIN_PREV_GAP {
            return (a, b);
        }
        *resampled += 1;
    }
}

fn run_trial<F>(trial: u64, seed: u64, tol: &TolerancePolicy, draw: &mut F) -> TrialOutcome
where
    F: FnMut(&mut StreamRng) -> f64,
{
    let mut rng = stream(seed, trial);
    let mut resampled = 0;
    let source = match rng.random_range(0..3u8) {
        0 => MetricSet::Set1,
        1 => MetricSet::Set2,
        _ => MetricSet::Set3,
    };
    let (prev_a, prev_b, joint_a, joint_b) = loop {
        let (pa, pb) = draw_prevalences(&mut rng, draw, &mut resampled);
        if let Some((ja, jb)) = build_pair(&mut rng, source, pa, pb) {
            break (pa, pb, ja, jb);
        }
        resampled += 1;
    };
    let violation = judge(source, &joint_a, &joint_b, tol);
    TrialOutcome {
        instance: FuzzInstance {
            trial,
            source,
            prev_a,
            prev_b,
            joint_a,
            joint_b,
            violation,
        },
        resampled,
    }
}

/// Population joints for two groups sharing `source`, or `None` if the draw
/// leaves the valid region.
fn build_pair(
    rng: &mut StreamRng,
    source: MetricSet,
    pa: f64,
    pb: f64,
) -> Option<(JointRates, JointRates)> {
    match source {
        MetricSet::Set1 => {
            let tpr = uniform(rng, RATE_RANGE);
            let fpr = open_uniform(rng, tpr);
            Some((
                JointRates::from_set1(pa, tpr, fpr),
                JointRates::from_set1(pb, tpr, fpr),
            ))
        }
        MetricSet::Set2 => {
            let ppv = uniform(rng, RATE_RANGE);
            let for_rate = open_uniform(rng, ppv);
            let qa = pred_rate_from_set2(ppv, for_rate, pa).ok()?;
            let qb = pred_rate_from_set2(ppv, for_rate, pb).ok()?;
            if !(qa > 0.0 && qa < 1.0 && qb > 0.0 && qb < 1.0) {
                return None;
            }
            Some((
                JointRates::from_set2(qa, ppv, for_rate),
                JointRates::from_set2(qb, ppv, for_rate),
            ))
        }
        MetricSet::Set3 => {
            let tpr = uniform(rng, RATE_RANGE);
            let fpr_a = open_uniform(rng, tpr);
            let cal = tpr + fpr_a * (1.0 - pa) / pa;
            let fpr_b = (cal - tpr) * pb / (1.0 - pb);
            if !(fpr_b > 0.0 && fpr_b < 1.0) {
                return None;
            }
            Some((
                JointRates::from_set1(pa, tpr, fpr_a),
                JointRates::from_set1(pb, tpr, fpr_b),
            ))
        }
    }
}

fn judge(
    source: MetricSet,
    ja: &JointRates,
    jb: &JointRates,
    tol: &TolerancePolicy,
) -> Option<String> {
    let (pa, pb) = match (MetricProfile::from_joint(ja), MetricProfile::from_joint(jb)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return Some("profile construction failed".into()),
    };
    let strict = TolerancePolicy {
        mode: crate::impossibility::EqualityMode::BothComponents,
        ..*tol
    };
    let report = compare_profiles(&pa, &pb, &strict);
    if report.theorem_violated {
        return Some("tripwire: two sets equal at once".into());
    }
    if report.set_equal(source) != Some(true) {
        return Some(format!("construction did not equalize {source}"));
    }
    let mut problems = Vec::new();
    for target in MetricSet::ALL.into_iter().filter(|&t| t != source) {
        let differing = count_differing(&report, target, tol.eps_rate);
        let needed = match source {
            MetricSet::Set3 => 1,
            _ => target.components().len(),
        };
        if differing.is_none_or(|d| d < needed) {
            problems.push(format!(
                "{target}: {} of {} components differ, need {needed}",
                differing.unwrap_or(0),
                target.components().len()
            ));
        }
    }
    if problems.is_empty() {
        None
    } else {
        Some(problems.join("; "))
    }
}

fn count_differing(report: &IncompatibilityReport, set: MetricSet, eps: f64) -> Option<usize> {
    set.components()
        .iter()
        .map(|&m| report.gap(m).map(|g| usize::from(g > eps)))
        .sum()
}
