//! Confusion counts and the three metric sets.
//!
//! Counts are exact integers; every metric is a single floating-point
//! division performed at the end. Undefined ratios surface as
//! [`FairnessError::DegenerateDenominator`], never as NaN.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{FairnessError, Result};

/// One audited individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    /// The event actually occurred.
    pub y: bool,
    /// The predictor flagged the event.
    pub pred: bool,
    pub group: String,
    /// Risk score in `[0, 1]`; only needed for threshold search.
    pub score: Option<f64>,
}

impl OutcomeRecord {
    pub fn new(group: impl Into<String>, y: bool, pred: bool) -> Self {
        OutcomeRecord {
            y,
            pred,
            group: group.into(),
            score: None,
        }
    }

    pub fn scored(group: impl Into<String>, y: bool, score: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(FairnessError::domain(format!(
                "score {score} outside [0, 1]"
            )));
        }
        Ok(OutcomeRecord {
            y,
            pred: score >= 0.5,
            group: group.into(),
            score: Some(score),
        })
    }
}

// ---------------------------------------------------------------------------
// Counts
// ---------------------------------------------------------------------------

/// Exact 2x2 confusion counts for one group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub const fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        ConfusionCounts { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn actual_positive(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn actual_negative(&self) -> u64 {
        self.fp + self.tn
    }

    pub fn predicted_positive(&self) -> u64 {
        self.tp + self.fp
    }

    pub fn predicted_negative(&self) -> u64 {
        self.fn_ + self.tn
    }

    /// Increment the cell selected by `(y, pred)`.
    pub fn record(&mut self, y: bool, pred: bool) {
        match (pred, y) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn joint(&self) -> JointRates {
        JointRates {
            tp: self.tp as f64,
            fp: self.fp as f64,
            fn_: self.fn_ as f64,
            tn: self.tn as f64,
        }
    }
}

impl Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, rhs: Self) -> Self {
        ConfusionCounts {
            tp: self.tp + rhs.tp,
            fp: self.fp + rhs.fp,
            fn_: self.fn_ + rhs.fn_,
            tn: self.tn + rhs.tn,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

/// Non-negative masses of the four confusion cells on any scale.
///
/// Integer counts and population-level joint probabilities share every
/// metric formula through this type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointRates {
    pub tp: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub tn: f64,
}

impl JointRates {
    /// Population joint for a predictor with the given Set 1 rates.
    pub fn from_set1(prevalence: f64, tpr: f64, fpr: f64) -> Self {
        JointRates {
            tp: tpr * prevalence,
            fp: fpr * (1.0 - prevalence),
            fn_: (1.0 - tpr) * prevalence,
            tn: (1.0 - fpr) * (1.0 - prevalence),
        }
    }

    /// Population joint for a predictor with the given Set 2 rates and
    /// prediction rate.
    pub fn from_set2(pred_rate: f64, ppv: f64, for_rate: f64) -> Self {
        JointRates {
            tp: ppv * pred_rate,
            fp: (1.0 - ppv) * pred_rate,
            fn_: for_rate * (1.0 - pred_rate),
            tn: (1.0 - for_rate) * (1.0 - pred_rate),
        }
    }

    fn total(&self) -> f64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Tally records per group. Groups appear in the output iff they appear in
/// the input.
pub fn accumulate<'a, I>(records: I) -> BTreeMap<String, ConfusionCounts>
where
    I: IntoIterator<Item = &'a OutcomeRecord>,
{
    let mut out: BTreeMap<String, ConfusionCounts> = BTreeMap::new();
    for r in records {
        out.entry(r.group.clone()).or_default().record(r.y, r.pred);
    }
    out
}

// ---------------------------------------------------------------------------
// Metric sets
// ---------------------------------------------------------------------------

/// Event-conditioned prediction rates (equalized odds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Set1Metrics {
    /// `P(Pred|Y)`: sensitivity, recall.
    pub tpr: f64,
    /// `P(Pred|¬Y)`: fallout.
    pub fpr: f64,
    /// `P(¬Pred|Y)`.
    pub fnr: f64,
    /// `P(¬Pred|¬Y)`: specificity.
    pub tnr: f64,
}

/// Prediction-conditioned event rates (predictive parity).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Set2Metrics {
    /// `P(Y|Pred)`: precision.
    pub ppv: f64,
    /// `P(Y|¬Pred)`: false omission rate.
    pub for_rate: f64,
    /// `P(¬Y|Pred)`: false discovery rate.
    pub fdr: f64,
    /// `P(¬Y|¬Pred)`: negative predictive value.
    pub npv: f64,
}

/// Ratio of positive predictions to actual occurrences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Set3Metric {
    /// `P(Pred)/P(Y)`, also called severity or harshness.
    pub calibration: f64,
    /// `P(Pred)`.
    pub pred_rate: f64,
    /// `P(Y)`.
    pub prevalence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorClass {
    /// No false positives and no false negatives.
    Perfect,
    TrivialAlwaysPositive,
    TrivialAlwaysNegative,
    /// Anything else; the impossibility results apply here.
    Fallible,
}

impl PredictorClass {
    fn from_joint(j: &JointRates) -> Self {
        if j.fp == 0.0 && j.fn_ == 0.0 {
            PredictorClass::Perfect
        } else if j.fn_ == 0.0 && j.tn == 0.0 {
            PredictorClass::TrivialAlwaysPositive
        } else if j.tp == 0.0 && j.fp == 0.0 {
            PredictorClass::TrivialAlwaysNegative
        } else {
            PredictorClass::Fallible
        }
    }
}

impl fmt::Display for PredictorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PredictorClass::Perfect => "perfect",
            PredictorClass::TrivialAlwaysPositive => "always-positive",
            PredictorClass::TrivialAlwaysNegative => "always-negative",
            PredictorClass::Fallible => "fallible",
        };
        f.write_str(s)
    }
}

fn set1_from_joint(j: &JointRates) -> Result<Set1Metrics> {
    let pos = j.tp + j.fn_;
    let neg = j.fp + j.tn;
    if pos <= 0.0 {
        return Err(FairnessError::DegenerateDenominator(
            "no actual positives in group",
        ));
    }
    if neg <= 0.0 {
        return Err(FairnessError::DegenerateDenominator(
            "no actual negatives in group",
        ));
    }
    Ok(Set1Metrics {
        tpr: j.tp / pos,
        fpr: j.fp / neg,
        fnr: j.fn_ / pos,
        tnr: j.tn / neg,
    })
}

fn set2_from_joint(j: &JointRates) -> Result<Set2Metrics> {
    let pp = j.tp + j.fp;
    let pn = j.fn_ + j.tn;
    if pp <= 0.0 {
        return Err(FairnessError::DegenerateDenominator(
            "no positive predictions in group",
        ));
    }
    if pn <= 0.0 {
        return Err(FairnessError::DegenerateDenominator(
            "no negative predictions in group",
        ));
    }
    Ok(Set2Metrics {
        ppv: j.tp / pp,
        for_rate: j.fn_ / pn,
        fdr: j.fp / pp,
        npv: j.tn / pn,
    })
}

fn set3_from_joint(j: &JointRates) -> Result<Set3Metric> {
    let pos = j.tp + j.fn_;
    if pos <= 0.0 {
        return Err(FairnessError::DegenerateDenominator(
            "no actual positives in group",
        ));
    }
    let total = j.total();
    let predicted = j.tp + j.fp;
    Ok(Set3Metric {
        calibration: predicted / pos,
        pred_rate: predicted / total,
        prevalence: pos / total,
    })
}

pub fn set1_metrics(counts: &ConfusionCounts) -> Result<Set1Metrics> {
    set1_from_joint(&counts.joint())
}

pub fn set2_metrics(counts: &ConfusionCounts) -> Result<Set2Metrics> {
    set2_from_joint(&counts.joint())
}

pub fn set3_metric(counts: &ConfusionCounts) -> Result<Set3Metric> {
    set3_from_joint(&counts.joint())
}

/// Precedence: perfect, then always-positive, then always-negative.
pub fn classify(counts: &ConfusionCounts) -> Result<PredictorClass> {
    if counts.total() == 0 {
        return Err(FairnessError::EmptyGroup);
    }
    Ok(PredictorClass::from_joint(&counts.joint()))
}

// ---------------------------------------------------------------------------
// Bridges between the sets
// ---------------------------------------------------------------------------

fn check_rate(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(FairnessError::domain(format!(
            "{name} = {v} outside [0, 1]"
        )))
    }
}

/// Calibration implied by Set 1 rates: `tpr + fpr * (1 - p) / p`.
pub fn calibration_from_set1(tpr: f64, fpr: f64, prevalence: f64) -> Result<f64> {
    check_rate("tpr", tpr)?;
    check_rate("fpr", fpr)?;
    if !(prevalence > 0.0 && prevalence <= 1.0) {
        return Err(FairnessError::domain(format!(
            "prevalence {prevalence} must lie in (0, 1]"
        )));
    }
    Ok(tpr + fpr * (1.0 - prevalence) / prevalence)
}

/// Posterior rates via Bayes' rule.
pub fn set2_from_set1(set1: &Set1Metrics, prevalence: f64) -> Result<Set2Metrics> {
    if !(prevalence > 0.0 && prevalence < 1.0) {
        return Err(FairnessError::domain(format!(
            "prevalence {prevalence} must lie in (0, 1)"
        )));
    }
    let p = prevalence;
    let joint = JointRates {
        tp: set1.tpr * p,
        fp: set1.fpr * (1.0 - p),
        fn_: set1.fnr * p,
        tn: set1.tnr * (1.0 - p),
    };
    set2_from_joint(&joint)
}

/// Solve `p = ppv * q + for_rate * (1 - q)` for the prediction rate `q`.
pub fn pred_rate_from_set2(ppv: f64, for_rate: f64, prevalence: f64) -> Result<f64> {
    check_rate("ppv", ppv)?;
    check_rate("for_rate", for_rate)?;
    check_rate("prevalence", prevalence)?;
    if ppv == for_rate {
        return Err(FairnessError::domain(
            "ppv equals for_rate: prediction carries no information, P(Pred) is unidentifiable",
        ));
    }
    let q = (prevalence - for_rate) / (ppv - for_rate);
    // Round-off from upstream divisions can push an exact 0 or 1 out by an ulp.
    const SLACK: f64 = 1e-12;
    if !(-SLACK..=1.0 + SLACK).contains(&q) {
        return Err(FairnessError::domain(format!(
            "implied prediction rate {q} outside [0, 1]: inconsistent inputs"
        )));
    }
    Ok(q.clamp(0.0, 1.0))
}

// ---------------------------------------------------------------------------
// Audits
// ---------------------------------------------------------------------------

/// The three metric families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSet {
    Set1,
    Set2,
    Set3,
}

impl MetricSet {
    pub const ALL: [MetricSet; 3] = [MetricSet::Set1, MetricSet::Set2, MetricSet::Set3];

    /// The two components whose equality defines equality of the set.
    pub fn components(self) -> &'static [MetricId] {
        match self {
            MetricSet::Set1 => &[MetricId::Tpr, MetricId::Fpr],
            MetricSet::Set2 => &[MetricId::Ppv, MetricId::ForRate],
            MetricSet::Set3 => &[MetricId::Calibration],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MetricSet::Set1 => "Set 1 (equalized odds: P(Pred|Y), P(Pred|¬Y))",
            MetricSet::Set2 => "Set 2 (predictive parity: P(Y|Pred), P(Y|¬Pred))",
            MetricSet::Set3 => "Set 3 (calibration: P(Pred)/P(Y))",
        }
    }
}

impl fmt::Display for MetricSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricSet::Set1 => "set1",
            MetricSet::Set2 => "set2",
            MetricSet::Set3 => "set3",
        })
    }
}

/// Every per-group quantity the auditor can compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    Tpr,
    Fpr,
    Fnr,
    Tnr,
    Ppv,
    ForRate,
    Fdr,
    Npv,
    Calibration,
    PredRate,
}

impl MetricId {
    pub const ALL: [MetricId; 10] = [
        MetricId::Tpr,
        MetricId::Fpr,
        MetricId::Fnr,
        MetricId::Tnr,
        MetricId::Ppv,
        MetricId::ForRate,
        MetricId::Fdr,
        MetricId::Npv,
        MetricId::Calibration,
        MetricId::PredRate,
    ];

    /// Owning set, or `None` for the plain prediction rate.
    pub fn set(self) -> Option<MetricSet> {
        match self {
            MetricId::Tpr | MetricId::Fpr | MetricId::Fnr | MetricId::Tnr => Some(MetricSet::Set1),
            MetricId::Ppv | MetricId::ForRate | MetricId::Fdr | MetricId::Npv => {
                Some(MetricSet::Set2)
            }
            MetricId::Calibration => Some(MetricSet::Set3),
            MetricId::PredRate => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::Tpr => "tpr",
            MetricId::Fpr => "fpr",
            MetricId::Fnr => "fnr",
            MetricId::Tnr => "tnr",
            MetricId::Ppv => "ppv",
            MetricId::ForRate => "for_rate",
            MetricId::Fdr => "fdr",
            MetricId::Npv => "npv",
            MetricId::Calibration => "calibration",
            MetricId::PredRate => "pred_rate",
        }
    }

    /// Long human-readable name.
    pub fn describe(self) -> &'static str {
        match self {
            MetricId::Tpr => "TPR P(Pred|Y) (sensitivity, recall)",
            MetricId::Fpr => "FPR P(Pred|¬Y) (fallout)",
            MetricId::Fnr => "FNR P(¬Pred|Y)",
            MetricId::Tnr => "TNR P(¬Pred|¬Y) (specificity)",
            MetricId::Ppv => "PPV P(Y|Pred) (precision)",
            MetricId::ForRate => "FOR P(Y|¬Pred) (false omission rate)",
            MetricId::Fdr => "FDR P(¬Y|Pred) (false discovery rate)",
            MetricId::Npv => "NPV P(¬Y|¬Pred)",
            MetricId::Calibration => "Calibration P(Pred)/P(Y) (severity)",
            MetricId::PredRate => "Prediction rate P(Pred)",
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricId {
    type Err = FairnessError;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let id = match lower.as_str() {
            "tpr" | "sensitivity" | "recall" => MetricId::Tpr,
            "fpr" | "fallout" => MetricId::Fpr,
            "fnr" => MetricId::Fnr,
            "tnr" | "specificity" => MetricId::Tnr,
            "ppv" | "precision" => MetricId::Ppv,
            "for" | "for_rate" => MetricId::ForRate,
            "fdr" => MetricId::Fdr,
            "npv" => MetricId::Npv,
            "calibration" | "severity" => MetricId::Calibration,
            "pred_rate" => MetricId::PredRate,
            _ => {
                return Err(FairnessError::InvalidArgument(format!(
                    "unknown metric `{s}`"
                )));
            }
        };
        Ok(id)
    }
}

/// Prevalence, class and every defined metric of one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricProfile {
    pub prevalence: f64,
    pub pred_rate: f64,
    pub set1: Option<Set1Metrics>,
    pub set2: Option<Set2Metrics>,
    pub set3: Option<Set3Metric>,
    pub klass: PredictorClass,
}

impl MetricProfile {
    pub fn from_joint(joint: &JointRates) -> Result<Self> {
        let total = joint.total();
        if total <= 0.0 {
            return Err(FairnessError::EmptyGroup);
        }
        Ok(MetricProfile {
            prevalence: (joint.tp + joint.fn_) / total,
            pred_rate: (joint.tp + joint.fp) / total,
            set1: set1_from_joint(joint).ok(),
            set2: set2_from_joint(joint).ok(),
            set3: set3_from_joint(joint).ok(),
            klass: PredictorClass::from_joint(joint),
        })
    }

    pub fn from_counts(counts: &ConfusionCounts) -> Result<Self> {
        Self::from_joint(&counts.joint())
    }

    pub fn get(&self, metric: MetricId) -> Option<f64> {
        match metric {
            MetricId::Tpr => self.set1.map(|s| s.tpr),
            MetricId::Fpr => self.set1.map(|s| s.fpr),
            MetricId::Fnr => self.set1.map(|s| s.fnr),
            MetricId::Tnr => self.set1.map(|s| s.tnr),
            MetricId::Ppv => self.set2.map(|s| s.ppv),
            MetricId::ForRate => self.set2.map(|s| s.for_rate),
            MetricId::Fdr => self.set2.map(|s| s.fdr),
            MetricId::Npv => self.set2.map(|s| s.npv),
            MetricId::Calibration => self.set3.map(|s| s.calibration),
            MetricId::PredRate => Some(self.pred_rate),
        }
    }
}

/// Per-group audit: counts plus every metric they support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAudit {
    pub group: String,
    pub counts: ConfusionCounts,
    #[serde(flatten)]
    pub metrics: MetricProfile,
}

impl GroupAudit {
    pub fn from_counts(group: impl Into<String>, counts: ConfusionCounts) -> Result<Self> {
        Ok(GroupAudit {
            group: group.into(),
            counts,
            metrics: MetricProfile::from_counts(&counts)?,
        })
    }

    /// Audit every group present in `records`.
    pub fn from_records(records: &[OutcomeRecord]) -> Result<Vec<GroupAudit>> {
        accumulate(records)
            .into_iter()
            .map(|(g, c)| GroupAudit::from_counts(g, c))
            .collect()
    }
}
