//! Pairwise incompatibility analysis.
//!
//! When prevalence differs between two groups and the predictor makes both
//! kinds of error, at most one of the three metric sets can be equal across
//! the groups. [`check_pair`] reports which sets coincide and lists the gaps
//! in the others; the `forced_gaps_*` functions compute those gaps
//! analytically from the shared rates.

use serde::{Deserialize, Serialize};

use crate::error::{FairnessError, Result};
use crate::metrics::{
    calibration_from_set1, pred_rate_from_set2, set2_from_set1, GroupAudit, MetricId,
    MetricProfile, MetricSet, PredictorClass, Set1Metrics,
};

/// How a set counts as "equal" across groups.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EqualityMode {
    /// Both defining components within tolerance.
    #[default]
    BothComponents,
    /// Any single component within tolerance (for mix-and-match analysis).
    AnyComponent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TolerancePolicy {
    /// Absolute tolerance for equality of rates and ratios.
    pub eps_rate: f64,
    /// Minimum prevalence difference that counts as "differs".
    pub eps_prev: f64,
    #[serde(default)]
    pub mode: EqualityMode,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        TolerancePolicy {
            eps_rate: 1e-9,
            eps_prev: 1e-9,
            mode: EqualityMode::BothComponents,
        }
    }
}

impl TolerancePolicy {
    pub fn new(eps_rate: f64, eps_prev: f64) -> Result<Self> {
        let tol = TolerancePolicy {
            eps_rate,
            eps_prev,
            mode: EqualityMode::BothComponents,
        };
        tol.validate()?;
        Ok(tol)
    }

    pub fn with_mode(mut self, mode: EqualityMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_rate > 0.0 && self.eps_prev > 0.0 {
            Ok(())
        } else {
            Err(FairnessError::InvalidArgument(format!(
                "tolerances must be strictly positive (eps_rate={}, eps_prev={})",
                self.eps_rate, self.eps_prev
            )))
        }
    }
}

/// One metric compared across the pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentGap {
    pub metric: MetricId,
    pub a: f64,
    pub b: f64,
    pub gap: f64,
}

/// A gap observed in `target_set` while `source_set` is equal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub source_set: MetricSet,
    pub target_set: MetricSet,
    pub component: MetricId,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncompatibilityReport {
    pub prevalence_a: f64,
    pub prevalence_b: f64,
    pub prevalence_differs: bool,
    pub klass_a: PredictorClass,
    pub klass_b: PredictorClass,
    pub set1_equal: Option<bool>,
    pub set2_equal: Option<bool>,
    pub set3_equal: Option<bool>,
    pub components: Vec<ComponentGap>,
    pub forced: Vec<Finding>,
    pub theorem_violated: bool,
}

impl IncompatibilityReport {
    pub fn set_equal(&self, set: MetricSet) -> Option<bool> {
        match set {
            MetricSet::Set1 => self.set1_equal,
            MetricSet::Set2 => self.set2_equal,
            MetricSet::Set3 => self.set3_equal,
        }
    }

    pub fn gap(&self, metric: MetricId) -> Option<f64> {
        self.components
            .iter()
            .find(|c| c.metric == metric)
            .map(|c| c.gap)
    }
}

pub fn check_pair(a: &GroupAudit, b: &GroupAudit, tol: &TolerancePolicy) -> IncompatibilityReport {
    compare_profiles(&a.metrics, &b.metrics, tol)
}

/// Both kinds of error occur: the scope of the exclusion results.
fn makes_both_errors(p: &MetricProfile) -> bool {
    p.klass == PredictorClass::Fallible && p.set1.is_some_and(|s| s.fpr > 0.0 && s.fnr > 0.0)
}

pub fn compare_profiles(
    a: &MetricProfile,
    b: &MetricProfile,
    tol: &TolerancePolicy,
) -> IncompatibilityReport {
    let components: Vec<ComponentGap> = MetricId::ALL
        .iter()
        .filter_map(|&m| {
            let (va, vb) = (a.get(m)?, b.get(m)?);
            Some(ComponentGap {
                metric: m,
                a: va,
                b: vb,
                gap: (va - vb).abs(),
            })
        })
        .collect();
    let gap_of = |m: MetricId| components.iter().find(|c| c.metric == m).map(|c| c.gap);

    // (strict both-component flag, flag under the requested mode)
    let flags = |set: MetricSet| -> Option<(bool, bool)> {
        let gaps: Option<Vec<f64>> = set.components().iter().map(|&m| gap_of(m)).collect();
        let gaps = gaps?;
        let both = gaps.iter().all(|&g| g <= tol.eps_rate);
        let any = gaps.iter().any(|&g| g <= tol.eps_rate);
        Some(match tol.mode {
            EqualityMode::BothComponents => (both, both),
            EqualityMode::AnyComponent => (both, any),
        })
    };
    let set_flags = MetricSet::ALL.map(flags);

    let prevalence_differs = (a.prevalence - b.prevalence).abs() > tol.eps_prev;

    let mut forced = Vec::new();
    if prevalence_differs {
        for (i, &source) in MetricSet::ALL.iter().enumerate() {
            if set_flags[i].map(|f| f.1) != Some(true) {
                continue;
            }
            for &target in MetricSet::ALL.iter().filter(|&&t| t != source) {
                for &component in target.components() {
                    if let Some(gap) = gap_of(component) {
                        forced.push(Finding {
                            source_set: source,
                            target_set: target,
                            component,
                            gap,
                        });
                    }
                }
            }
        }
    }

    let strictly_equal = set_flags.iter().filter(|f| f.is_some_and(|f| f.0)).count();
    let theorem_violated =
        prevalence_differs && makes_both_errors(a) && makes_both_errors(b) && strictly_equal >= 2;

    IncompatibilityReport {
        prevalence_a: a.prevalence,
        prevalence_b: b.prevalence,
        prevalence_differs,
        klass_a: a.klass,
        klass_b: b.klass,
        set1_equal: set_flags[0].map(|f| f.1),
        set2_equal: set_flags[1].map(|f| f.1),
        set3_equal: set_flags[2].map(|f| f.1),
        components,
        forced,
        theorem_violated,
    }
}

// ---------------------------------------------------------------------------
// Analytic forced gaps
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Set1ForcedGaps {
    pub cal_gap: f64,
    pub ppv_gap: f64,
    pub for_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Set2ForcedGaps {
    pub cal_gap: f64,
    pub tpr_gap: f64,
    pub fpr_gap: f64,
}

fn check_prevalence_pair(prev_a: f64, prev_b: f64) -> Result<()> {
    for p in [prev_a, prev_b] {
        if !(p > 0.0 && p < 1.0) {
            return Err(FairnessError::domain(format!(
                "prevalence {p} must lie in (0, 1)"
            )));
        }
    }
    if prev_a == prev_b {
        return Err(FairnessError::domain(
            "prevalences are equal; nothing is forced",
        ));
    }
    Ok(())
}

/// Gaps forced in Sets 2 and 3 when both groups share `(tpr, fpr)`.
pub fn forced_gaps_from_set1(
    tpr: f64,
    fpr: f64,
    prev_a: f64,
    prev_b: f64,
) -> Result<Set1ForcedGaps> {
    check_prevalence_pair(prev_a, prev_b)?;
    if !(0.0..=1.0).contains(&tpr) || !(0.0..=1.0).contains(&fpr) {
        return Err(FairnessError::domain("rates must lie in [0, 1]"));
    }
    if fpr == 0.0 {
        return Err(FairnessError::domain(
            "fpr = 0: no false positives, calibration does not depend on prevalence",
        ));
    }
    if tpr == 1.0 && fpr == 1.0 {
        return Err(FairnessError::domain("always-positive predictor"));
    }
    let set1 = Set1Metrics {
        tpr,
        fpr,
        fnr: 1.0 - tpr,
        tnr: 1.0 - fpr,
    };
    let cal_a = calibration_from_set1(tpr, fpr, prev_a)?;
    let cal_b = calibration_from_set1(tpr, fpr, prev_b)?;
    let s2a = set2_from_set1(&set1, prev_a)?;
    let s2b = set2_from_set1(&set1, prev_b)?;
    Ok(Set1ForcedGaps {
        cal_gap: (cal_a - cal_b).abs(),
        ppv_gap: (s2a.ppv - s2b.ppv).abs(),
        for_gap: (s2a.for_rate - s2b.for_rate).abs(),
    })
}

/// Gaps forced in Sets 1 and 3 when both groups share `(ppv, for_rate)`.
pub fn forced_gaps_from_set2(
    ppv: f64,
    for_rate: f64,
    prev_a: f64,
    prev_b: f64,
) -> Result<Set2ForcedGaps> {
    check_prevalence_pair(prev_a, prev_b)?;
    if !(for_rate > 0.0 && ppv < 1.0) {
        return Err(FairnessError::domain(
            "need 0 < for_rate and ppv < 1 (both error types must occur)",
        ));
    }
    let q_a = pred_rate_from_set2(ppv, for_rate, prev_a)?;
    let q_b = pred_rate_from_set2(ppv, for_rate, prev_b)?;
    for q in [q_a, q_b] {
        if !(q > 0.0 && q < 1.0) {
            return Err(FairnessError::domain(format!(
                "implied prediction rate {q} is trivial"
            )));
        }
    }
    let tpr = |q: f64, p: f64| ppv * q / p;
    let fpr = |q: f64, p: f64| (1.0 - ppv) * q / (1.0 - p);
    Ok(Set2ForcedGaps {
        cal_gap: (q_a / prev_a - q_b / prev_b).abs(),
        tpr_gap: (tpr(q_a, prev_a) - tpr(q_b, prev_b)).abs(),
        fpr_gap: (fpr(q_a, prev_a) - fpr(q_b, prev_b)).abs(),
    })
}
