//! Threshold post-processing.
//!
//! A record is predicted positive iff `score >= threshold`. Rules are either
//! a single threshold or a two-threshold mixture: with probability `mix` the
//! lower (more lenient) threshold `t_low` applies, otherwise `t_high`. The
//! never-positive threshold is `+inf`, serialized as JSON `null`.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{FairnessError, Result};
use crate::impossibility::{compare_profiles, IncompatibilityReport, TolerancePolicy};
use crate::metrics::{ConfusionCounts, GroupAudit, MetricId, MetricProfile, OutcomeRecord};
use crate::rng::indexed_uniform;

/// Threshold applied to the reference group when none is configured.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Distance below which a point counts as lying on a hull segment.
const ON_HULL_EPS: f64 = 1e-9;
/// Interpolation weights this close to 0 or 1 collapse to a vertex.
const SNAP_EPS: f64 = 1e-12;

mod threshold_serde {
    use super::*;

    pub fn serialize<S: Serializer>(t: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if t.is_finite() {
            s.serialize_some(t)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

// ---------------------------------------------------------------------------
// ROC
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    #[serde(with = "threshold_serde")]
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
    pub counts: ConfusionCounts,
}

impl RocPoint {
    fn from_counts(threshold: f64, counts: ConfusionCounts) -> Self {
        RocPoint {
            threshold,
            fpr: counts.fp as f64 / counts.actual_negative() as f64,
            tpr: counts.tp as f64 / counts.actual_positive() as f64,
            counts,
        }
    }
}

/// `(score, y)` pairs of one group, validated for ROC construction.
fn group_scores(records: &[OutcomeRecord], group: &str) -> Result<Vec<(f64, bool)>> {
    let mut out = Vec::new();
    for (index, r) in records.iter().enumerate().filter(|(_, r)| r.group == group) {
        let score = r.score.ok_or_else(|| FairnessError::MissingScore {
            group: group.to_string(),
            index,
        })?;
        out.push((score, r.y));
    }
    let positives = out.iter().filter(|(_, y)| *y).count();
    let reason = if out.is_empty() {
        Some("no records")
    } else if positives == 0 {
        Some("no actual positives")
    } else if positives == out.len() {
        Some("no actual negatives")
    } else {
        None
    };
    match reason {
        Some(reason) => Err(FairnessError::DegenerateGroup {
            group: group.to_string(),
            reason: reason.to_string(),
        }),
        None => Ok(out),
    }
}

/// Counts for `group` when predicting positive iff `score >= threshold`.
pub fn counts_at(
    records: &[OutcomeRecord],
    group: &str,
    threshold: f64,
) -> Result<ConfusionCounts> {
    let mut counts = ConfusionCounts::default();
    for (score, y) in group_scores(records, group)? {
        counts.record(y, score >= threshold);
    }
    Ok(counts)
}

/// Operating points of `group`, by threshold descending.
///
/// The first point is the never-positive rule (threshold `+inf`); then one
/// point per distinct score, the last of which predicts everyone positive.
pub fn roc_curve(records: &[OutcomeRecord], group: &str) -> Result<Vec<RocPoint>> {
    let mut scored = group_scores(records, group)?;
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let positives = scored.iter().filter(|(_, y)| *y).count() as u64;
    let negatives = scored.len() as u64 - positives;

    let mut counts = ConfusionCounts::new(0, 0, positives, negatives);
    let mut points = vec![RocPoint::from_counts(f64::INFINITY, counts)];
    let mut i = 0;
    while i < scored.len() {
        let threshold = scored[i].0;
        while i < scored.len() && scored[i].0 == threshold {
            if scored[i].1 {
                counts.tp += 1;
                counts.fn_ -= 1;
            } else {
                counts.fp += 1;
                counts.tn -= 1;
            }
            i += 1;
        }
        points.push(RocPoint::from_counts(threshold, counts));
    }
    Ok(points)
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Vertices of the upper convex hull of a ROC curve, from `(0, 0)` to
/// `(1, 1)`. Collinear interior points are dropped.
pub fn upper_hull(points: &[RocPoint]) -> Vec<RocPoint> {
    let mut sorted: Vec<RocPoint> = points.to_vec();
    sorted.sort_by(|a, b| a.fpr.total_cmp(&b.fpr).then(a.tpr.total_cmp(&b.tpr)));
    let mut hull: Vec<RocPoint> = Vec::with_capacity(sorted.len());
    for p in sorted {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            if cross((o.fpr, o.tpr), (a.fpr, a.tpr), (p.fpr, p.tpr)) >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

// ---------------------------------------------------------------------------
// Decision rules
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRule {
    pub group: String,
    #[serde(with = "threshold_serde")]
    pub t_low: f64,
    #[serde(with = "threshold_serde")]
    pub t_high: f64,
    /// Probability of applying `t_low`.
    pub mix: f64,
}

impl DecisionRule {
    pub fn deterministic(group: impl Into<String>, threshold: f64) -> Self {
        DecisionRule {
            group: group.into(),
            t_low: threshold,
            t_high: threshold,
            mix: 1.0,
        }
    }

    pub fn randomized(group: impl Into<String>, t_low: f64, t_high: f64, mix: f64) -> Result<Self> {
        if t_low.is_nan() || t_high.is_nan() || t_low > t_high {
            return Err(FairnessError::InvalidArgument(format!(
                "need t_low <= t_high, got {t_low} and {t_high}"
            )));
        }
        if !(0.0..=1.0).contains(&mix) {
            return Err(FairnessError::InvalidArgument(format!(
                "mix {mix} outside [0, 1]"
            )));
        }
        Ok(DecisionRule {
            group: group.into(),
            t_low,
            t_high,
            mix,
        })
    }

    pub fn is_deterministic(&self) -> bool {
        self.mix == 1.0 || self.mix == 0.0 || self.t_low == self.t_high
    }

    /// Threshold for one record given a uniform draw `u` in `[0, 1)`.
    fn threshold_for(&self, u: impl FnOnce() -> f64) -> f64 {
        if self.mix >= 1.0 || self.t_low == self.t_high {
            self.t_low
        } else if self.mix <= 0.0 {
            self.t_high
        } else if u() < self.mix {
            self.t_low
        } else {
            self.t_high
        }
    }

    /// Expected `(fpr, tpr)` of the rule, computed directly from the records.
    pub fn expected_rates(&self, records: &[OutcomeRecord]) -> Result<(f64, f64)> {
        let rates = |t: f64| -> Result<(f64, f64)> {
            let c = counts_at(records, &self.group, t)?;
            Ok((
                c.fp as f64 / c.actual_negative() as f64,
                c.tp as f64 / c.actual_positive() as f64,
            ))
        };
        let low = rates(self.t_low)?;
        if self.t_low == self.t_high {
            return Ok(low);
        }
        let high = rates(self.t_high)?;
        let m = self.mix;
        Ok((
            m * low.0 + (1.0 - m) * high.0,
            m * low.1 + (1.0 - m) * high.1,
        ))
    }
}

/// Apply `rules` to every record and audit the resulting predictions.
///
/// Randomized rules draw one uniform per record from the stream keyed by
/// `(seed, record index)`.
pub fn evaluate_rule(
    records: &[OutcomeRecord],
    rules: &BTreeMap<String, DecisionRule>,
    seed: u64,
) -> Result<BTreeMap<String, GroupAudit>> {
    let mut counts: BTreeMap<String, ConfusionCounts> = BTreeMap::new();
    for (index, r) in records.iter().enumerate() {
        let rule = rules
            .get(&r.group)
            .ok_or_else(|| FairnessError::MissingRule(r.group.clone()))?;
        let score = r.score.ok_or_else(|| FairnessError::MissingScore {
            group: r.group.clone(),
            index,
        })?;
        let threshold = rule.threshold_for(|| indexed_uniform(seed, index as u64));
        counts
            .entry(r.group.clone())
            .or_default()
            .record(r.y, score >= threshold);
    }
    counts
        .into_iter()
        .map(|(g, c)| Ok((g.clone(), GroupAudit::from_counts(g, c)?)))
        .collect()
}

// ---------------------------------------------------------------------------
// Single-metric equalization
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEqualization {
    pub group: String,
    #[serde(with = "threshold_serde")]
    pub threshold: f64,
    pub value: f64,
    pub target_gap: f64,
    /// `target_gap <= eps_rate`.
    pub achieved: bool,
    /// Reference (side a) against this group (side b) at the chosen rule.
    pub comparison: IncompatibilityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleEqualization {
    pub target: MetricId,
    pub ref_group: String,
    pub ref_threshold: f64,
    pub ref_value: f64,
    pub rules: BTreeMap<String, DecisionRule>,
    pub groups: Vec<GroupEqualization>,
}

impl SingleEqualization {
    /// Groups whose best threshold still misses the tolerance.
    pub fn unachievable(&self) -> impl Iterator<Item = &GroupEqualization> {
        self.groups.iter().filter(|g| !g.achieved)
    }
}

pub fn equalize_single(
    records: &[OutcomeRecord],
    ref_group: &str,
    other_groups: &[&str],
    target: MetricId,
    tol: &TolerancePolicy,
) -> Result<SingleEqualization> {
    equalize_single_at(
        records,
        ref_group,
        other_groups,
        target,
        tol,
        DEFAULT_THRESHOLD,
    )
}

/// Match `target` of every other group to the reference group at
/// `ref_threshold`, by exhaustive search over each group's distinct scores.
/// Ties go to the larger threshold.
pub fn equalize_single_at(
    records: &[OutcomeRecord],
    ref_group: &str,
    other_groups: &[&str],
    target: MetricId,
    tol: &TolerancePolicy,
    ref_threshold: f64,
) -> Result<SingleEqualization> {
    tol.validate()?;
    let ref_counts = counts_at(records, ref_group, ref_threshold)?;
    let ref_profile = MetricProfile::from_counts(&ref_counts)?;
    let ref_value = ref_profile
        .get(target)
        .ok_or_else(|| FairnessError::DegenerateGroup {
            group: ref_group.to_string(),
            reason: format!("{target} undefined at threshold {ref_threshold}"),
        })?;

    let mut rules = BTreeMap::new();
    rules.insert(
        ref_group.to_string(),
        DecisionRule::deterministic(ref_group, ref_threshold),
    );
    let mut groups = Vec::with_capacity(other_groups.len());
    for &group in other_groups {
        let mut best: Option<(f64, f64, MetricProfile)> = None;
        for point in roc_curve(records, group)? {
            let profile = MetricProfile::from_counts(&point.counts)?;
            let Some(value) = profile.get(target) else {
                continue;
            };
            let gap = (value - ref_value).abs();
            // Points arrive by threshold descending, so strict `<` keeps the
            // larger threshold on ties.
            if best.as_ref().is_none_or(|b| gap < (b.1 - ref_value).abs()) {
                best = Some((point.threshold, value, profile));
            }
        }
        let (threshold, value, profile) = best.ok_or_else(|| FairnessError::DegenerateGroup {
            group: group.to_string(),
            reason: format!("{target} undefined at every threshold"),
        })?;
        let target_gap = (value - ref_value).abs();
        rules.insert(
            group.to_string(),
            DecisionRule::deterministic(group, threshold),
        );
        groups.push(GroupEqualization {
            group: group.to_string(),
            threshold,
            value,
            target_gap,
            achieved: target_gap <= tol.eps_rate,
            comparison: compare_profiles(&ref_profile, &profile, tol),
        });
    }
    Ok(SingleEqualization {
        target,
        ref_group: ref_group.to_string(),
        ref_threshold,
        ref_value,
        rules,
        groups,
    })
}

// ---------------------------------------------------------------------------
// Equalized odds for a pair of groups
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OddsObjective {
    /// Shared point closest to group A's default-threshold operating point.
    MatchReference,
    /// Shared point with the highest pooled accuracy.
    MaxAccuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsEqualization {
    pub group_a: String,
    pub group_b: String,
    pub objective: OddsObjective,
    pub target_fpr: f64,
    pub target_tpr: f64,
    /// Number of shared operating points considered.
    pub candidates: usize,
    pub rules: BTreeMap<String, DecisionRule>,
}

type Pt = (f64, f64);

fn segment_intersections(p0: Pt, p1: Pt, q0: Pt, q1: Pt, out: &mut Vec<Pt>) {
    let r = (p1.0 - p0.0, p1.1 - p0.1);
    let s = (q1.0 - q0.0, q1.1 - q0.1);
    let qp = (q0.0 - p0.0, q0.1 - p0.1);
    let denom = r.0 * s.1 - r.1 * s.0;
    let scale = (r.0.hypot(r.1) * s.0.hypot(s.1)).max(f64::MIN_POSITIVE);
    if (denom / scale).abs() < 1e-12 {
        // Parallel: only collinear overlaps contribute, via their endpoints.
        let on = |x: Pt, a: Pt, b: Pt| point_on_segment(x, a, b).is_some();
        for (x, a, b) in [(q0, p0, p1), (q1, p0, p1), (p0, q0, q1), (p1, q0, q1)] {
            if on(x, a, b) {
                out.push(x);
            }
        }
        return;
    }
    let t = (qp.0 * s.1 - qp.1 * s.0) / denom;
    let u = (qp.0 * r.1 - qp.1 * r.0) / denom;
    let inside = |v: f64| (-SNAP_EPS..=1.0 + SNAP_EPS).contains(&v);
    if inside(t) && inside(u) {
        let t = t.clamp(0.0, 1.0);
        out.push((p0.0 + t * r.0, p0.1 + t * r.1));
    }
}

/// Weight `w` with `x ≈ a + w (b - a)`, if `x` lies on segment `ab`.
fn point_on_segment(x: Pt, a: Pt, b: Pt) -> Option<f64> {
    let d = (b.0 - a.0, b.1 - a.1);
    let w = if d.0.abs() >= d.1.abs() {
        if d.0 == 0.0 {
            // Degenerate segment.
            return ((x.0 - a.0).hypot(x.1 - a.1) <= ON_HULL_EPS).then_some(0.0);
        }
        (x.0 - a.0) / d.0
    } else {
        (x.1 - a.1) / d.1
    };
    if !(-SNAP_EPS..=1.0 + SNAP_EPS).contains(&w) {
        return None;
    }
    let w = w.clamp(0.0, 1.0);
    let proj = (a.0 + w * d.0, a.1 + w * d.1);
    ((x.0 - proj.0).hypot(x.1 - proj.1) <= ON_HULL_EPS).then_some(w)
}

/// Two-threshold rule realizing `target` on `hull`, if it lies on the hull.
fn realize_on_hull(group: &str, hull: &[RocPoint], target: Pt) -> Option<DecisionRule> {
    let mut best: Option<(f64, DecisionRule)> = None;
    for seg in hull.windows(2) {
        let (v0, v1) = (seg[0], seg[1]);
        let Some(w) = point_on_segment(target, (v0.fpr, v0.tpr), (v1.fpr, v1.tpr)) else {
            continue;
        };
        let rule = if w <= SNAP_EPS {
            DecisionRule::deterministic(group, v0.threshold)
        } else if w >= 1.0 - SNAP_EPS {
            DecisionRule::deterministic(group, v1.threshold)
        } else {
            // v1 has the lower threshold (higher rates).
            DecisionRule {
                group: group.to_string(),
                t_low: v1.threshold,
                t_high: v0.threshold,
                mix: w,
            }
        };
        let realized = (
            v0.fpr + w * (v1.fpr - v0.fpr),
            v0.tpr + w * (v1.tpr - v0.tpr),
        );
        let miss = (realized.0 - target.0).hypot(realized.1 - target.1);
        // Prefer deterministic realizations and then the closest fit.
        let key = miss + if rule.is_deterministic() { 0.0 } else { 1.0 };
        if best.as_ref().is_none_or(|b| key < b.0) {
            best = Some((key, rule));
        }
    }
    best.map(|b| b.1)
}

/// Operating points reachable by both groups with two-threshold rules: the
/// crossings and shared stretches of their upper ROC hulls, always including
/// the trivial endpoints.
fn shared_points(hull_a: &[RocPoint], hull_b: &[RocPoint]) -> Vec<Pt> {
    let mut pts = vec![(0.0, 0.0), (1.0, 1.0)];
    for sa in hull_a.windows(2) {
        for sb in hull_b.windows(2) {
            segment_intersections(
                (sa[0].fpr, sa[0].tpr),
                (sa[1].fpr, sa[1].tpr),
                (sb[0].fpr, sb[0].tpr),
                (sb[1].fpr, sb[1].tpr),
                &mut pts,
            );
        }
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup_by(|a, b| (a.0 - b.0).abs() <= SNAP_EPS && (a.1 - b.1).abs() <= SNAP_EPS);
    pts
}

pub fn equalize_odds_pair(
    records: &[OutcomeRecord],
    group_a: &str,
    group_b: &str,
    objective: OddsObjective,
) -> Result<OddsEqualization> {
    equalize_odds_pair_at(records, group_a, group_b, objective, DEFAULT_THRESHOLD)
}

/// Equalize both TPR and FPR of two groups at a common operating point.
///
/// `ref_threshold` fixes group A's default operating point for
/// [`OddsObjective::MatchReference`].
pub fn equalize_odds_pair_at(
    records: &[OutcomeRecord],
    group_a: &str,
    group_b: &str,
    objective: OddsObjective,
    ref_threshold: f64,
) -> Result<OddsEqualization> {
    let roc_a = roc_curve(records, group_a)?;
    let roc_b = roc_curve(records, group_b)?;
    let (hull_a, hull_b) = (upper_hull(&roc_a), upper_hull(&roc_b));

    let mut feasible: Vec<(Pt, DecisionRule, DecisionRule)> = shared_points(&hull_a, &hull_b)
        .into_iter()
        .filter_map(|p| {
            let ra = realize_on_hull(group_a, &hull_a, p)?;
            let rb = realize_on_hull(group_b, &hull_b, p)?;
            Some((p, ra, rb))
        })
        .collect();
    let candidates = feasible.len();

    let score: Box<dyn Fn(Pt) -> f64> = match objective {
        OddsObjective::MatchReference => {
            let c = counts_at(records, group_a, ref_threshold)?;
            let reference = (
                c.fp as f64 / c.actual_negative() as f64,
                c.tp as f64 / c.actual_positive() as f64,
            );
            Box::new(move |p: Pt| -(p.0 - reference.0).hypot(p.1 - reference.1))
        }
        OddsObjective::MaxAccuracy => {
            let (ca, cb) = (roc_a[0].counts, roc_b[0].counts);
            let pos = (ca.actual_positive() + cb.actual_positive()) as f64;
            let neg = (ca.actual_negative() + cb.actual_negative()) as f64;
            Box::new(move |p: Pt| (pos * p.1 + neg * (1.0 - p.0)) / (pos + neg))
        }
    };
    // First maximum in (fpr, tpr) order wins ties.
    let best = (0..feasible.len())
        .max_by(|&i, &j| {
            score(feasible[i].0)
                .partial_cmp(&score(feasible[j].0))
                .unwrap_or(Ordering::Equal)
                .then(j.cmp(&i))
        })
        .expect("trivial endpoints are always shared");
    let (target, rule_a, rule_b) = feasible.swap_remove(best);

    let mut rules = BTreeMap::new();
    rules.insert(group_a.to_string(), rule_a);
    rules.insert(group_b.to_string(), rule_b);
    Ok(OddsEqualization {
        group_a: group_a.to_string(),
        group_b: group_b.to_string(),
        objective,
        target_fpr: target.0,
        target_tpr: target.1,
        candidates,
        rules,
    })
}
