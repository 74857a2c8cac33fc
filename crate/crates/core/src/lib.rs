//! Group-fairness auditing primitives.
//!
//! The crate is organised around three mutually exclusive families of
//! group metrics:
//!
//! * **Set 1** (equalized odds): `P(Pred|Y)`, `P(Pred|¬Y)` and their
//!   complements (TPR, FPR, FNR, TNR).
//! * **Set 2** (predictive parity): `P(Y|Pred)`, `P(Y|¬Pred)` and their
//!   complements (PPV, FOR, FDR, NPV).
//! * **Set 3** (calibration in the aggregate sense): the ratio
//!   `P(Pred)/P(Y)` of positive predictions to actual occurrences.
//!
//! When two groups have different prevalence and the predictor is fallible,
//! equalizing any one set across the groups forces the other two to differ.
//! [`impossibility`] computes those forced gaps analytically and fuzzes the
//! claim, [`equalizer`] builds per-group threshold rules that equalize a
//! chosen metric, and [`stats`] provides the proportion tests used to judge
//! whether observed gaps are significant.

pub mod equalizer;
pub mod error;
pub mod fuzz;
pub mod impossibility;
pub mod metrics;
pub mod rng;
pub mod stats;

pub use error::{FairnessError, Result};
pub use metrics::{
    ConfusionCounts, GroupAudit, JointRates, MetricId, MetricProfile, MetricSet, OutcomeRecord,
    PredictorClass, Set1Metrics, Set2Metrics, Set3Metric,
};
