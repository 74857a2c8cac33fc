//! One- and two-sample proportion tests.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use super::normal::erfc;
use crate::error::{FairnessError, Result};

/// Largest `n` accepted by [`exact_binomial`].
pub const EXACT_BINOMIAL_MAX_N: u64 = 1_000_000;

/// Relative slack when comparing point masses, so that masses equal in exact
/// arithmetic are not split by round-off.
const POINT_MASS_SLACK: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    OneSampleZ,
    ExactBinomial,
    TwoProportionZ,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TestInputs {
    OneSample { k: u64, n: u64, p0: f64 },
    TwoSample { k1: u64, n1: u64, k2: u64, n2: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: TestMethod,
    /// The z value for z tests; the observed point mass for the exact test.
    pub statistic: f64,
    pub p_two_sided: f64,
    pub inputs: TestInputs,
    pub continuity_correction: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZTestOptions {
    pub continuity_correction: bool,
}

/// Clamp into `(0, 1]`; tails beyond double range report the smallest
/// normal double.
fn as_p_value(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, 1.0)
}

fn two_sided_from_z(z: f64) -> f64 {
    as_p_value(erfc(z.abs() * FRAC_1_SQRT_2))
}

fn check_null(p0: f64) -> Result<()> {
    if p0 > 0.0 && p0 < 1.0 {
        Ok(())
    } else {
        Err(FairnessError::domain(format!(
            "null proportion {p0} must lie in (0, 1)"
        )))
    }
}

fn check_count(k: u64, n: u64) -> Result<()> {
    if n == 0 {
        return Err(FairnessError::domain("n must be positive"));
    }
    if k > n {
        return Err(FairnessError::domain(format!("k = {k} exceeds n = {n}")));
    }
    Ok(())
}

/// Shrink `|x|` by `by`, never crossing zero.
fn shrink_toward_zero(x: f64, by: f64) -> f64 {
    x.signum() * (x.abs() - by).max(0.0)
}

/// Normal-approximation test of `k` successes in `n` trials against `p0`.
pub fn one_sample_proportion_z(k: u64, n: u64, p0: f64) -> Result<TestResult> {
    one_sample_proportion_z_with(k, n, p0, ZTestOptions::default())
}

pub fn one_sample_proportion_z_with(
    k: u64,
    n: u64,
    p0: f64,
    opts: ZTestOptions,
) -> Result<TestResult> {
    check_count(k, n)?;
    check_null(p0)?;
    let nf = n as f64;
    // Count-scale form: mirroring (k, p0) -> (n - k, 1 - p0) only flips the sign.
    let mut diff = k as f64 - nf * p0;
    if opts.continuity_correction {
        diff = shrink_toward_zero(diff, 0.5);
    }
    let z = diff / (nf * (p0 * (1.0 - p0))).sqrt();
    Ok(TestResult {
        method: TestMethod::OneSampleZ,
        statistic: z,
        p_two_sided: two_sided_from_z(z),
        inputs: TestInputs::OneSample { k, n, p0 },
        continuity_correction: opts.continuity_correction,
    })
}

/// Pooled-variance test of `k1/n1` against `k2/n2`.
pub fn two_proportion_z(k1: u64, n1: u64, k2: u64, n2: u64) -> Result<TestResult> {
    two_proportion_z_with(k1, n1, k2, n2, ZTestOptions::default())
}

pub fn two_proportion_z_with(
    k1: u64,
    n1: u64,
    k2: u64,
    n2: u64,
    opts: ZTestOptions,
) -> Result<TestResult> {
    check_count(k1, n1)?;
    check_count(k2, n2)?;
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let pooled = (k1 + k2) as f64 / (n1f + n2f);
    if !(pooled > 0.0 && pooled < 1.0) {
        return Err(FairnessError::domain(format!(
            "pooled proportion {pooled} leaves no variance"
        )));
    }
    let inv = 1.0 / n1f + 1.0 / n2f;
    let mut diff = k1 as f64 / n1f - k2 as f64 / n2f;
    if opts.continuity_correction {
        diff = shrink_toward_zero(diff, 0.5 * inv);
    }
    let z = diff / (pooled * (1.0 - pooled) * inv).sqrt();
    Ok(TestResult {
        method: TestMethod::TwoProportionZ,
        statistic: z,
        p_two_sided: two_sided_from_z(z),
        inputs: TestInputs::TwoSample { k1, n1, k2, n2 },
        continuity_correction: opts.continuity_correction,
    })
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Two-sided exact binomial test: the total mass of outcomes no more likely
/// than the observed one.
///
/// Point masses are handled in log space and renormalised by their computed
/// total, so `n` up to [`EXACT_BINOMIAL_MAX_N`] neither overflows nor drifts.
pub fn exact_binomial(k: u64, n: u64, p0: f64) -> Result<TestResult> {
    check_count(k, n)?;
    check_null(p0)?;
    if n > EXACT_BINOMIAL_MAX_N {
        return Err(FairnessError::domain(format!(
            "n = {n} exceeds the exact-test limit {EXACT_BINOMIAL_MAX_N}"
        )));
    }
    let nf = n as f64;
    let (ln_p, ln_q) = (p0.ln(), (-p0).ln_1p());
    let ln_n_fact = libm::lgamma(nf + 1.0);
    let log_pmf: Vec<f64> = (0..=n)
        .map(|j| {
            let jf = j as f64;
            ln_n_fact - libm::lgamma(jf + 1.0) - libm::lgamma(nf - jf + 1.0)
                + jf * ln_p
                + (nf - jf) * ln_q
        })
        .collect();
    let peak = log_pmf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let observed = log_pmf[k as usize];
    let cutoff = observed + POINT_MASS_SLACK.ln_1p();

    let total = compensated_sum(log_pmf.iter().map(|&l| (l - peak).exp()));
    let tail = compensated_sum(
        log_pmf
            .iter()
            .filter(|&&l| l <= cutoff)
            .map(|&l| (l - peak).exp()),
    );
    Ok(TestResult {
        method: TestMethod::ExactBinomial,
        statistic: (observed - peak).exp() / total,
        p_two_sided: as_p_value(tail / total),
        inputs: TestInputs::OneSample { k, n, p0 },
        continuity_correction: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values below come from 40-digit mpmath evaluation of the same
    // formulas and from scipy.stats.binomtest.

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn one_sample_white_group() {
        let r = one_sample_proportion_z(854, 2454, 966.0 / 2454.0).unwrap();
        assert!((r.statistic - -4.627_700_808_528_846).abs() < 1e-9);
        assert!(rel(r.p_two_sided, 3.697_476_553_164_678e-6) < 1e-9);
        assert!(r.p_two_sided < 1e-5);
    }

    #[test]
    fn one_sample_black_group() {
        let r = one_sample_proportion_z(2174, 3695, 1901.0 / 3695.0).unwrap();
        assert!((r.statistic - 8.986_024_340_182_537).abs() < 1e-9);
        assert!(rel(r.p_two_sided, 2.563_352_367_959_96e-19) < 1e-8);
        assert!(r.p_two_sided < 1e-15);
    }

    #[test]
    fn one_sample_null_case() {
        let r = one_sample_proportion_z(50, 200, 0.25).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_two_sided, 1.0);
    }

    #[test]
    fn one_sample_domain() {
        assert!(one_sample_proportion_z(1, 0, 0.5).is_err());
        assert!(one_sample_proportion_z(1, 5, 0.0).is_err());
        assert!(one_sample_proportion_z(1, 5, 1.0).is_err());
        assert!(one_sample_proportion_z(6, 5, 0.5).is_err());
    }

    #[test]
    fn continuity_correction_shrinks_statistic() {
        let plain = one_sample_proportion_z(854, 2454, 966.0 / 2454.0).unwrap();
        let corrected = one_sample_proportion_z_with(
            854,
            2454,
            966.0 / 2454.0,
            ZTestOptions {
                continuity_correction: true,
            },
        )
        .unwrap();
        assert!(corrected.statistic.abs() < plain.statistic.abs());
        assert!(corrected.p_two_sided > plain.p_two_sided);
        assert!(corrected.p_two_sided < 1e-5);
        // Within half a count of the null the corrected z is exactly zero.
        let r = one_sample_proportion_z_with(
            5,
            10,
            0.52,
            ZTestOptions {
                continuity_correction: true,
            },
        )
        .unwrap();
        assert_eq!(r.statistic, 0.0);
    }

    #[test]
    fn two_proportion_white_pred_vs_actual() {
        let r = two_proportion_z(854, 2454, 966, 2454).unwrap();
        assert!((r.statistic - -3.309_755_860_801_639).abs() < 1e-9);
        assert!(rel(r.p_two_sided, 9.337_737_905_058_788e-4) < 1e-9);
        assert!(r.p_two_sided > 1e-5);
    }

    #[test]
    fn two_proportion_equal_rates() {
        let r = two_proportion_z(30, 100, 60, 200).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_two_sided, 1.0);
    }

    #[test]
    fn two_proportion_extreme_but_pooled_interior() {
        let r = two_proportion_z(0, 10, 10, 10).unwrap();
        assert!((r.statistic - -4.472_135_954_999_579).abs() < 1e-12);
        assert!(r.statistic.is_finite());
        assert!(rel(r.p_two_sided, 7.744_216_431_044_084e-6) < 1e-9);
    }

    #[test]
    fn two_proportion_degenerate_pool() {
        assert!(two_proportion_z(0, 10, 0, 20).is_err());
        assert!(two_proportion_z(10, 10, 20, 20).is_err());
    }

    #[test]
    fn exact_trivial_cases() {
        assert_eq!(exact_binomial(0, 1, 0.5).unwrap().p_two_sided, 1.0);
        assert_eq!(exact_binomial(10, 20, 0.5).unwrap().p_two_sided, 1.0);
    }

    #[test]
    fn exact_matches_scipy() {
        let r = exact_binomial(854, 2454, 966.0 / 2454.0).unwrap();
        assert!(rel(r.p_two_sided, 3.298_407_160_774_842e-6) < 1e-6);
        let r = exact_binomial(2174, 3695, 1901.0 / 3695.0).unwrap();
        assert!(rel(r.p_two_sided, 2.211_364_464_236_424e-19) < 1e-6);
        let r = exact_binomial(3, 20, 0.4).unwrap();
        assert!(rel(r.p_two_sided, 0.022_427_038_142_043_255) < 1e-9);
        let r = exact_binomial(60, 500, 0.15).unwrap();
        assert!(rel(r.p_two_sided, 0.060_305_811_469_372_056) < 1e-9);
    }

    #[test]
    fn exact_limits() {
        assert!(exact_binomial(1, EXACT_BINOMIAL_MAX_N + 1, 0.5).is_err());
        let r = exact_binomial(500_000, EXACT_BINOMIAL_MAX_N, 0.5).unwrap();
        assert_eq!(r.p_two_sided, 1.0);
    }

    #[test]
    fn results_serialize_with_method_tag() {
        let r = two_proportion_z(1, 4, 2, 4).unwrap();
        let v = serde_json::to_value(r).unwrap();
        assert_eq!(v["method"], "two_proportion_z");
        assert_eq!(v["inputs"]["k2"], 2);
    }
}
