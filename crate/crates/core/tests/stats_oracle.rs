use fairkit_core::stats::{
    exact_binomial, normal_cdf, normal_sf, one_sample_proportion_z, two_proportion_z,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use proptest::prelude::*;

const FIXTURE: &str = include_str!("data/normal_cdf_reference.csv");

fn fixture() -> Vec<(f64, f64)> {
    FIXTURE
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('z'))
        .map(|l| {
            let (z, p) = l.split_once(',').unwrap();
            (z.parse().unwrap(), p.parse().unwrap())
        })
        .collect()
}

#[test]
fn normal_cdf_matches_reference_table() {
    let table = fixture();
    assert!(table.len() >= 20);
    for (z, expected) in table {
        let got = normal_cdf(z);
        assert!(
            (got - expected).abs() < 1e-12,
            "Phi({z}) = {got}, want {expected}"
        );
        if z < 0.0 {
            // The lower tail keeps relative accuracy as well.
            assert!(
                ((got - expected) / expected).abs() < 1e-12,
                "Phi({z}) relative"
            );
            assert!(((normal_sf(-z) - expected) / expected).abs() < 1e-12);
        }
    }
}

/// Two-sided exact binomial p-values for every k in rational arithmetic: the
/// sum of point masses not exceeding the observed one.
fn brute_force_binomial(n: u64, num: i64, den: i64) -> Vec<f64> {
    let p = BigRational::new(BigInt::from(num), BigInt::from(den));
    let q = BigRational::one() - &p;
    let mut pmf = Vec::with_capacity(n as usize + 1);
    let mut binom = BigInt::one();
    for j in 0..=n {
        if j > 0 {
            binom = binom * BigInt::from(n - j + 1) / BigInt::from(j);
        }
        let mass = BigRational::from_integer(binom.clone())
            * num_traits::pow(p.clone(), j as usize)
            * num_traits::pow(q.clone(), (n - j) as usize);
        pmf.push(mass);
    }
    pmf.iter()
        .map(|observed| {
            pmf.iter()
                .filter(|m| *m <= observed)
                .fold(BigRational::zero(), |acc, m| acc + m)
                .to_f64()
                .unwrap()
        })
        .collect()
}

#[test]
fn exact_binomial_matches_rational_brute_force() {
    for &(num, den) in &[(1, 2), (3, 10), (1, 4), (2, 3), (1, 7), (966, 2454)] {
        for n in [1u64, 2, 5, 13, 30, 61] {
            let oracle = brute_force_binomial(n, num, den);
            for k in 0..=n {
                let want = oracle[k as usize];
                let got = exact_binomial(k, n, num as f64 / den as f64)
                    .unwrap()
                    .p_two_sided;
                assert!(
                    ((got - want) / want).abs() < 1e-9,
                    "k={k} n={n} p0={num}/{den}: {got} vs {want}"
                );
            }
        }
    }
}

#[test]
fn exact_binomial_compas_white_group() {
    let exact = exact_binomial(854, 2454, 966.0 / 2454.0)
        .unwrap()
        .p_two_sided;
    let z = one_sample_proportion_z(854, 2454, 966.0 / 2454.0)
        .unwrap()
        .p_two_sided;
    assert!(exact < 1e-5);
    assert!(exact / z < 10.0 && z / exact < 10.0);
}

#[test]
fn one_sample_p_value_is_monotone_in_deviation() {
    for &(n, p0) in &[
        (40u64, 0.3),
        (101, 0.5),
        (500, 0.12),
        (2454, 966.0 / 2454.0),
    ] {
        let mut ks: Vec<u64> = (0..=n).collect();
        let centre = n as f64 * p0;
        ks.sort_by(|&a, &b| {
            (a as f64 - centre)
                .abs()
                .total_cmp(&(b as f64 - centre).abs())
        });
        let ps: Vec<f64> = ks
            .iter()
            .map(|&k| one_sample_proportion_z(k, n, p0).unwrap().p_two_sided)
            .collect();
        for w in ps.windows(2) {
            assert!(w[1] <= w[0], "n={n} p0={p0}: {} then {}", w[0], w[1]);
        }
    }
}

proptest! {
    #[test]
    fn one_sample_mirror_symmetry_is_exact_for_dyadic_nulls(
        n in 1u64..5000, frac in 0.0f64..1.0, m in 1u32..1024,
    ) {
        let k = ((n as f64) * frac) as u64;
        let p0 = m as f64 / 1024.0;
        let a = one_sample_proportion_z(k, n, p0).unwrap();
        let b = one_sample_proportion_z(n - k, n, 1.0 - p0).unwrap();
        prop_assert_eq!(a.p_two_sided, b.p_two_sided);
        prop_assert_eq!(a.statistic, -b.statistic);
    }

    #[test]
    fn one_sample_mirror_symmetry_general(
        n in 1u64..5000, frac in 0.0f64..1.0, p0 in 0.001f64..0.999,
    ) {
        let k = ((n as f64) * frac) as u64;
        let a = one_sample_proportion_z(k, n, p0).unwrap().p_two_sided;
        let b = one_sample_proportion_z(n - k, n, 1.0 - p0).unwrap().p_two_sided;
        prop_assert!(((a - b) / a).abs() < 1e-9, "{} vs {}", a, b);
    }

    #[test]
    fn exact_and_z_agree_within_factor_ten(
        n in 500u64..4000, p0 in 0.1001f64..0.8999, z in -4.0f64..4.0,
    ) {
        let sd = (n as f64 * p0 * (1.0 - p0)).sqrt();
        let k = (n as f64 * p0 + z * sd).round().clamp(0.0, n as f64) as u64;
        let exact = exact_binomial(k, n, p0).unwrap().p_two_sided;
        let approx = one_sample_proportion_z(k, n, p0).unwrap().p_two_sided;
        prop_assert!(exact > 0.0 && exact <= 1.0);
        let ratio = exact / approx;
        prop_assert!((0.1..=10.0).contains(&ratio), "k={} exact={} z={}", k, exact, approx);
    }

    #[test]
    fn two_proportion_antisymmetric(
        n1 in 1u64..3000, n2 in 1u64..3000, f1 in 0.0f64..1.0, f2 in 0.0f64..1.0,
    ) {
        let (k1, k2) = (((n1 as f64) * f1) as u64, ((n2 as f64) * f2) as u64);
        if let Ok(a) = two_proportion_z(k1, n1, k2, n2) {
            let b = two_proportion_z(k2, n2, k1, n1).unwrap();
            prop_assert_eq!(a.statistic, -b.statistic);
            prop_assert_eq!(a.p_two_sided, b.p_two_sided);
            prop_assert!(a.p_two_sided > 0.0 && a.p_two_sided <= 1.0);
        }
    }
}
