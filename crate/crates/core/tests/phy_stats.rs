//! Statistical and exhaustive checks of the Poisson channel: sampler
//! moments, chip/symbol consistency, detector optimality, and the BER
//! against its analytic value.

use proptest::prelude::*;

use uvtdma_core::phy::{
    analytic_ook_ber, ml_detect_symbol, poisson_pmf, sample_chip_counts, sample_symbol_count,
    ChipConfig, PoissonMeans,
};
use uvtdma_core::rng::{substream, SimRng, StreamPurpose};
use uvtdma_core::NodeId;

fn rng(tag: u64) -> SimRng {
    substream(tag, NodeId(2), StreamPurpose::Auxiliary)
}

#[test]
fn sample_mean_matches_configured_mean() {
    // Law of large numbers at lambda = 11: the empirical mean over 1e6
    // draws sits within 0.05 (15 standard errors) of the true mean.
    let means = PoissonMeans::new(10.0, 1.0).unwrap();
    let mut r = rng(1);
    let n = 1_000_000u64;
    let sum: u64 = (0..n).map(|_| sample_symbol_count(true, &means, &mut r)).sum();
    let empirical = sum as f64 / n as f64;
    assert!((empirical - 11.0).abs() < 0.05, "mean {empirical}");
}

#[test]
fn sample_variance_matches_mean() {
    // Poisson variance equals the mean; background-only draws at 1.0.
    let means = PoissonMeans::new(10.0, 1.0).unwrap();
    let mut r = rng(2);
    let n = 1_000_000usize;
    let samples: Vec<u64> = (0..n).map(|_| sample_symbol_count(false, &means, &mut r)).collect();
    let mean = samples.iter().sum::<u64>() as f64 / n as f64;
    let var = samples.iter().map(|&x| (x as f64 - mean) * (x as f64 - mean)).sum::<f64>()
        / (n - 1) as f64;
    assert!((var - 1.0).abs() < 0.05, "variance {var}");
}

#[test]
fn ptrs_regime_moments() {
    // Exercise the rejection sampler above the inversion cutoff.
    let means = PoissonMeans::new(100.0, 1.0).unwrap();
    let mut r = rng(3);
    let n = 200_000usize;
    let samples: Vec<u64> = (0..n).map(|_| sample_symbol_count(true, &means, &mut r)).collect();
    let mean = samples.iter().sum::<u64>() as f64 / n as f64;
    let var = samples.iter().map(|&x| (x as f64 - mean) * (x as f64 - mean)).sum::<f64>()
        / (n - 1) as f64;
    assert!((mean - 101.0).abs() < 0.12, "mean {mean}");
    assert!((var / 101.0 - 1.0).abs() < 0.02, "variance {var}");
}

#[test]
fn chip_thinning_preserves_per_chip_mean() {
    // Thinning a lambda = 10 symbol over 10 chips gives chip mean 1.
    let means = PoissonMeans::new(10.0, 0.0).unwrap();
    let chips = ChipConfig::new(10, 0.5e-6).unwrap();
    let mut r = rng(4);
    let symbols = 100_000usize; // one million chips
    let mut sum = 0u64;
    for _ in 0..symbols {
        sum += sample_chip_counts(true, &means, &chips, &mut r).iter().sum::<u64>();
    }
    let per_chip = sum as f64 / (symbols as f64 * 10.0);
    assert!((per_chip - 1.0).abs() < 0.01, "per-chip mean {per_chip}");
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value
/// (Stephens' small-sample correction). Test-side oracle, independent of
/// the samplers it checks.
fn ks_two_sample_p(a: &mut [u64], b: &mut [u64]) -> f64 {
    a.sort_unstable();
    b.sort_unstable();
    let (n, m) = (a.len() as f64, b.len() as f64);
    let mut d: f64 = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = (n * m / (n + m)).sqrt();
    let lambda = (ne + 0.12 + 0.11 / ne) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        p += 2.0 * (-1.0f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
    }
    p.clamp(0.0, 1.0)
}

#[test]
fn chip_sums_match_symbol_distribution() {
    // Poisson superposition: summing the thinned chips must reproduce the
    // symbol-count distribution (two-sample KS, p > 0.01, fixed seeds).
    let means = PoissonMeans::new(10.0, 1.0).unwrap();
    let chips = ChipConfig::new(10, 0.5e-6).unwrap();
    let n = 100_000usize;
    let mut ra = rng(5);
    let mut rb = rng(6);
    let mut sums: Vec<u64> = (0..n)
        .map(|_| sample_chip_counts(true, &means, &chips, &mut ra).iter().sum())
        .collect();
    let mut direct: Vec<u64> = (0..n).map(|_| sample_symbol_count(true, &means, &mut rb)).collect();
    let p = ks_two_sample_p(&mut sums, &mut direct);
    assert!(p > 0.01, "KS p-value {p}");
}

#[test]
fn detector_equals_pmf_argmax_on_grid() {
    // Exhaustive comparison against the direct likelihood ratio over
    // counts 0..=100 and a 10x10 grid of means (ties decide "on", matching
    // the threshold rule).
    for si in 1..=10u32 {
        for bi in 1..=10u32 {
            let lambda_s = si as f64;
            let lambda_b = bi as f64 * 0.25;
            let means = PoissonMeans::new(lambda_s, lambda_b).unwrap();
            for count in 0..=100u64 {
                let on = poisson_pmf(count, lambda_s + lambda_b).unwrap();
                let off = poisson_pmf(count, lambda_b).unwrap();
                let oracle = on >= off;
                let decided = ml_detect_symbol(count, &means).unwrap();
                assert_eq!(
                    decided, oracle,
                    "count {count} at ({lambda_s}, {lambda_b}): pmf {on} vs {off}"
                );
            }
        }
    }
}

#[test]
fn simulated_ber_matches_analytic() {
    // 1e6 random OOK symbols through the sampler and ML detector; the
    // empirical BER must sit within three standard errors of the exact
    // error probability.
    let means = PoissonMeans::new(10.0, 1.0).unwrap();
    let expected = analytic_ook_ber(&means).unwrap();
    let mut r = rng(7);
    let mut bit_rng = rng(8);
    let n = 1_000_000u64;
    let mut errors = 0u64;
    for _ in 0..n {
        let bit = rand::Rng::random::<bool>(&mut bit_rng);
        let count = sample_symbol_count(bit, &means, &mut r);
        if ml_detect_symbol(count, &means).unwrap() != bit {
            errors += 1;
        }
    }
    let ber = errors as f64 / n as f64;
    let se = (expected * (1.0 - expected) / n as f64).sqrt();
    assert!(
        (ber - expected).abs() < 3.0 * se,
        "ber {ber} vs analytic {expected} (se {se})"
    );
}

proptest! {
    /// Σ_n pmf(n, mean) over n = 0..=1000 stays within 1e-12 of one from
    /// below for any mean up to 50. The mathematical partial sum is
    /// strictly below 1; a few ulps of headroom absorb the accumulated
    /// rounding of a thousand independently rounded terms.
    #[test]
    fn pmf_normalizes(mean in 1e-6f64..50.0) {
        let mut sum = 0.0f64;
        let mut c = 0.0f64; // Kahan compensation
        for n in 0..=1000u64 {
            let y = poisson_pmf(n, mean).unwrap() - c;
            let t = sum + y;
            c = (t - sum) - y;
            sum = t;
        }
        prop_assert!(sum >= 1.0 - 1e-12, "sum {} at mean {}", sum, mean);
        prop_assert!(sum <= 1.0 + 16.0 * f64::EPSILON, "sum {} at mean {}", sum, mean);
    }

    /// Deciding "on" at some count implies "on" at every larger count.
    #[test]
    fn detection_is_monotone(
        lambda_s in 0.01f64..50.0,
        lambda_b in 0.0f64..20.0,
        count in 0u64..200,
    ) {
        let means = PoissonMeans::new(lambda_s, lambda_b).unwrap();
        if ml_detect_symbol(count, &means).unwrap() {
            prop_assert!(ml_detect_symbol(count + 1, &means).unwrap());
        }
    }

    /// The chip view always sums to a plausible symbol draw and has the
    /// configured width.
    #[test]
    fn chip_counts_have_configured_width(m in 1u32..32, bit: bool) {
        let means = PoissonMeans::new(5.0, 0.5).unwrap();
        let chips = ChipConfig::new(m, 0.5e-6).unwrap();
        let mut r = rng(9);
        let counts = sample_chip_counts(bit, &means, &chips, &mut r);
        prop_assert_eq!(counts.len(), m as usize);
    }
}
