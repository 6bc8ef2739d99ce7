//! Discrete-time Poisson photon-counting channel with OOK modulation.
//!
//! A transmitted symbol `1` illuminates the receiver, a `0` does not; the
//! receiver observes a photoelectron count per symbol that is Poisson with
//! mean `λ_s + λ_b` (signal plus background) for a `1` and `λ_b` for a `0`.
//! Symbols can be subdivided into `M` chips; chip counts are produced by
//! multinomially thinning one symbol-level draw so the chip and symbol views
//! of a run are always consistent.
//!
//! Detection is maximum-likelihood: decide `1` iff the observed count is at
//! least the crossing point of the two Poisson PMFs.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::math;
use crate::rng::SimRng;
use crate::NodeId;

/// Means below this are treated as exactly zero, keeping the ML threshold
/// out of the log-domain singularity.
pub const LAMBDA_EPSILON: f64 = 1e-12;

/// Means above which Poisson sampling switches from sequential-search
/// inversion to PTRS-style transformed rejection.
const INVERSION_MEAN_LIMIT: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub enum PhyError {
    /// A Poisson mean was negative or non-finite.
    InvalidMean(f64),
    /// Chip configuration with zero chips or nonpositive symbol duration.
    InvalidChipConfig,
    /// λ_s = 0 makes the two OOK hypotheses identical.
    DegenerateChannel,
    /// Link with `src == dst`, negative gain, or nonpositive distance.
    InvalidLink,
}

impl fmt::Display for PhyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhyError::InvalidMean(v) => write!(f, "invalid Poisson mean {v}"),
            PhyError::InvalidChipConfig => write!(f, "invalid chip configuration"),
            PhyError::DegenerateChannel => {
                write!(f, "degenerate channel: symbols are indistinguishable at lambda_s = 0")
            }
            PhyError::InvalidLink => write!(f, "invalid channel link"),
        }
    }
}

impl core::error::Error for PhyError {}

/// Mean photoelectron counts per symbol for the signal and background
/// components of one link direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonMeans {
    lambda_s: f64,
    lambda_b: f64,
}

impl PoissonMeans {
    /// Both means must be finite and nonnegative. Values below
    /// [`LAMBDA_EPSILON`] collapse to exactly zero.
    pub fn new(lambda_s: f64, lambda_b: f64) -> Result<Self, PhyError> {
        for v in [lambda_s, lambda_b] {
            if !v.is_finite() || v < 0.0 {
                return Err(PhyError::InvalidMean(v));
            }
        }
        let clamp = |v: f64| if v < LAMBDA_EPSILON { 0.0 } else { v };
        Ok(Self {
            lambda_s: clamp(lambda_s),
            lambda_b: clamp(lambda_b),
        })
    }

    pub fn lambda_s(&self) -> f64 {
        self.lambda_s
    }

    pub fn lambda_b(&self) -> f64 {
        self.lambda_b
    }

    /// Mean count for a transmitted symbol.
    pub fn mean_for(&self, bit: bool) -> f64 {
        if bit {
            self.lambda_s + self.lambda_b
        } else {
            self.lambda_b
        }
    }

    /// Signal mean scaled by a link gain.
    pub fn scaled(&self, gain: f64) -> Result<Self, PhyError> {
        if !gain.is_finite() || gain < 0.0 {
            return Err(PhyError::InvalidLink);
        }
        Self::new(self.lambda_s * gain, self.lambda_b)
    }
}

/// Subdivision of a symbol into `M` equal chips. The chip duration is
/// always derived (`T_c = T_s / M`), never stored separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChipConfig {
    chips_per_symbol: u32,
    symbol_duration_s: f64,
}

impl ChipConfig {
    pub fn new(chips_per_symbol: u32, symbol_duration_s: f64) -> Result<Self, PhyError> {
        if chips_per_symbol == 0 || !symbol_duration_s.is_finite() || symbol_duration_s <= 0.0 {
            return Err(PhyError::InvalidChipConfig);
        }
        Ok(Self {
            chips_per_symbol,
            symbol_duration_s,
        })
    }

    pub fn chips_per_symbol(&self) -> u32 {
        self.chips_per_symbol
    }

    pub fn symbol_duration_s(&self) -> f64 {
        self.symbol_duration_s
    }

    pub fn chip_duration_s(&self) -> f64 {
        self.symbol_duration_s / self.chips_per_symbol as f64
    }
}

/// One directed link of the network: who talks to whom, with what Poisson
/// means, geometry-driven gain, and distance.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelLink {
    pub src: NodeId,
    pub dst: NodeId,
    pub means: PoissonMeans,
    /// Dimensionless multiplier applied to λ_s; captures FOV/orientation.
    pub gain: f64,
    pub distance_m: f64,
}

impl ChannelLink {
    pub fn new(
        src: NodeId,
        dst: NodeId,
        means: PoissonMeans,
        gain: f64,
        distance_m: f64,
    ) -> Result<Self, PhyError> {
        if src == dst || !gain.is_finite() || gain < 0.0 || !distance_m.is_finite() || distance_m <= 0.0 {
            return Err(PhyError::InvalidLink);
        }
        Ok(Self {
            src,
            dst,
            means,
            gain,
            distance_m,
        })
    }

    /// Means seen by the receiver after the link gain.
    pub fn effective_means(&self) -> PoissonMeans {
        // Gain validated at construction; scaling cannot fail.
        self.means.scaled(self.gain).expect("validated gain")
    }
}

/// Poisson probability mass `mean^n e^{-mean} / n!`.
///
/// `n` is unsigned by construction; a negative mean is a domain error.
pub fn poisson_pmf(n: u64, mean: f64) -> Result<f64, PhyError> {
    if !mean.is_finite() || mean < 0.0 {
        return Err(PhyError::InvalidMean(mean));
    }
    if mean == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    // The running product stays bounded by the modal pmf value, so the
    // direct recurrence is stable; fall back to the log domain where the
    // leading factor would underflow or the walk gets long.
    if mean > 700.0 || n > 2000 {
        let ln_p = n as f64 * math::ln(mean) - mean - math::ln_factorial(n);
        return Ok(math::exp(ln_p));
    }
    let mut p = math::exp(-mean);
    for k in 1..=n {
        p *= mean / k as f64;
    }
    Ok(p)
}

/// Draw from Poisson(mean). Sequential-search inversion below
/// [`INVERSION_MEAN_LIMIT`], PTRS transformed rejection above it.
pub fn sample_poisson(mean: f64, rng: &mut SimRng) -> u64 {
    debug_assert!(mean.is_finite() && mean >= 0.0);
    if mean <= 0.0 {
        return 0;
    }
    if mean < INVERSION_MEAN_LIMIT {
        sample_poisson_inversion(mean, rng)
    } else {
        sample_poisson_ptrs(mean, rng)
    }
}

fn sample_poisson_inversion(mean: f64, rng: &mut SimRng) -> u64 {
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut p = math::exp(-mean);
    let mut cdf = p;
    // Far enough into the tail that P(overrun) is negligible even for
    // u -> 1; the cap only guards against float-accumulation stalls.
    let cap = (mean + 30.0 * math::sqrt(mean) + 50.0) as u64;
    while u > cdf && k < cap {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
    }
    k
}

/// Hörmann's PTRS transformed-rejection sampler (valid for mean >= 10).
fn sample_poisson_ptrs(mean: f64, rng: &mut SimRng) -> u64 {
    let smu = math::sqrt(mean);
    let b = 0.931 + 2.53 * smu;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    let ln_mean = math::ln(mean);

    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - math::abs(u);
        let k = math::floor((2.0 * a / us + b) * u + mean + 0.43);
        if us >= 0.07 && v <= v_r {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = math::ln(v * inv_alpha / (a / (us * us) + b));
        let rhs = k * ln_mean - mean - math::ln_factorial(k as u64);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

/// Photoelectron count observed over one symbol.
pub fn sample_symbol_count(bit: bool, means: &PoissonMeans, rng: &mut SimRng) -> u64 {
    sample_poisson(means.mean_for(bit), rng)
}

/// Chip counts for one symbol: one symbol-level draw thinned uniformly over
/// the `M` chips, so `sum(chips)` is distributed exactly as the symbol count.
pub fn sample_chip_counts(
    bit: bool,
    means: &PoissonMeans,
    chips: &ChipConfig,
    rng: &mut SimRng,
) -> Vec<u64> {
    let m = chips.chips_per_symbol() as usize;
    let mut counts = vec![0u64; m];
    let total = sample_symbol_count(bit, means, rng);
    for _ in 0..total {
        counts[rng.random_range(0..m)] += 1;
    }
    counts
}

/// Count threshold of the ML detector: decide `1` iff `count >= threshold`.
/// For `λ_b = 0` any photon at all indicates a `1`.
pub fn detection_threshold(means: &PoissonMeans) -> Result<f64, PhyError> {
    let ls = means.lambda_s();
    let lb = means.lambda_b();
    if ls == 0.0 {
        return Err(PhyError::DegenerateChannel);
    }
    if lb == 0.0 {
        return Ok(1.0);
    }
    Ok(ls / math::ln(1.0 + ls / lb))
}

/// Maximum-likelihood OOK symbol decision.
pub fn ml_detect_symbol(count: u64, means: &PoissonMeans) -> Result<bool, PhyError> {
    let threshold = detection_threshold(means)?;
    Ok(count as f64 >= threshold)
}

/// Smallest count that decides `1`.
pub fn decision_count(means: &PoissonMeans) -> Result<u64, PhyError> {
    let t = detection_threshold(means)?;
    if t <= 0.0 {
        return Ok(0);
    }
    let c = -math::floor(-t); // ceil
    Ok(c as u64)
}

/// Exact OOK symbol error probability of the ML detector for equiprobable
/// bits: `0.5 [ P(N < n* | on) + P(N >= n* | off) ]`.
pub fn analytic_ook_ber(means: &PoissonMeans) -> Result<f64, PhyError> {
    let n_star = decision_count(means)?;
    let mut p_low_on = 0.0f64;
    let mut p_low_off = 0.0f64;
    for n in 0..n_star {
        p_low_on += poisson_pmf(n, means.mean_for(true))?;
        p_low_off += poisson_pmf(n, means.mean_for(false))?;
    }
    Ok(0.5 * (p_low_on + (1.0 - p_low_off)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, StreamPurpose};

    fn rng() -> SimRng {
        substream(0xFEED, NodeId(2), StreamPurpose::Auxiliary)
    }

    #[test]
    fn pmf_empty_channel() {
        assert_eq!(poisson_pmf(0, 0.0).unwrap(), 1.0);
        assert_eq!(poisson_pmf(3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn pmf_unit_mean_at_zero() {
        // e^{-1}, the definition of the PMF at n = 0.
        let expected = 0.36787944117144233;
        assert!((poisson_pmf(0, 1.0).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn pmf_five_five() {
        // 5^5 e^{-5} / 5! evaluated with 50-digit arithmetic.
        let expected = 0.1754673697678507;
        assert!((poisson_pmf(5, 5.0).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn pmf_log_domain_agrees_with_recurrence() {
        // Same value through both computation paths near the switch point.
        let direct = poisson_pmf(1999, 600.0).unwrap();
        let ln_p = 1999.0 * math::ln(600.0) - 600.0 - math::ln_factorial(1999);
        assert!((direct - math::exp(ln_p)).abs() <= 1e-12 * direct.max(1e-300));
    }

    #[test]
    fn pmf_rejects_bad_means() {
        assert!(poisson_pmf(0, -1.0).is_err());
        assert!(poisson_pmf(0, f64::NAN).is_err());
    }

    #[test]
    fn means_clamp_tiny_values_to_zero() {
        let m = PoissonMeans::new(1e-13, 1e-13).unwrap();
        assert_eq!(m.lambda_s(), 0.0);
        assert_eq!(m.lambda_b(), 0.0);
        assert!(PoissonMeans::new(-0.1, 0.0).is_err());
    }

    #[test]
    fn zero_mean_samples_are_zero() {
        let means = PoissonMeans::new(10.0, 0.0).unwrap();
        let mut r = rng();
        for _ in 0..100 {
            assert_eq!(sample_symbol_count(false, &means, &mut r), 0);
        }
    }

    #[test]
    fn chip_counts_all_zero_without_light() {
        let means = PoissonMeans::new(10.0, 0.0).unwrap();
        let chips = ChipConfig::new(10, 0.5e-6).unwrap();
        let mut r = rng();
        assert_eq!(sample_chip_counts(false, &means, &chips, &mut r), vec![0; 10]);
    }

    #[test]
    fn chip_config_derives_duration() {
        let chips = ChipConfig::new(10, 0.5e-6).unwrap();
        assert!((chips.chip_duration_s() - 0.05e-6).abs() < 1e-20);
        assert!(ChipConfig::new(0, 0.5e-6).is_err());
        assert!(ChipConfig::new(4, 0.0).is_err());
    }

    #[test]
    fn detector_examples_at_ten_to_one() {
        let means = PoissonMeans::new(10.0, 1.0).unwrap();
        // Threshold λs / ln(1 + λs/λb) = 10 / ln 11 ≈ 4.1703.
        let t = detection_threshold(&means).unwrap();
        assert!((t - 4.170323914242463).abs() < 1e-12);
        assert!(ml_detect_symbol(5, &means).unwrap());
        assert!(!ml_detect_symbol(4, &means).unwrap());
        assert_eq!(decision_count(&means).unwrap(), 5);
    }

    #[test]
    fn detector_without_background_needs_one_photon() {
        let means = PoissonMeans::new(10.0, 0.0).unwrap();
        assert!(!ml_detect_symbol(0, &means).unwrap());
        assert!(ml_detect_symbol(1, &means).unwrap());
    }

    #[test]
    fn degenerate_channel_is_an_error() {
        let means = PoissonMeans::new(0.0, 1.0).unwrap();
        assert_eq!(ml_detect_symbol(3, &means), Err(PhyError::DegenerateChannel));
    }

    #[test]
    fn link_validation() {
        let means = PoissonMeans::new(10.0, 1.0).unwrap();
        assert!(ChannelLink::new(NodeId(1), NodeId(1), means, 1.0, 5.0).is_err());
        assert!(ChannelLink::new(NodeId(1), NodeId(2), means, -1.0, 5.0).is_err());
        assert!(ChannelLink::new(NodeId(1), NodeId(2), means, 1.0, 0.0).is_err());
        let link = ChannelLink::new(NodeId(1), NodeId(2), means, 0.5, 5.0).unwrap();
        assert!((link.effective_means().lambda_s() - 5.0).abs() < 1e-12);
        assert!((link.effective_means().lambda_b() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn analytic_ber_matches_pmf_sums() {
        // Independent route: direct PMF accumulation at the frozen threshold.
        let means = PoissonMeans::new(10.0, 1.0).unwrap();
        let ber = analytic_ook_ber(&means).unwrap();
        let expected = 0.009382223739761065; // 50-digit arithmetic
        assert!((ber - expected).abs() < 1e-12);
    }
}
