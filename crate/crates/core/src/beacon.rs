//! Beacon generation and chip-level counting-based beacon detection.
//!
//! The master broadcasts an L-bit maximal-length (m-) sequence once per
//! period. Slaves correlate their raw chip counts against a ±1-mapped copy
//! of the sequence: for each candidate chip offset, the `M` chips under each
//! template symbol are summed and weighted `+1`/`-1` by the template bit.
//! The m-sequence's two-valued autocorrelation makes the aligned offset win
//! by a margin proportional to the received signal strength, giving
//! chip-resolution sync without any carrier or clock reference.
//!
//! Detection is thresholded against a contrast estimate taken from the same
//! window (mean of the upper half of the sorted chip counts minus mean of
//! the lower half), so no prior knowledge of the link budget is required.

use alloc::vec::Vec;
use core::fmt;

use crate::phy::{sample_poisson, ChipConfig, PoissonMeans};
use crate::rng::SimRng;

/// Default detection threshold as a fraction of `L × (λ̂_on − λ̂_off)` in
/// symbol units. The aligned peak sits near `0.5 × L × contrast` (roughly
/// half the template bits are ones), so 0.25 leaves a wide margin above the
/// noise floor while staying far below the expected peak.
pub const DEFAULT_THRESHOLD_RATIO: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeaconError {
    /// Degree outside [2, 16], or taps missing the leading/constant term.
    InvalidTaps { degree: u32, taps: u32 },
    /// The taps are not a primitive polynomial: the LFSR state cycle is
    /// shorter than 2^degree - 1.
    NonPrimitiveTaps { degree: u32, taps: u32, period: u64 },
    /// Requested length shorter than one full m-sequence period.
    LengthTooShort { len: usize, period: usize },
    /// Correlation window shorter than one beacon plus one symbol of slack.
    InsufficientWindow { have: usize, need: usize },
    /// Threshold ratio must be strictly positive.
    InvalidThreshold,
}

impl fmt::Display for BeaconError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BeaconError::InvalidTaps { degree, taps } => {
                write!(f, "invalid tap mask {taps:#x} for degree {degree}")
            }
            BeaconError::NonPrimitiveTaps { degree, taps, period } => write!(
                f,
                "taps {taps:#x} of degree {degree} are not primitive (state period {period})"
            ),
            BeaconError::LengthTooShort { len, period } => {
                write!(f, "beacon length {len} is shorter than the m-sequence period {period}")
            }
            BeaconError::InsufficientWindow { have, need } => {
                write!(f, "correlation window of {have} chips, need at least {need}")
            }
            BeaconError::InvalidThreshold => write!(f, "threshold ratio must be positive"),
        }
    }
}

impl core::error::Error for BeaconError {}

/// How the configured beacon length was reached from the natural
/// m-sequence period of `2^degree - 1` bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadPolicy {
    /// The length equals the natural period; no padding.
    Natural,
    /// The sequence repeats cyclically from its start for this many bits.
    CyclicExtension { bits: usize },
}

/// The master's beacon: an m-sequence, cyclically padded to the configured
/// length if that exceeds the natural period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeaconSequence {
    bits: Vec<bool>,
    degree: u32,
    taps: u32,
    pad: PadPolicy,
}

impl BeaconSequence {
    /// Generate the maximal-length sequence for a primitive polynomial.
    ///
    /// `taps` is the full polynomial mask: bit `i` set means the term `x^i`
    /// is present; both `x^degree` and the constant term must be set.
    /// Primitivity is verified by an explicit state-period check, so
    /// non-primitive taps are rejected rather than silently producing a
    /// short-cycle sequence.
    pub fn generate(degree: u32, taps: u32, len: usize) -> Result<Self, BeaconError> {
        if !(2..=16).contains(&degree)
            || taps & (1 << degree) == 0
            || taps & 1 == 0
            || taps >> (degree + 1) != 0
        {
            return Err(BeaconError::InvalidTaps { degree, taps });
        }
        let period = (1usize << degree) - 1;
        if len < period {
            return Err(BeaconError::LengthTooShort { len, period });
        }

        // Fibonacci LFSR: state holds (a_n .. a_{n+d-1}); the new bit is the
        // parity of the tapped state bits (taps x^0..x^{d-1}).
        let fb_mask = taps & ((1u32 << degree) - 1);
        let mut state = 1u32;
        let mut natural = Vec::with_capacity(period);
        let mut steps = 0u64;
        loop {
            natural.push(state & 1 == 1);
            let new_bit = (state & fb_mask).count_ones() & 1;
            state = (state >> 1) | (new_bit << (degree - 1));
            steps += 1;
            if state == 1 {
                break;
            }
            if steps > period as u64 {
                return Err(BeaconError::NonPrimitiveTaps { degree, taps, period: steps });
            }
        }
        if steps != period as u64 {
            return Err(BeaconError::NonPrimitiveTaps { degree, taps, period: steps });
        }

        let pad = if len == period {
            PadPolicy::Natural
        } else {
            PadPolicy::CyclicExtension { bits: len - period }
        };
        let bits = (0..len).map(|i| natural[i % period]).collect();
        Ok(Self { bits, degree, taps, pad })
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn taps(&self) -> u32 {
        self.taps
    }

    pub fn pad_policy(&self) -> PadPolicy {
        self.pad
    }

    /// Natural m-sequence period for this degree.
    pub fn natural_period(&self) -> usize {
        (1usize << self.degree) - 1
    }

    /// ±1 mapping of bit `k` (`1 → +1`, `0 → -1`).
    pub fn weight(&self, k: usize) -> i64 {
        if self.bits[k] {
            1
        } else {
            -1
        }
    }
}

/// Known-primitive default polynomial per degree (full mask including the
/// leading and constant terms). The generator re-verifies primitivity, so
/// a table mistake cannot slip through silently.
pub fn default_primitive_poly(degree: u32) -> Option<u32> {
    Some(match degree {
        2 => 0x7,
        3 => 0xB,
        4 => 0x13,
        5 => 0x25,
        6 => 0x43,
        7 => 0x89,
        8 => 0x171,
        9 => 0x211,
        10 => 0x409,
        11 => 0x805,
        12 => 0x1053,
        13 => 0x201B,
        14 => 0x4443,
        15 => 0x8003,
        16 => 0x1100B,
        _ => return None,
    })
}

/// Default beacon polynomial: degree 8, x^8 + x^6 + x^5 + x^4 + 1.
pub const DEFAULT_DEGREE: u32 = 8;
pub const DEFAULT_TAPS: u32 = 0x171;

/// Correlation scores over all candidate chip offsets of a window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrelationProfile {
    values: Vec<i64>,
    peak_index: usize,
    peak_value: i64,
}

impl CorrelationProfile {
    pub fn values(&self) -> &[i64] {
        &self.values
    }

    /// Smallest offset attaining the maximum score.
    pub fn peak_index(&self) -> usize {
        self.peak_index
    }

    pub fn peak_value(&self) -> i64 {
        self.peak_value
    }
}

/// Correlate raw chip counts against the ±1 beacon template.
///
/// `score(o) = Σ_k s_k · (c[o + kM] + … + c[o + kM + M - 1])` where `s_k`
/// is the ±1-mapped template bit. The window must hold at least one full
/// beacon plus one symbol of slack.
pub fn correlate_counts(
    chip_counts: &[u64],
    template: &BeaconSequence,
    chips_per_symbol: u32,
) -> Result<CorrelationProfile, BeaconError> {
    let m = chips_per_symbol as usize;
    let l = template.len();
    let span = l * m;
    let need = span + m - 1;
    if chip_counts.len() < need {
        return Err(BeaconError::InsufficientWindow { have: chip_counts.len(), need });
    }

    // Prefix sums make each symbol-group sum O(1).
    let mut prefix = Vec::with_capacity(chip_counts.len() + 1);
    prefix.push(0i64);
    let mut acc = 0i64;
    for &c in chip_counts {
        acc += c as i64;
        prefix.push(acc);
    }

    let offsets = chip_counts.len() - span + 1;
    let mut values = Vec::with_capacity(offsets);
    let mut peak_value = i64::MIN;
    let mut peak_index = 0usize;
    for o in 0..offsets {
        let mut score = 0i64;
        for k in 0..l {
            let start = o + k * m;
            let group = prefix[start + m] - prefix[start];
            score += template.weight(k) * group;
        }
        if score > peak_value {
            peak_value = score;
            peak_index = o;
        }
        values.push(score);
    }

    Ok(CorrelationProfile { values, peak_index, peak_value })
}

/// Data-driven estimate of the per-chip on/off count means: the window's
/// chip counts are sorted and split in half; the lower half estimates the
/// background-only chips, the upper half the illuminated ones.
pub fn chip_class_means(chip_counts: &[u64]) -> (f64, f64) {
    if chip_counts.is_empty() {
        return (0.0, 0.0);
    }
    let mut sorted: Vec<u64> = chip_counts.to_vec();
    sorted.sort_unstable();
    let half = sorted.len() / 2;
    let mean = |s: &[u64]| {
        if s.is_empty() {
            0.0
        } else {
            s.iter().map(|&c| c as f64).sum::<f64>() / s.len() as f64
        }
    };
    (mean(&sorted[..half]), mean(&sorted[half..]))
}

/// A successful beacon detection. `chip_offset` points at the first chip of
/// the beacon within the examined window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncDetection {
    pub chip_offset: usize,
    pub peak_value: i64,
    pub threshold: f64,
}

/// Threshold the correlation peak against a contrast estimated from the
/// window itself. Returns `Ok(None)` when nothing crosses the threshold —
/// the slave simply keeps listening.
pub fn detect_beacon(
    chip_counts: &[u64],
    template: &BeaconSequence,
    chips_per_symbol: u32,
    threshold_ratio: f64,
) -> Result<Option<SyncDetection>, BeaconError> {
    if !threshold_ratio.is_finite() || threshold_ratio <= 0.0 {
        return Err(BeaconError::InvalidThreshold);
    }
    let profile = correlate_counts(chip_counts, template, chips_per_symbol)?;
    let (low, high) = chip_class_means(chip_counts);
    let contrast_per_symbol = (high - low) * chips_per_symbol as f64;
    if contrast_per_symbol <= 0.0 {
        return Ok(None);
    }
    let threshold = threshold_ratio * template.len() as f64 * contrast_per_symbol;
    if profile.peak_value() as f64 >= threshold {
        Ok(Some(SyncDetection {
            chip_offset: profile.peak_index(),
            peak_value: profile.peak_value(),
            threshold,
        }))
    } else {
        Ok(None)
    }
}

/// Chip counts for a beacon transmission embedded in background noise,
/// starting `offset_chips` into the window. Used by receivers and tests to
/// produce windows with a known ground-truth alignment.
pub fn beacon_window_counts(
    template: &BeaconSequence,
    means: &PoissonMeans,
    chips: &ChipConfig,
    offset_chips: usize,
    window_chips: usize,
    rng: &mut SimRng,
) -> Vec<u64> {
    let m = chips.chips_per_symbol() as usize;
    let chip_bg = means.lambda_b() / m as f64;
    let chip_sig = means.lambda_s() / m as f64;
    let span = template.len() * m;
    (0..window_chips)
        .map(|c| {
            let mean = if c >= offset_chips && c < offset_chips + span {
                let bit = template.bits()[(c - offset_chips) / m];
                if bit {
                    chip_sig + chip_bg
                } else {
                    chip_bg
                }
            } else {
                chip_bg
            };
            sample_poisson(mean, rng)
        })
        .collect()
}
