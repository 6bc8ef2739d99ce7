//! Correlation-oracle and Monte-Carlo checks of the beacon receiver.

use uvtdma_core::beacon::{
    beacon_window_counts, correlate_counts, detect_beacon, BeaconSequence, DEFAULT_TAPS,
};
use uvtdma_core::phy::{ChipConfig, PoissonMeans};
use uvtdma_core::rng::{substream, SimRng, StreamPurpose};
use uvtdma_core::NodeId;

fn rng(tag: u64) -> SimRng {
    substream(tag, NodeId(3), StreamPurpose::Auxiliary)
}

/// Brute-force ±1 cyclic autocorrelation — the classic two-valued
/// m-sequence property, computed directly from the definition.
#[test]
fn msequence_cyclic_autocorrelation_is_two_valued() {
    let period = 255usize;
    let seq = BeaconSequence::generate(8, DEFAULT_TAPS, period).unwrap();
    let s: Vec<i64> = (0..period).map(|k| seq.weight(k)).collect();
    for lag in 0..period {
        let corr: i64 = (0..period).map(|k| s[k] * s[(k + lag) % period]).sum();
        if lag == 0 {
            assert_eq!(corr, 255);
        } else {
            assert_eq!(corr, -1, "lag {lag}");
        }
    }
}

/// Every nonzero cyclic chip shift of the noiseless beacon waveform
/// correlates strictly below the aligned offset.
#[test]
fn all_chip_shifts_score_below_alignment() {
    let m = 10usize;
    let seq = BeaconSequence::generate(8, DEFAULT_TAPS, 256).unwrap();
    let l = seq.len();
    let span = l * m;
    // Noiseless 0/1 chip waveform of one beacon period.
    let waveform: Vec<u64> = (0..span).map(|c| seq.bits()[c / m] as u64).collect();

    // Score the template against each cyclic shift at the aligned offset.
    let score_at_shift = |shift: usize| -> i64 {
        (0..l)
            .map(|k| {
                let group: u64 = (0..m).map(|i| waveform[(k * m + i + shift) % span]).sum();
                seq.weight(k) * group as i64
            })
            .sum()
    };

    let aligned = score_at_shift(0);
    for shift in 1..span {
        let shifted = score_at_shift(shift);
        assert!(shifted < aligned, "shift {shift}: {shifted} vs aligned {aligned}");
    }
}

#[test]
fn offset_recovery_rate_at_moderate_snr() {
    // Counts generated with the beacon starting at chip 37, per-symbol
    // means (10, 1): the profile peak must land exactly on 37 in at least
    // 99% of a thousand seeded trials.
    let m = 10u32;
    let seq = BeaconSequence::generate(8, DEFAULT_TAPS, 256).unwrap();
    let means = PoissonMeans::new(10.0, 1.0).unwrap();
    let chips = ChipConfig::new(m, 0.5e-6).unwrap();
    let offset = 37usize;
    let window = offset + 256 * m as usize + 19;
    let mut r = rng(11);
    let mut exact = 0u32;
    let trials = 1000u32;
    for _ in 0..trials {
        let counts = beacon_window_counts(&seq, &means, &chips, offset, window, &mut r);
        let profile = correlate_counts(&counts, &seq, m).unwrap();
        if profile.peak_index() == offset {
            exact += 1;
        }
    }
    assert!(exact >= 990, "exact-offset rate {exact}/1000");
}

#[test]
fn detection_rate_is_one_at_high_snr() {
    // (λs, λb) = (10, 0.1) per symbol with the default threshold ratio.
    let m = 10u32;
    let seq = BeaconSequence::generate(8, DEFAULT_TAPS, 256).unwrap();
    let means = PoissonMeans::new(10.0, 0.1).unwrap();
    let chips = ChipConfig::new(m, 0.5e-6).unwrap();
    let offset = 12usize;
    let window = offset + 256 * m as usize + 19;
    let mut r = rng(12);
    let trials = 1000u32;
    let mut detected = 0u32;
    for _ in 0..trials {
        let counts = beacon_window_counts(&seq, &means, &chips, offset, window, &mut r);
        if let Some(det) =
            detect_beacon(&counts, &seq, m, uvtdma_core::beacon::DEFAULT_THRESHOLD_RATIO).unwrap()
        {
            if det.chip_offset == offset {
                detected += 1;
            }
        }
    }
    assert_eq!(detected, trials, "detection rate {detected}/{trials}");
}

#[test]
fn false_alarm_rate_on_pure_background() {
    // No beacon, background 1.0 per symbol, threshold ratio 0.5: at most
    // 1% of a thousand windows may cross the threshold.
    let m = 10u32;
    let seq = BeaconSequence::generate(8, DEFAULT_TAPS, 256).unwrap();
    let means = PoissonMeans::new(0.0, 1.0).unwrap();
    let chips = ChipConfig::new(m, 0.5e-6).unwrap();
    let window = 256 * m as usize + 60;
    let mut r = rng(13);
    let trials = 1000u32;
    let mut alarms = 0u32;
    for _ in 0..trials {
        let counts = beacon_window_counts(&seq, &means, &chips, 0, window, &mut r);
        if detect_beacon(&counts, &seq, m, 0.5).unwrap().is_some() {
            alarms += 1;
        }
    }
    assert!(alarms <= 10, "false alarms {alarms}/1000");
}

#[test]
fn profiles_are_bit_identical_across_equal_seeds() {
    let m = 10u32;
    let seq = BeaconSequence::generate(8, DEFAULT_TAPS, 256).unwrap();
    let means = PoissonMeans::new(10.0, 1.0).unwrap();
    let chips = ChipConfig::new(m, 0.5e-6).unwrap();
    let window = 40 + 256 * m as usize + 19;
    let mut ra = rng(14);
    let mut rb = rng(14);
    let ca = beacon_window_counts(&seq, &means, &chips, 40, window, &mut ra);
    let cb = beacon_window_counts(&seq, &means, &chips, 40, window, &mut rb);
    assert_eq!(ca, cb);
    let pa = correlate_counts(&ca, &seq, m).unwrap();
    let pb = correlate_counts(&cb, &seq, m).unwrap();
    assert_eq!(pa.values(), pb.values());
    assert_eq!(pa.peak_index(), pb.peak_index());
}
