mod common;

use common::{close, naive_features};
use faultlm::features::{feature_table, feature_vector_of, FeatureError, FeatureTable, FEATURE_NAMES};
use faultlm::preprocess::{segment, SegmentMode};
use faultlm::signal::{FaultAnnotation, FaultKind, FaultSize, OperatingCondition};
use faultlm::synth::{generate, SynthSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn random_segments_match_naive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..500 {
        let l = [2, 3, 16, 100, 512][i % 5];
        let x: Vec<f64> = (0..l).map(|_| rng.random_range(-3.0..3.0)).collect();
        let got = feature_vector_of(&x, 12000.0).unwrap().to_array();
        let want = naive_features(&x, 12000.0);
        for (k, (a, b)) in got.iter().zip(&want).enumerate() {
            assert!(close(*a, *b, 1e-9, 1e-12), "{} L={l}: {a} vs {b}", FEATURE_NAMES[k]);
        }
    }
}

#[test]
fn synthetic_inner_race_segment_matches_oracle() {
    let spec = SynthSpec::new(
        FaultAnnotation::fault(FaultKind::InnerRace, FaultSize::Mils14).unwrap(),
        OperatingCondition::cwru(2).unwrap(),
        5,
    );
    let sig = generate(&spec).unwrap();
    for seg in segment(&sig, 512, 20, SegmentMode::RandomStart, 1).unwrap() {
        let got = feature_vector_of(&seg.samples, 12000.0).unwrap().to_array();
        let want = naive_features(&seg.samples, 12000.0);
        for (a, b) in got.iter().zip(&want) {
            assert!(close(*a, *b, 1e-9, 1e-12), "{a} vs {b}");
        }
    }
}

#[test]
fn hand_examples() {
    let f = feature_vector_of(&[1.0, -1.0, 1.0, -1.0], 4.0).unwrap();
    let t = f.time;
    assert_eq!(
        [
            t.mean,
            t.rms,
            t.std,
            t.crest_factor,
            t.skewness,
            t.shape_factor,
            t.kurtosis,
            t.peak_to_peak,
            t.energy_factor,
            t.impulse_factor
        ],
        [0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 2.0, 0.25, 1.0]
    );
    let c = feature_vector_of(&[2.0; 8], 12000.0).unwrap();
    assert_eq!((c.time.mean, c.time.rms, c.time.std), (2.0, 2.0, 0.0));
    assert_eq!(
        (
            c.time.skewness,
            c.time.kurtosis,
            c.time.crest_factor,
            c.time.peak_to_peak
        ),
        (0.0, 0.0, 1.0, 0.0)
    );
    assert_eq!(c.freq.peak_frequency, 0.0);
    let z = feature_vector_of(&[0.0; 4], 12000.0).unwrap();
    assert!(z.to_array().iter().all(|v| *v == 0.0));
    assert!(matches!(
        feature_vector_of(&[1.0], 1.0),
        Err(FeatureError::SegmentTooShort(1))
    ));
}

#[test]
fn tone_on_a_bin_center() {
    let (fs, l) = (12000.0, 512);
    let f0 = 40.0 * fs / l as f64;
    let x: Vec<f64> = (0..l)
        .map(|n| (2.0 * std::f64::consts::PI * f0 * n as f64 / fs).cos())
        .collect();
    let f = feature_vector_of(&x, fs).unwrap();
    assert!((f.freq.peak_frequency - f0).abs() <= fs / (2.0 * l as f64));
    assert_eq!(f.freq.peak_bin, 40);
}

#[test]
fn table_shape_and_csv_round_trip() {
    let spec = SynthSpec::new(FaultAnnotation::normal(), OperatingCondition::cwru(0).unwrap(), 2);
    let segs = segment(&generate(&spec).unwrap(), 512, 3, SegmentMode::ContiguousNonOverlap, 0).unwrap();
    let table = feature_table(&segs, 12000.0).unwrap();
    assert_eq!(table.len(), 3);
    let csv = table.to_csv_string();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), FEATURE_NAMES.join(","));
    assert_eq!(lines.count(), 3);
    let back = FeatureTable::read_csv(csv.as_bytes()).unwrap();
    for (a, b) in back.rows.iter().zip(&table.rows) {
        for (x, y) in a.to_array().iter().zip(b.to_array()) {
            assert!(close(*x, y, 1e-11, 1e-300), "{x} vs {y}");
        }
    }
    assert!(matches!(feature_table(&[], 12000.0), Err(FeatureError::EmptyInput)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn identities(x in prop::collection::vec(-20.0f64..20.0, 2..300)) {
        let t = feature_vector_of(&x, 12000.0).unwrap().time;
        prop_assert!(t.rms >= 0.0 && t.std >= 0.0 && t.peak_to_peak >= 0.0);
        prop_assert!(close(t.rms * t.rms, t.std * t.std + t.mean * t.mean, 1e-9, 1e-12));
        if x.iter().any(|v| *v != 0.0) {
            prop_assert!(close(t.impulse_factor, t.crest_factor * t.shape_factor, 1e-9, 0.0));
            prop_assert!(t.crest_factor >= 1.0 - 1e-12 && t.shape_factor >= 1.0 - 1e-12 && t.impulse_factor >= 1.0 - 1e-12);
        }
        if t.std > 0.0 {
            prop_assert!(t.kurtosis >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn scale_covariance(x in prop::collection::vec(-5.0f64..5.0, 2..200), a in 0.01f64..100.0) {
        prop_assume!(x.iter().any(|v| v.abs() > 1e-3));
        let t = feature_vector_of(&x, 12000.0).unwrap().time;
        let xs: Vec<f64> = x.iter().map(|v| a * v).collect();
        let s = feature_vector_of(&xs, 12000.0).unwrap().time;
        for (p, q) in [(s.mean, a * t.mean), (s.rms, a * t.rms), (s.std, a * t.std), (s.peak_to_peak, a * t.peak_to_peak)] {
            prop_assert!(close(p, q, 1e-9, 1e-12));
        }
        for (p, q) in [(s.crest_factor, t.crest_factor), (s.shape_factor, t.shape_factor), (s.impulse_factor, t.impulse_factor)] {
            prop_assert!(close(p, q, 1e-9, 0.0));
        }
        if t.std > 1e-6 * t.rms {
            prop_assert!(close(s.skewness, t.skewness, 1e-9, 1e-9));
            prop_assert!(close(s.kurtosis, t.kurtosis, 1e-9, 0.0));
        }
    }
}
