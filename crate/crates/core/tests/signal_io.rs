mod common;

use std::path::PathBuf;

use common::mat::{self, Order};
use faultlm::signal::{FaultAnnotation, OperatingCondition, SensorPosition};
use faultlm::signal_io::{load_signal, parse_mat_v5, LoadRequest, MatError, SignalIoError};
use proptest::prelude::*;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/mat")
        .join(name)
}

fn read(name: &str) -> Vec<u8> {
    std::fs::read(fixture(name)).unwrap()
}

fn request(hint: Option<SensorPosition>) -> LoadRequest {
    LoadRequest {
        channel_hint: hint,
        annotation: FaultAnnotation::normal(),
        condition: OperatingCondition::cwru(0).unwrap(),
        sampling_rate_hz: None,
    }
}

#[test]
fn scipy_plain_and_compressed_fixtures() {
    for name in ["x097_plain.mat", "x097_compressed.mat"] {
        let vars = parse_mat_v5(&read(name)).unwrap();
        assert_eq!(vars.len(), 1, "{name}");
        assert_eq!(vars["X097_DE_time"], vec![1.0, 2.0, 3.0, 4.0], "{name}");
    }
}

#[test]
fn load_fixture_with_hint() {
    let s = load_signal(&fixture("x097_plain.mat"), &request(Some(SensorPosition::DriveEnd))).unwrap();
    assert_eq!(s.samples(), &[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(s.sampling_rate_hz(), 12000.0);
    assert_eq!(s.source_id(), "x097_plain:X097_DE_time");
    assert_eq!(s.sensor_position(), SensorPosition::DriveEnd);
}

#[test]
fn two_channels_need_a_hint() {
    let path = fixture("de_and_fe.mat");
    assert!(matches!(
        load_signal(&path, &request(None)),
        Err(SignalIoError::AmbiguousChannel { .. })
    ));
    let fe = load_signal(&path, &request(Some(SensorPosition::FanEnd))).unwrap();
    assert_eq!(fe.samples(), &[-1.0, -2.0, -3.0, -4.0]);
    assert_eq!(fe.sensor_position(), SensorPosition::FanEnd);
    let vars = parse_mat_v5(&read("de_and_fe.mat")).unwrap();
    assert_eq!(vars["X097RPM"], vec![1797.0]);
}

#[test]
fn no_matching_channel() {
    let bytes = mat::write(Order::Little, false, &[("speed", &[1.0])]);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.mat");
    std::fs::write(&p, bytes).unwrap();
    assert!(matches!(
        load_signal(&p, &request(None)),
        Err(SignalIoError::NoMatchingChannel { .. })
    ));
}

#[test]
fn malformed_fixtures_are_typed_errors() {
    assert_eq!(parse_mat_v5(&[]), Err(MatError::TruncatedFile));
    assert!(matches!(
        parse_mat_v5(&read("bad_magic.mat")),
        Err(MatError::BadMagic(_))
    ));
    assert_eq!(parse_mat_v5(&read("truncated.mat")), Err(MatError::TruncatedFile));
    assert!(matches!(
        parse_mat_v5(&read("corrupt_compressed.mat")),
        Err(MatError::ChecksumOrInflateFailure(_))
    ));
    match parse_mat_v5(&read("cell_array.mat")) {
        Err(MatError::UnsupportedElement(msg)) => assert!(msg.contains("mxCELL_CLASS"), "{msg}"),
        other => panic!("{other:?}"),
    }
    match parse_mat_v5(&read("int32_array.mat")) {
        Err(MatError::UnsupportedElement(msg)) => assert!(msg.contains("mxINT32_CLASS"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn every_truncation_of_a_valid_file_fails_cleanly() {
    for compressed in [false, true] {
        let full = mat::write(Order::Big, compressed, &[("X1_DE_time", &[0.5, -0.25, 8.0])]);
        for cut in 0..full.len() {
            let r = parse_mat_v5(&full[..cut]);
            assert!(r.is_err() || cut <= 128, "cut {cut} parsed");
            if cut > 128 {
                assert!(
                    matches!(
                        r,
                        Err(MatError::TruncatedFile) | Err(MatError::ChecksumOrInflateFailure(_))
                    ),
                    "cut {cut}: {r:?}"
                );
            }
        }
    }
}

#[test]
fn text_and_raw_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("s.txt");
    std::fs::write(&t, "1.0\n-1.0\n").unwrap();
    assert_eq!(load_signal(&t, &request(None)).unwrap().samples(), &[1.0, -1.0]);
    let r = dir.path().join("s.f64");
    std::fs::write(&r, faultlm::signal_io::encode_raw_f64(&[0.1, 2e300])).unwrap();
    assert_eq!(load_signal(&r, &request(None)).unwrap().samples(), &[0.1, 2e300]);
    let bad = dir.path().join("b.txt");
    std::fs::write(&bad, "1.0\nabc\n").unwrap();
    assert!(matches!(
        load_signal(&bad, &request(None)),
        Err(SignalIoError::Text { line: 2, .. })
    ));
}

fn finite_f64() -> impl Strategy<Value = f64> {
    any::<f64>().prop_filter("finite", |v| v.is_finite())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_is_bit_exact(
        values in prop::collection::vec(finite_f64(), 1..10_000),
        compressed in any::<bool>(),
        big in any::<bool>(),
        name in "[A-Za-z][A-Za-z0-9_]{0,20}",
    ) {
        let order = if big { Order::Big } else { Order::Little };
        let bytes = mat::write(order, compressed, &[(&name, &values)]);
        let vars = parse_mat_v5(&bytes).unwrap();
        let got = &vars[&name];
        prop_assert_eq!(got.len(), values.len());
        for (a, b) in got.iter().zip(&values) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn endianness_does_not_change_values(values in prop::collection::vec(finite_f64(), 1..200)) {
        let le = parse_mat_v5(&mat::write(Order::Little, false, &[("x", &values)])).unwrap();
        let be = parse_mat_v5(&mat::write(Order::Big, true, &[("x", &values)])).unwrap();
        prop_assert_eq!(le, be);
    }
}
