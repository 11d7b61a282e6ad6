use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use faultlm::evalkit::map_prediction;
use faultlm::features::FeatureVector;
use faultlm::preprocess::encode_values;
use faultlm::promptgen::{
    build_subset, label_for, make_input, make_instruction, read_jsonl, read_jsonl_from, write_jsonl, write_jsonl_to,
    BuildConfig, EquipChoice, EquipInfo, Label, Payload, PromptError, PromptRecord, RecordMeta, Scheme, Track,
};
use faultlm::signal::{FaultAnnotation, FaultKind, FaultSize, OperatingCondition, SensorPosition};
use faultlm::synth::generate_subset;
use proptest::prelude::*;

fn golden(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/prompts")
        .join(name);
    std::fs::read_to_string(p).unwrap().trim_end_matches('\n').to_string()
}

fn bench_equip() -> EquipInfo {
    EquipInfo {
        name: "Bench motor".into(),
        model: "B-1".into(),
        geometry: BTreeMap::from([
            ("pitch diameter".to_string(), "1.537 in".to_string()),
            ("balls".to_string(), "9".to_string()),
        ]),
    }
}

#[test]
fn instructions_match_golden_files() {
    let e = bench_equip();
    assert_eq!(
        make_instruction(Some(&e), 0, 1797, Track::Fft),
        golden("fft_equip_0hp.txt")
    );
    assert_eq!(
        make_instruction(None, 0, 1797, Track::Fft),
        golden("fft_no_equip_0hp.txt")
    );
    assert_eq!(
        make_instruction(Some(&e), 3, 1730, Track::Stat),
        golden("stat_equip_3hp.txt")
    );
    assert_eq!(
        make_instruction(None, 2, 1750, Track::Stat),
        golden("stat_no_equip_2hp.txt")
    );
    assert_eq!(
        make_instruction(Some(&EquipInfo::cwru(SensorPosition::DriveEnd)), 1, 1772, Track::Fft),
        golden("fft_cwru_de_1hp.txt")
    );
}

#[test]
fn stat_input_matches_golden_file() {
    let f = FeatureVector::from_array([
        0.1,
        0.2,
        0.3,
        1.5,
        -0.25,
        1.25,
        3.0,
        2.0,
        0.125,
        1.875,
        23.4375,
        100.5,
        12.345678,
        1234.5678,
        0.00012345678,
    ]);
    assert_eq!(
        make_input(Track::Stat, Payload::Stat(&f)).unwrap(),
        golden("stat_input.txt")
    );
    let e = encode_values(&[0.0, 0.045, 1.2], 3).unwrap();
    assert_eq!(make_input(Track::Fft, Payload::Fft(&e)).unwrap(), "0,45,1200");
    assert!(matches!(
        make_input(Track::Stat, Payload::Fft(&e)),
        Err(PromptError::TrackMismatch { .. })
    ));
}

#[test]
fn labels() {
    let ir21 = FaultAnnotation::fault(FaultKind::InnerRace, FaultSize::Mils21).unwrap();
    assert_eq!(label_for(ir21, Scheme::Four).unwrap().code(), "IRF");
    assert_eq!(label_for(ir21, Scheme::Ten).unwrap().code(), "IRF3");
    assert_eq!(label_for(FaultAnnotation::normal(), Scheme::Ten).unwrap().code(), "NO");
    assert!(matches!(
        Label::new(Scheme::Ten, FaultKind::OuterRace, None),
        Err(PromptError::MissingSizeForTenScheme(FaultKind::OuterRace))
    ));
    for scheme in [Scheme::Four, Scheme::Ten] {
        for (i, l) in scheme.labels().into_iter().enumerate() {
            assert_eq!(l.index(), i);
            assert_eq!(map_prediction(&l.canonical(), scheme), Some(l));
        }
    }
}

fn subset(load: u8, pos: SensorPosition, seed: u64) -> Vec<faultlm::signal::TimeSeriesSignal> {
    generate_subset(OperatingCondition::cwru(load).unwrap(), pos, 0.1, 10.0, seed).unwrap()
}

#[test]
fn subset_counts_and_determinism() {
    let sigs = subset(0, SensorPosition::DriveEnd, 1);
    let cfg = BuildConfig {
        seed: 4,
        ..Default::default()
    };
    let recs = build_subset(&sigs, &cfg).unwrap();
    assert_eq!(recs.len(), 2300);
    let mut counts: HashMap<String, usize> = HashMap::new();
    for r in &recs {
        *counts.entry(r.meta.label.clone()).or_default() += 1;
        assert_eq!(r.meta.subset_id, "0HPDE");
        assert_eq!(r.input.split(',').count(), 512);
        assert_eq!(map_prediction(&r.output, Scheme::Four), Some(r.label().unwrap()));
    }
    assert_eq!(counts["NO"], 230);
    assert_eq!(counts["IRF"], 690);
    assert_eq!(counts["ORF"], 690);
    assert_eq!(counts["REF"], 690);
    assert_eq!(recs, build_subset(&sigs, &cfg).unwrap());
    let ids: std::collections::HashSet<&str> = recs.iter().map(|r| r.id()).collect();
    assert_eq!(ids.len(), recs.len());

    let stat = build_subset(
        &sigs,
        &BuildConfig {
            track: Track::Stat,
            scheme: Scheme::Ten,
            segments_per_group: 5,
            equip: EquipChoice::Omitted,
            ..cfg
        },
    )
    .unwrap();
    assert_eq!(stat.len(), 50);
    assert!(stat[0]
        .instruction
        .starts_with("Given working conditions: 0 hp, 1797 rpm"));
    assert!(stat
        .iter()
        .all(|r| faultlm::promptgen::parse_features(&r.input).is_some()));
}

#[test]
fn missing_class_is_reported() {
    let sigs: Vec<_> = subset(1, SensorPosition::FanEnd, 2)
        .into_iter()
        .filter(|s| s.fault().kind() != FaultKind::OuterRace)
        .collect();
    assert!(matches!(
        build_subset(&sigs, &BuildConfig::default()),
        Err(PromptError::MissingClass { .. })
    ));
    let mut mixed = subset(0, SensorPosition::DriveEnd, 1);
    mixed.push(subset(0, SensorPosition::FanEnd, 1).remove(0));
    assert!(matches!(
        build_subset(&mixed, &BuildConfig::default()),
        Err(PromptError::MixedConditions(..))
    ));
}

#[test]
fn jsonl_contract() {
    let rec = sample_record(0, "free text");
    let mut buf = Vec::new();
    write_jsonl_to(std::slice::from_ref(&rec), &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1);
    let v: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(sorted, ["input", "instruction", "meta", "output"]);

    let good = text.trim_end().to_string();
    let truncated = format!("{good}\n{good}\n{}\n", &good[..good.len() / 2]);
    match read_jsonl_from(truncated.as_bytes()) {
        Err(PromptError::MalformedLine { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        write_jsonl(&[], &dir.path().join("e.jsonl")),
        Err(PromptError::EmptyInput)
    ));
}

fn sample_record(i: usize, input: &str) -> PromptRecord {
    let scheme = if i.is_multiple_of(2) { Scheme::Four } else { Scheme::Ten };
    let label = scheme.labels()[i % scheme.num_classes()];
    PromptRecord {
        instruction: make_instruction(Some(&bench_equip()), (i % 4) as u8, 1797, Track::Fft),
        input: input.to_string(),
        output: label.canonical(),
        meta: RecordMeta {
            id: format!("rec-{i}"),
            label: label.code(),
            scheme,
            subset_id: "0HPDE".into(),
            source_id: format!("src-{}", i % 7),
            track: Track::Fft,
            segment_start: i * 3,
        },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(5))]

    #[test]
    fn jsonl_round_trip_of_1000_records(inputs in prop::collection::vec(".{0,40}", 1000)) {
        let recs: Vec<PromptRecord> = inputs.iter().enumerate().map(|(i, s)| sample_record(i, s)).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        write_jsonl(&recs, &path).unwrap();
        prop_assert_eq!(read_jsonl(&path).unwrap(), recs);
    }
}
