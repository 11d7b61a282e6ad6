mod common;

use common::{brute_metrics, BruteMetrics};
use faultlm::evalkit::{map_prediction, score, EvalError, EvalReport, LabelMapper, SynonymTable};
use faultlm::promptgen::{Label, Scheme};
use proptest::prelude::*;

fn to_labels(scheme: Scheme, pairs: &[(usize, Option<usize>)]) -> Vec<(Label, Option<Label>)> {
    let labels = scheme.labels();
    pairs.iter().map(|&(t, p)| (labels[t], p.map(|p| labels[p]))).collect()
}

fn assert_matches_oracle(report: &EvalReport, counts: &[Vec<u64>], o: &BruteMetrics) {
    assert_eq!(counts, o.counts.as_slice());
    assert_eq!(report.accuracy, o.accuracy.f64());
    let tight = |a: f64, b: f64| (a - b).abs() <= 4.0 * f64::EPSILON * b.abs().max(1.0);
    assert!(tight(report.macro_precision, o.macro_precision.f64()));
    assert!(tight(report.macro_recall, o.macro_recall.f64()));
    assert!(tight(report.macro_f1, o.macro_f1.f64()));
    for (c, m) in report.per_class.iter().enumerate() {
        assert_eq!(m.precision, o.precision[c].f64());
        assert_eq!(m.recall, o.recall[c].f64());
        assert!(tight(m.f1, o.f1[c].f64()));
    }
}

#[test]
fn two_class_fixture_against_oracle() {
    let pairs = [(0, Some(0)), (0, Some(1)), (1, Some(1)), (1, Some(1))];
    let (r, cm) = score(&to_labels(Scheme::Four, &pairs)).unwrap();
    let o = brute_metrics(4, &pairs);
    assert_eq!(r.accuracy, 0.75);
    assert_eq!(o.macro_f1, common::Q(11, 15));
    assert_matches_oracle(&r, &cm.counts, &o);
}

#[test]
fn constant_answer_on_balanced_classes() {
    let pairs: Vec<(usize, Option<usize>)> = (0..40).map(|i| (i % 4, Some(0))).collect();
    let (r, _) = score(&to_labels(Scheme::Four, &pairs)).unwrap();
    assert_eq!(r.accuracy, 0.25);
    assert!(r.per_class[1..].iter().all(|c| !c.precision_defined));
}

#[test]
fn unmapped_answers_count_as_wrong() {
    let pairs = [(0, None), (1, Some(1)), (2, None)];
    let (r, cm) = score(&to_labels(Scheme::Four, &pairs)).unwrap();
    assert_eq!(r.unmapped_count, 2);
    assert_eq!(cm.counts[0][4], 1);
    assert!((r.accuracy - 1.0 / 3.0).abs() < 1e-15);
    assert!(cm.to_csv().starts_with("true\\pred,NO,IRF,ORF,REF,Unmapped\n"));
    assert!(matches!(score(&[]), Err(EvalError::EmptyInput)));
    let mixed = [(Scheme::Four.labels()[0], None), (Scheme::Ten.labels()[0], None)];
    assert!(matches!(score(&mixed), Err(EvalError::SchemeMismatch)));
}

#[test]
fn custom_synonym_table() {
    let table = SynonymTable::from_toml(
        r#"
[normal]
phrases = ["all good"]
[inner_race]
phrases = ["inside"]
[outer_race]
phrases = ["outside"]
[rolling_element]
phrases = ["rollers"]
"#,
    )
    .unwrap();
    let m = LabelMapper::new(&table);
    assert_eq!(m.map("all good here", Scheme::Four).unwrap().code(), "NO");
    assert_eq!(m.map("rollers", Scheme::Four).unwrap().code(), "REF");
    assert_eq!(m.map("normal", Scheme::Four), None);
    assert_eq!(map_prediction("normal", Scheme::Four).unwrap().code(), "NO");
}

fn pairs_strategy(k: usize) -> impl Strategy<Value = Vec<(usize, Option<usize>)>> {
    prop::collection::vec((0..k, prop::option::weighted(0.85, 0..k)), 1..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_cases_match_brute_force(pairs in pairs_strategy(4), ten in any::<bool>()) {
        let (scheme, k) = if ten { (Scheme::Ten, 10) } else { (Scheme::Four, 4) };
        let (r, cm) = score(&to_labels(scheme, &pairs)).unwrap();
        assert_matches_oracle(&r, &cm.counts, &brute_metrics(k, &pairs));
    }

    #[test]
    fn ten_class_cases_match_brute_force(pairs in pairs_strategy(10)) {
        let (r, cm) = score(&to_labels(Scheme::Ten, &pairs)).unwrap();
        assert_matches_oracle(&r, &cm.counts, &brute_metrics(10, &pairs));
    }

    #[test]
    fn permutation_invariance(pairs in pairs_strategy(4), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let (a, ca) = score(&to_labels(Scheme::Four, &pairs)).unwrap();
        let (b, cb) = score(&to_labels(Scheme::Four, &shuffled)).unwrap();
        prop_assert_eq!(ca, cb);
        prop_assert_eq!(a, b);
    }
}
