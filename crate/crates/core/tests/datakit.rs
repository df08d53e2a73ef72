mod common;

use std::collections::BTreeSet;

use grapheye::datakit::*;
use grapheye::frontend::{parse_function, parse_unit, NodeLabel};
use grapheye::gcgat::{GcGatConfig, GcGatModel, Params};
use grapheye::veccpg::FunctionVocabulary;
use grapheye::Error;

const UNIT: &str = "\
static void helper(int *p) { *p = 0; }
void CWE369_bad() { int x = 0; printIntLine(10 / x); }
void CWE369_good() { int x = 2; if (x != 0) { printIntLine(10 / x); } }
void CWE369_good_helper_call() { int v; helper(&v); }
void CWE369_good_support() { printLine(\"ok\"); }
int main() { CWE369_bad(); return 0; }
";

fn no_allow() -> BTreeSet<String> {
    BTreeSet::new()
}

fn entries(good: usize, bad: usize) -> DatasetManifest {
    let mk = |i: usize, label| ManifestEntry { file: format!("f{}.c", i / 7), function: format!("fn{i}"), label, cwe: "CWE121".into() };
    DatasetManifest::new((0..good).map(|i| mk(i, Label::Good)).chain((good..good + bad).map(|i| mk(i, Label::Bad))).collect())
}

#[test]
fn user_defined_calls_are_detected() {
    let fs = parse_unit(UNIT).unwrap();
    let defined: BTreeSet<String> = fs.iter().map(|f| f.name.clone()).collect();
    let by_name = |n: &str| fs.iter().find(|f| f.name == n).unwrap();
    assert!(detect_user_defined_calls(by_name("CWE369_good_helper_call"), &defined, &no_allow()));
    assert!(!detect_user_defined_calls(by_name("CWE369_bad"), &defined, &no_allow()));
    assert!(!detect_user_defined_calls(by_name("CWE369_good_support"), &defined, &no_allow()));
    let allow = BTreeSet::from(["helper".to_string()]);
    assert!(!detect_user_defined_calls(by_name("CWE369_good_helper_call"), &defined, &allow));
}

#[test]
fn root_functions_are_labeled_by_name() {
    let units = vec![("testcases/CWE369_Divide_by_Zero/a.c".to_string(), parse_unit(UNIT).unwrap())];
    let out = label_functions(&units, |_| "CWE369".into(), &no_allow()).unwrap();
    let got: Vec<(&str, Label)> = out.iter().map(|f| (f.name.as_str(), f.label)).collect();
    assert_eq!(got, [("CWE369_bad", Label::Bad), ("CWE369_good", Label::Good), ("CWE369_good_support", Label::Good)]);
    assert!(out.iter().all(|f| f.cwe == "CWE369" && f.origin == Origin::Sard));
    assert!(out[0].source.starts_with("void CWE369_bad()"));
}

#[test]
fn ambiguous_names_are_errors() {
    let units = vec![("x.c".to_string(), parse_unit("void goodbad() { }").unwrap())];
    let err = label_functions(&units, |_| "CWE0".into(), &no_allow()).unwrap_err();
    assert_eq!(err, LabelError::Ambiguous { file: "x.c".into(), function: "goodbad".into() });
    let upper = vec![("x.c".to_string(), parse_unit("void BadSink() { }").unwrap())];
    assert_eq!(label_functions(&upper, |_| "CWE0".into(), &no_allow()).unwrap()[0].label, Label::Bad);
}

#[test]
fn labeling_is_idempotent_and_reads_cwe_from_path() {
    let units = vec![SourceUnit { path: "juliet/CWE476_NULL/x_01.c".into(), text: UNIT.into() }];
    let first = label_sources(&units, &default_allowlist()).unwrap();
    assert!(first.iter().all(|f| f.cwe == "CWE476"));
    let relabeled: Vec<SourceUnit> =
        first.iter().map(|f| SourceUnit { path: "juliet/CWE476_NULL/x_01.c".into(), text: f.source.clone() }).collect();
    let second = label_sources(&relabeled, &default_allowlist()).unwrap();
    assert_eq!(first, second);
}

#[test]
fn unparsable_units_are_skipped() {
    let units = vec![
        SourceUnit { path: "CWE121/broken.c".into(), text: "void bad() { \"open".into() },
        SourceUnit { path: "CWE121/ok.c".into(), text: "void bad() { }".into() },
    ];
    let out = label_sources(&units, &default_allowlist()).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].file.as_deref(), Some("CWE121/ok.c"));
}

#[test]
fn split_is_eighty_twenty_and_seeded() {
    let m = entries(5, 5);
    let (train, test) = split(&m, 7).unwrap();
    assert_eq!((train.len(), test.len()), (8, 2));
    let mut all: Vec<_> = train.entries.iter().chain(&test.entries).cloned().collect();
    all.sort_by(|a, b| a.function.cmp(&b.function));
    let mut orig = m.entries.clone();
    orig.sort_by(|a, b| a.function.cmp(&b.function));
    assert_eq!(all, orig);
    assert_eq!(split(&m, 7).unwrap(), (train.clone(), test));
    assert_ne!(split(&m, 8).unwrap().0, train);
    let (t, v) = split(&entries(200, 200), 1).unwrap();
    assert_eq!((t.len(), v.len()), (320, 80));
    assert_eq!(t.counts.good + t.counts.bad, 320);
}

#[test]
fn downsampling_balances_classes() {
    let d = downsample(&entries(100, 20), 3).unwrap();
    assert_eq!(d.counts, ClassCounts { good: 20, bad: 20 });
    let d = downsample(&entries(3643, 529), 3).unwrap();
    assert_eq!(d.counts, ClassCounts { good: 529, bad: 529 });
    let set: BTreeSet<_> = d.entries.iter().map(|e| &e.function).collect();
    assert_eq!(set.len(), 1058);
    assert_eq!(downsample(&entries(3643, 529), 3).unwrap(), d);
    assert!(matches!(downsample(&entries(4, 0), 1), Err(DataError::MissingClass { good: 4, bad: 0 })));
}

#[test]
fn synthetic_pairs() {
    for cwe in Cwe::ALL {
        let fs = synth_generate(cwe, 50, 9);
        assert_eq!(fs.len(), 100);
        assert_eq!(fs.iter().filter(|f| f.label == Label::Bad).count(), 50);
        for pair in fs.chunks(2) {
            let bad = parse_function(&pair[0].source).unwrap();
            let good = parse_function(&pair[1].source).unwrap();
            assert_eq!(
                good.count_label(NodeLabel::ControlStructure),
                bad.count_label(NodeLabel::ControlStructure) + 1,
                "{}",
                pair[0].name
            );
            assert_eq!(pair[0].cwe, cwe.tag());
        }
        assert_eq!(synth_generate(cwe, 50, 9), fs);
        assert_ne!(synth_generate(cwe, 50, 10), fs);
    }
}

#[test]
fn corpus_manifest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let fs = synth_generate(Cwe::NullDeref, 6, 2);
    let m = write_corpus(dir.path(), &fs).unwrap();
    assert_eq!(m.counts, ClassCounts { good: 6, bad: 6 });
    let loaded = DatasetManifest::load(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(loaded, m);
    let graphs = loaded.graphs().unwrap();
    assert_eq!(graphs.len(), 12);
    assert!(graphs.iter().zip(&fs).all(|((e, _), f)| e.function == f.name && e.label == f.label));
    let back = DatasetManifest::from_json(&m.to_json(), dir.path()).unwrap();
    assert_eq!(back, m);
}

#[test]
fn manifest_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&entries(2, 2).to_json()).unwrap();
    doc["counts"]["good"] = 3.into();
    assert!(matches!(
        DatasetManifest::from_json(&doc.to_string(), dir.path()),
        Err(Error::Data(DataError::CountsMismatch { .. }))
    ));
    let mut m = entries(1, 1);
    m.base_dir = dir.path().to_path_buf();
    assert!(matches!(m.functions(), Err(Error::Io { .. })));
    std::fs::write(dir.path().join("f0.c"), "void other() { }").unwrap();
    assert!(matches!(m.functions(), Err(Error::Data(DataError::MissingFunction { .. }))));
}

#[test]
fn metric_cases() {
    let c = ConfusionCounts { tp: 8, fp: 2, tn: 6, fn_: 4 };
    let m = compute_metrics(&c);
    assert_eq!(m.precision, Some(0.8));
    assert_eq!(m.tpr, Some(8.0 / 12.0));
    assert_eq!(m.fpr, Some(0.25));
    assert!((m.f1.unwrap() - 2.0 * 0.8 * (2.0 / 3.0) / (0.8 + 2.0 / 3.0)).abs() < 1e-15);
    assert!((m.tpr.unwrap() + m.fnr.unwrap() - 1.0).abs() < 1e-15);
    assert_eq!(m.csv_row(&c).split(',').count(), MetricsReport::CSV_HEADER.split(',').count());
}

#[test]
fn constant_bad_model_on_balanced_data() {
    let m = compute_metrics(&ConfusionCounts { tp: 10, fp: 10, tn: 0, fn_: 0 });
    assert_eq!((m.tpr, m.fpr, m.precision), (Some(1.0), Some(1.0), Some(0.5)));
    assert!((m.f1.unwrap() - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn undefined_metrics_serialize_as_marker() {
    let m = compute_metrics(&ConfusionCounts { tp: 0, fp: 0, tn: 4, fn_: 0 });
    assert_eq!((m.tpr, m.precision, m.f1), (None, None, None));
    let v = serde_json::to_value(m).unwrap();
    assert_eq!(v["f1"], "undefined");
    assert_eq!(v["fpr"], 0.0);
    assert_eq!(f1_score(Some(0.0), Some(0.0)), Some(0.0));
    assert_eq!(f1_score(None, Some(1.0)), None);
}

#[test]
fn tpr_and_fnr_are_complementary() {
    for tp in 0..6 {
        for fn_ in 0..6 {
            let m = compute_metrics(&ConfusionCounts { tp, fp: 1, tn: 1, fn_ });
            match (m.tpr, m.fnr) {
                (Some(t), Some(f)) => assert!((t + f - 1.0).abs() < 1e-15),
                (None, None) => assert_eq!(tp + fn_, 0),
                other => panic!("{other:?}"),
            }
        }
    }
}

#[test]
fn evaluate_with_constant_model() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_corpus(dir.path(), &synth_generate(Cwe::DivideZero, 5, 1)).unwrap();
    let mut model = GcGatModel::new(GcGatConfig::default(), FunctionVocabulary::new(["printIntLine"]).unwrap()).unwrap();
    model.params = Params::zeros(&model.config);
    let (counts, report) = evaluate(&model, &m).unwrap();
    assert_eq!(counts, ConfusionCounts { tp: 5, fp: 5, tn: 0, fn_: 0 });
    assert_eq!(report.precision, Some(0.5));
}

#[test]
fn label_text_forms() {
    assert_eq!("bad".parse::<Label>().unwrap(), Label::Bad);
    assert_eq!("good".parse::<Label>().unwrap(), Label::Good);
    assert!("ugly".parse::<Label>().is_err());
    assert_eq!(Label::Bad.index(), 1);
    assert_eq!(serde_json::to_string(&Label::Good).unwrap(), "\"good\"");
}
