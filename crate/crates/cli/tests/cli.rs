mod common;

use std::fs;
use std::path::Path;

use common::*;
use tabaudit_cli::commands::{self, CorpusSource};
use tabaudit_cli::{AuditReport, Settings};
use tabaudit_contam::testbed::{CorpusParams, PlantKind, PlantLedger};
use tabaudit_contam::{Category, Location, MatchEvidence, Strategy};
use tabaudit_core::serialize::PromptStyle;
use tabaudit_core::TaskType;

fn settings(out: &Path) -> Settings {
    Settings { out_dir: Some(out.to_path_buf()), ..Default::default() }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn perfect_predictor_has_half_lift_and_unit_kappa() {
    let dir = tempfile::tempdir().unwrap();
    let truth = ["a", "b", "a", "b", "a", "b"];
    let pred: Vec<Option<&str>> = truth.iter().map(|t| Some(*t)).collect();
    let m = class_manifest(dir.path(), "d", TaskType::Binary, &["a", "b"]);
    let p = predictions(dir.path(), "d", "tabula", &truth, &pred);
    let out = commands::cmd_audit(&settings(&dir.path().join("out")), &[m], &[p]).unwrap();
    let metrics = &out.report.metrics[0];
    assert_eq!(metrics.lift, 0.5);
    assert_eq!(metrics.kappa, 1.0);
    assert!(out.plot_csv.exists());
    let csv = fs::read_to_string(&out.plot_csv).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "id,task_type,accuracy,majority,lift,kappa");
    assert_eq!(csv.lines().nth(1).unwrap(), "d,binary,1,0.5,0.5,1");
}

#[test]
fn stroke_fixture_row_in_markdown() {
    let dir = tempfile::tempdir().unwrap();
    let (m, p) = stroke_fixture(dir.path());
    let out_dir = dir.path().join("out");
    let o = run(&["audit", "--manifests", s(&m), "--predictions", s(&p), "--out-dir", s(&out_dir)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let md = fs::read_to_string(out_dir.join("report.md")).unwrap();
    assert!(md.contains("| brain-stroke | 0.959 | 0.959 | +0.000 | 0.000 |"), "{md}");
    assert!(md.contains("| Avg. All (N=1) | 0.959 | 0.959 | +0.000 | 0.000 |"));
    // full precision in JSON
    let r = AuditReport::load(&out_dir.join("report.json")).unwrap();
    assert_eq!(r.imbalance_riders[0].accuracy, 0.959);
    assert_eq!(r.config.rider_min_majority, 0.85);
}

fn three_task_types(dir: &Path) -> (Vec<std::path::PathBuf>, Vec<std::path::PathBuf>) {
    let mut manifests = Vec::new();
    let mut preds = Vec::new();
    let specs: [(&str, TaskType, &[&str]); 3] = [
        ("bin", TaskType::Binary, &["y", "n"]),
        ("cat", TaskType::Categorical, &["p", "q", "r"]),
        ("cat_b", TaskType::Categorical, &["w", "x", "z", "v"]),
    ];
    for (k, (prefix, tt, labels)) in specs.iter().enumerate() {
        for d in 0..4 {
            let id = format!("{prefix}{d}");
            manifests.push(class_manifest(dir, &id, *tt, labels));
            let truth: Vec<&str> = (0..20).map(|i| labels[(i * (d + 1)) % labels.len()]).collect();
            let correct = 8 + 3 * k + d;
            for model in ["tabula", "alpaca"] {
                let bump = usize::from(model == "alpaca");
                let pred: Vec<Option<&str>> = truth
                    .iter()
                    .enumerate()
                    .map(|(i, t)| if i < correct - bump { Some(*t) } else { Some(labels[(labels.iter().position(|l| l == t).unwrap() + 1) % labels.len()]) })
                    .collect();
                preds.push(predictions(dir, &id, model, &truth, &pred));
            }
        }
    }
    (manifests, preds)
}

#[test]
fn audit_with_models_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let (manifests, preds) = three_task_types(dir.path());
    let partition = dir.path().join("partition.json");
    fs::write(&partition, r#"{"bin0": "A", "bin1": "A", "cat0": "B", "cat1": "B"}"#).unwrap();
    let mut st = settings(&dir.path().join("out"));
    st.model = Some("tabula".into());
    st.reference_model = Some("tabula".into());
    st.gap_model_a = Some("tabula".into());
    st.gap_model_b = Some("alpaca".into());
    st.partition = Some(partition);
    let out = commands::cmd_audit(&st, &manifests, &preds).unwrap();
    let r = &out.report;
    assert_eq!(r.metrics.len(), 24);
    assert_eq!(r.aggregate.as_ref().unwrap().n, 12);
    assert_eq!(r.model_comparison.len(), 2);
    let tab = r.model_comparison.iter().find(|m| m.model_id == "tabula").unwrap();
    assert_eq!(tab.recovery, None);
    let alp = r.model_comparison.iter().find(|m| m.model_id == "alpaca").unwrap();
    assert!((alp.recovery.unwrap() - 100.0 * alp.accuracy / tab.accuracy).abs() < 1e-12);
    let gap = r.partition_gap.as_ref().unwrap();
    assert_eq!(gap.rows.last().unwrap().group, "All");
    assert!((gap.rows.last().unwrap().gap - 0.05).abs() < 1e-12);
    // two task types present: ANOVA and one t-test
    assert!(r.anova.is_some());
    assert_eq!(r.pairwise.len(), 1);
    let md = fs::read_to_string(&out.markdown).unwrap();
    assert!(md.contains("| Model | Acc. | Lift | Recovery | ≤ Baseline |"));
    assert!(md.contains("| NA |"));
    assert!(md.contains("| Categorical vs. Binary |"));
    assert!(md.contains("| All | 4 |"));

    // several models need --model
    let st = settings(&dir.path().join("out2"));
    let err = commands::cmd_audit(&st, &manifests, &preds).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn rendering_is_reproducible_except_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let (m, p) = stroke_fixture(dir.path());
    let a = commands::cmd_audit(&settings(&dir.path().join("a")), &[m.clone()], &[p.clone()]).unwrap();
    let b = commands::cmd_audit(&settings(&dir.path().join("b")), &[m], &[p]).unwrap();
    let mut ra = a.report.clone();
    ra.timestamp = b.report.timestamp.clone();
    assert_eq!(ra, b.report);
    let rendered = commands::cmd_report_render(&settings(&dir.path().join("c")), &a.json).unwrap();
    assert_eq!(fs::read_to_string(rendered).unwrap(), fs::read_to_string(&a.markdown).unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["audit", "--bogus"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
    let missing = dir.path().join("nope.json");
    assert_eq!(code(&run(&["audit", "--manifests", s(&missing), "--predictions", s(&missing)])), 2);

    // degenerate target
    let table = dir.path().join("flat.csv");
    fs::write(&table, "x,y\n1,5\n2,5\n3,5\n4,5\n").unwrap();
    let manifest = dir.path().join("flat.json");
    fs::write(&manifest, r#"{"id":"flat","task_type":"binary","target_column":"y","class_labels":["5","6"],"table_path":"flat.csv"}"#)
        .unwrap();
    let o = run(&["gen-quartile", "--manifests", s(&manifest), "--out-dir", s(&dir.path().join("q"))]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));

    // partial coverage: one malformed file in the corpus
    let corpus = dir.path().join("corpus");
    fs::create_dir(&corpus).unwrap();
    fs::write(corpus.join("good.csv"), "a,b\n1,2\n").unwrap();
    fs::write(corpus.join("bad.csv"), "a,b\n1,2,3\n").unwrap();
    let o = run(&["scan", "--corpus", s(&corpus), "--manifests", s(&manifest), "--out-dir", s(&dir.path().join("scan"))]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("scan/verdicts.json").exists());
    let o = run(&[
        "scan",
        "--corpus",
        s(&corpus),
        "--manifests",
        s(&manifest),
        "--coverage-floor",
        "0.5",
        "--out-dir",
        s(&dir.path().join("scan2")),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn out_dir_from_environment_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let (m, p) = stroke_fixture(dir.path());
    let env_out = dir.path().join("env_out");
    let o = bin()
        .args(["audit", "--manifests", s(&m), "--predictions", s(&p)])
        .env(tabaudit_cli::OUT_DIR_ENV, &env_out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(env_out.join("report.json").exists());

    let cfg = dir.path().join("c.toml");
    let cfg_out = dir.path().join("cfg_out");
    fs::write(&cfg, format!("out_dir = {:?}\nrider_min_majority = 0.99\n", s(&cfg_out))).unwrap();
    let o = run(&["audit", "--config", s(&cfg), "--manifests", s(&m), "--predictions", s(&p)]);
    assert_eq!(code(&o), 0);
    let r = AuditReport::load(&cfg_out.join("report.json")).unwrap();
    assert_eq!(r.config.rider_min_majority, 0.99);
    assert!(r.imbalance_riders.is_empty());
    // flag beats config
    let o = run(&["audit", "--config", s(&cfg), "--rider-min-majority", "0.5", "--manifests", s(&m), "--predictions", s(&p)]);
    assert_eq!(code(&o), 0);
    let r = AuditReport::load(&cfg_out.join("report.json")).unwrap();
    assert_eq!(r.imbalance_riders.len(), 1);
}

#[test]
fn gen_quartile_boundaries_and_shortcuts() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.csv");
    let mut text = String::from("target,copy,other\n");
    for v in 1..=8 {
        text.push_str(&format!("{v},{v},{}\n", (v * 5) % 8 + 1));
    }
    fs::write(&table, text).unwrap();
    let manifest = dir.path().join("t.json");
    fs::write(&manifest, r#"{"id":"t","task_type":"binary","target_column":"target","class_labels":["1","2"],"table_path":"t.csv"}"#)
        .unwrap();
    let out = commands::cmd_gen_quartile(&settings(&dir.path().join("out")), &[manifest], None).unwrap();
    let m = tabaudit_core::data::Manifest::read(&out[0].manifest).unwrap();
    assert_eq!(m.task_type, TaskType::Quartile);
    assert_eq!(m.quartile_boundaries, Some(vec![2.75, 4.5, 6.25]));
    let copy = out[0].shortcuts.features.iter().find(|f| f.feature == "copy").unwrap();
    assert_eq!(copy.single_feature_bin_accuracy, 1.0);
    assert!(copy.flagged);
    // the generated manifest is self-contained and loads
    tabaudit_core::data::load_dataset(&out[0].manifest).unwrap();
}

#[test]
fn serialize_shots_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = golden_dir().join("lfp.json");
    let mut st = settings(&dir.path().join("a"));
    st.style = PromptStyle::Alpaca;
    st.shots = 4;
    let a = commands::cmd_serialize(&st, &[manifest.clone()]).unwrap();
    let text = fs::read_to_string(&a[0]).unwrap();
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let p = v["prompt"].as_str().unwrap();
        for k in 1..=4 {
            assert_eq!(p.matches(&format!("Example {k}:\n")).count(), 1);
        }
        assert!(!p.contains("Example 5:"));
    }
    st.out_dir = Some(dir.path().join("b"));
    let b = commands::cmd_serialize(&st, &[manifest.clone()]).unwrap();
    assert_eq!(fs::read(&a[0]).unwrap(), fs::read(&b[0]).unwrap());

    st.shots = 0;
    st.out_dir = Some(dir.path().join("c"));
    let c = commands::cmd_serialize(&st, &[manifest]).unwrap();
    assert!(!fs::read_to_string(&c[0]).unwrap().contains("Example"));
}

#[test]
fn serialize_matches_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    for (manifest, style, shots) in [("bitcoin.json", "tabula", "4"), ("lfp.json", "alpaca", "4"), ("bitcoin.json", "alpaca", "0")] {
        let out = dir.path().join(format!("{style}{shots}"));
        let o = run(&[
            "serialize",
            "--manifests",
            s(&golden_dir().join(manifest)),
            "--style",
            style,
            "--shots",
            shots,
            "--seed",
            "7",
            "--out-dir",
            s(&out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let produced = fs::read_dir(out.join("prompts")).unwrap().next().unwrap().unwrap().path();
        let name = format!("{}.s{shots}.seed7.jsonl", produced.file_stem().unwrap().to_str().unwrap());
        let golden = fs::read(golden_dir().join(&name)).unwrap_or_else(|_| panic!("missing golden {name}"));
        assert_eq!(fs::read(&produced).unwrap(), golden, "{name}");
    }
}

#[test]
fn testbed_gen_scan_eval_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let o = run(&[
        "testbed", "gen", "--tables", "20", "--rows", "200", "--columns", "5", "--tables-per-chunk", "5", "--seed", "3",
        "--out-dir", s(out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let index = out.join("corpus.idx");
    let o = run(&["index", "--corpus", s(&out.join("corpus")), "--output", s(&index), "--out-dir", s(out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    // audit report first, then merge the scan into it
    let (m, p) = stroke_fixture(out);
    let audit_out = out.join("audit");
    assert_eq!(code(&run(&["audit", "--manifests", s(&m), "--predictions", s(&p), "--out-dir", s(&audit_out)])), 0);

    let scan_out = out.join("scan");
    let o = run(&[
        "scan",
        "--index",
        s(&index),
        "--manifests",
        s(&out.join("fixtures")),
        "--selectivity",
        "0.01",
        "--report",
        s(&audit_out.join("report.json")),
        "--out-dir",
        s(&scan_out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("lf_complete\tcomplete_overlap"), "{stdout}");
    assert!(stdout.contains("lf_direct\tdirect_with_labels"));
    assert!(stdout.contains("weekday\ttask_leakage"));
    assert!(stdout.contains("lf_clean\tnone"));
    let r = AuditReport::load(&audit_out.join("report.json")).unwrap();
    let c = r.contamination.unwrap();
    assert_eq!(c.verdicts.len(), 4);
    assert_eq!(c.coverage.coverage, 1.0);
    assert!(fs::read_to_string(audit_out.join("report.md")).unwrap().contains("| weekday | task_leakage |"));

    let o = run(&[
        "testbed",
        "eval",
        "--ledger",
        s(&out.join("corpus/ledger.json")),
        "--evidence",
        s(&scan_out.join("evidence")),
        "--out-dir",
        s(&out.join("eval")),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let prf: std::collections::BTreeMap<PlantKind, tabaudit_contam::testbed::Prf> =
        serde_json::from_str(&fs::read_to_string(out.join("eval/testbed_eval.json")).unwrap()).unwrap();
    for kind in [PlantKind::Complete, PlantKind::DirectDup, PlantKind::Association] {
        assert_eq!(prf[&kind].recall, 1.0, "{kind:?}");
    }
    assert_eq!(prf[&PlantKind::Complete].precision, Some(1.0));
}

#[test]
fn eval_on_perfect_evidence_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let st = settings(dir.path());
    let params = CorpusParams { tables: 10, rows_per_table: 100, columns: 4, tables_per_chunk: 5 };
    let tb = commands::cmd_testbed_gen(&st, &params, true).unwrap();
    let ledger = PlantLedger::load(&tb.ledger).unwrap();
    let evidence: Vec<MatchEvidence> = ledger
        .plants
        .iter()
        .map(|p| MatchEvidence {
            corpus_id: ledger.corpus_id.clone(),
            dataset_id: p.dataset_id.clone(),
            strategy: if p.kind == PlantKind::Association { Strategy::Association } else { Strategy::RowMatch },
            test_row_id: p.source_row,
            matched: p.locations.clone(),
            overlap: 1.0,
            label_exposed: true,
            exposed_value: None,
            probe: None,
            near_miss: None,
        })
        .collect();
    let ev = dir.path().join("perfect.jsonl");
    commands::write_evidence(&ev, &evidence).unwrap();
    let prf = commands::cmd_testbed_eval(&st, &tb.ledger, &[ev]).unwrap();
    for p in prf.values() {
        assert_eq!((p.precision, p.recall), (Some(1.0), 1.0));
    }
    let _: &Location = &ledger.plants[0].locations[0];
}

#[test]
fn scan_clean_corpus_is_all_none() {
    let dir = tempfile::tempdir().unwrap();
    let st = settings(dir.path());
    let params = CorpusParams { tables: 10, rows_per_table: 100, columns: 4, tables_per_chunk: 5 };
    let tb = commands::cmd_testbed_gen(&st, &params, false).unwrap();
    assert_eq!(tb.plants.values().sum::<usize>(), 0);
    let fixtures = dir.path().join("fx");
    fs::create_dir(&fixtures).unwrap();
    fs::copy(golden_dir().join("lfp.csv"), fixtures.join("lfp.csv")).unwrap();
    fs::copy(golden_dir().join("lfp.json"), fixtures.join("lfp.json")).unwrap();
    let scan = commands::cmd_scan(&st, CorpusSource::Corpus(&tb.corpus), &[fixtures], None).unwrap();
    assert!(scan.verdicts.iter().all(|v| v.category == Category::None));
}

#[test]
fn hand_transcribed_prompts_match() {
    assert_eq!(hand_transcription_mismatches(), Vec::<String>::new());
    assert_eq!(extraction_round_trip_failures(), Vec::<String>::new());
}
