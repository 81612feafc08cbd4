#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tabaudit_core::data::{write_predictions, Manifest};
use tabaudit_core::{Predicted, PredictionRecord, PredictionSet, TaskLabels, TaskSpec, TaskType};

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden")
}

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tabaudit"));
    c.env_remove(tabaudit_cli::OUT_DIR_ENV);
    c
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// Writes a class-label manifest (no table needed for `audit`).
pub fn class_manifest(dir: &Path, id: &str, task_type: TaskType, labels: &[&str]) -> PathBuf {
    let task = TaskSpec::new(id, task_type, "y", TaskLabels::Classes(labels.iter().map(|s| s.to_string()).collect()))
        .unwrap();
    let path = dir.join(format!("{id}.json"));
    Manifest::from_task(&task, format!("{id}.csv")).write(&path).unwrap();
    path
}

/// Writes one prediction file; `None` is an unparseable completion.
pub fn predictions(dir: &Path, id: &str, model: &str, truth: &[&str], pred: &[Option<&str>]) -> PathBuf {
    let records = truth
        .iter()
        .zip(pred)
        .enumerate()
        .map(|(i, (t, p))| PredictionRecord {
            row_id: i as u64,
            true_label: t.to_string(),
            predicted: match p {
                Some(l) => Predicted::Label(l.to_string()),
                None => Predicted::Invalid("I cannot tell".into()),
            },
        })
        .collect();
    let set = PredictionSet::new(id, model, records).unwrap();
    let path = dir.join(format!("{id}.{model}.jsonl"));
    write_predictions(&path, &set).unwrap();
    path
}

/// 959 of 1000 rows in the majority class, predicted as majority throughout.
pub fn stroke_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let truth: Vec<&str> = (0..1000).map(|i| if i < 959 { "0" } else { "1" }).collect();
    let pred: Vec<Option<&str>> = vec![Some("0"); 1000];
    let m = class_manifest(dir, "brain-stroke", TaskType::Binary, &["1", "0"]);
    let p = predictions(dir, "brain-stroke", "tabula", &truth, &pred);
    (m, p)
}

/// Compares `serialize_row` output with the hand-transcribed prompt files.
/// Returns one message per mismatch.
pub fn hand_transcription_mismatches() -> Vec<String> {
    use tabaudit_core::data::load_dataset;
    use tabaudit_core::serialize::{serialize_row, PromptStyle, Shot};
    let cases: [(&str, &str, PromptStyle, usize, &[usize]); 5] = [
        ("bitcoin_row1_0shot.tabula.txt", "bitcoin.json", PromptStyle::Tabula, 1, &[]),
        ("bitcoin_row1_1shot.tabula.txt", "bitcoin.json", PromptStyle::Tabula, 1, &[0]),
        ("bitcoin_row1_1shot.alpaca.txt", "bitcoin.json", PromptStyle::Alpaca, 1, &[0]),
        ("lfp_row2_0shot.tabula.txt", "lfp.json", PromptStyle::Tabula, 2, &[]),
        ("lfp_row2_1shot.alpaca.txt", "lfp.json", PromptStyle::Alpaca, 2, &[0]),
    ];
    let mut bad = Vec::new();
    for (file, manifest, style, query, shot_rows) in cases {
        let (ds, task) = load_dataset(&golden_dir().join(manifest)).unwrap();
        let target = ds.column_index(&task.target_column).unwrap();
        let labels: Vec<String> = shot_rows.iter().map(|&r| task.gold_label(&ds.rows()[r][target]).unwrap()).collect();
        let shots: Vec<Shot> =
            shot_rows.iter().zip(&labels).map(|(&r, l)| Shot { row: &ds.rows()[r], label: l }).collect();
        let got = serialize_row(style, &task, ds.columns(), &ds.rows()[query], &shots).unwrap();
        let want = std::fs::read_to_string(golden_dir().join(file)).unwrap();
        if got != want {
            bad.push(format!("{file}: got {got:?}"));
        }
    }
    bad
}

/// Every label of every golden task survives extraction, bare and as a
/// completion followed by a stop token.
pub fn extraction_round_trip_failures() -> Vec<String> {
    use tabaudit_core::serialize::{extract_prediction, ExtractOptions, END_COMPLETION};
    let mut bad = Vec::new();
    for manifest in ["bitcoin.json", "lfp.json"] {
        let (_, task) = tabaudit_core::data::load_dataset(&golden_dir().join(manifest)).unwrap();
        let labels = task.label_set();
        for l in &labels {
            for completion in [l.clone(), format!(" {l}\n{END_COMPLETION}trailing")] {
                let got = extract_prediction(&completion, &labels, &ExtractOptions::default());
                if got.as_ref() != Some(l) {
                    bad.push(format!("{manifest}: {completion:?} -> {got:?}"));
                }
            }
        }
    }
    bad
}
