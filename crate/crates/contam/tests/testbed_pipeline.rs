use std::path::Path;

use chrono::NaiveDate;
use tabaudit_contam::scan::{scan_dataset, ScanOptions};
use tabaudit_contam::testbed::{
    generate_corpus, labor_force_fixture, plant_association, plant_complete_overlap, plant_direct_duplicates,
    scanner_prf, weekday_fixture, weekday_pairs, CorpusParams, PlantKind,
};
use tabaudit_contam::{build_index, identifier_search, Category, IndexConfig, RowMatchParams};

fn corpus(dir: &Path, seed: u64) {
    let params = CorpusParams { tables: 20, rows_per_table: 200, columns: 5, tables_per_chunk: 5 };
    generate_corpus(dir, &params, seed).unwrap();
}

// 4k background rows: a 1% gate keeps values seen in up to 40 rows distinctive.
fn options() -> ScanOptions {
    ScanOptions { row_match: RowMatchParams { selectivity: 0.01, ..Default::default() }, ..Default::default() }
}

#[test]
fn clean_corpus_is_silent() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 1);
    let index = build_index(dir.path(), &IndexConfig::default()).unwrap();
    let (lf, lf_task) = labor_force_fixture("lf", 100, 2);
    let (wk, wk_task) = weekday_fixture("wk", NaiveDate::from_ymd_opt(2021, 1, 1).unwrap(), 60);
    let opts = ScanOptions { identifier_columns: vec!["id".into()], ..options() };
    let scan = scan_dataset(&index, &lf, &lf_task, &opts).unwrap();
    assert!(scan.evidence.is_empty());
    assert_eq!(scan.verdict.category, Category::None);
    let scan = scan_dataset(&index, &wk, &wk_task, &options()).unwrap();
    assert!(scan.evidence.is_empty());
    assert_eq!(scan.verdict.category, Category::None);
}

#[test]
fn complete_overlap_is_recovered_under_renaming() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 3);
    let (lf, task) = labor_force_fixture("lf", 200, 4);
    let ledger = plant_complete_overlap(dir.path(), &lf, 1.0, true, 5).unwrap();
    let index = build_index(dir.path(), &IndexConfig::default()).unwrap();
    let scan = scan_dataset(&index, &lf, &task, &options()).unwrap();
    assert!(scan.evidence.iter().filter(|e| e.strategy == tabaudit_contam::Strategy::RowMatch).all(|e| e.overlap == 1.0));
    let prf = scanner_prf(&ledger, &scan.evidence).unwrap();
    assert_eq!(prf[&PlantKind::Complete].recall, 1.0);
    assert_eq!(prf[&PlantKind::Complete].precision, Some(1.0));
    assert_eq!(scan.verdict.category, Category::CompleteOverlap);
    assert_eq!(scan.summary.label_exposed_rows, 200);
}

#[test]
fn duplicates_with_labels_are_direct() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 6);
    let (lf, task) = labor_force_fixture("lf", 100, 7);
    let rows: Vec<usize> = (0..100).step_by(10).collect();
    let ledger = plant_direct_duplicates(dir.path(), &lf, &rows, 4, 8).unwrap();
    let index = build_index(dir.path(), &IndexConfig::default()).unwrap();
    let scan = scan_dataset(&index, &lf, &task, &options()).unwrap();
    let prf = scanner_prf(&ledger, &scan.evidence).unwrap();
    assert_eq!(prf[&PlantKind::DirectDup].recall, 1.0);
    assert_eq!(prf[&PlantKind::DirectDup].planted, 40);
    assert_eq!(scan.summary.rows_matched, 10);
    assert_eq!(scan.verdict.category, Category::DirectWithLabels);
}

#[test]
fn associations_are_task_leakage() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 9);
    let (wk, task) = weekday_fixture("wk", NaiveDate::from_ymd_opt(2021, 11, 1).unwrap(), 60);
    let pairs = weekday_pairs(&wk);
    let ledger = plant_association(dir.path(), "wk", &pairs[29..30], 12, 2, 10).unwrap();
    assert_eq!(pairs[29], ("2021-11-30".to_string(), "Tuesday".to_string()));
    let index = build_index(dir.path(), &IndexConfig::default()).unwrap();

    let direct = tabaudit_contam::association_search(
        &index,
        &tabaudit_core::Cell::parse("2021-11-30"),
        &tabaudit_core::Cell::parse("tuesday"),
        5,
    )
    .unwrap();
    assert_eq!((direct.count, direct.distinct_tables), (24, 12));

    let scan = scan_dataset(&index, &wk, &task, &options()).unwrap();
    assert_eq!(scan.summary.row_match_fraction, 0.0);
    assert_eq!((scan.summary.association_count, scan.summary.distinct_association_tables), (24, 12));
    assert_eq!(scan.verdict.category, Category::TaskLeakage);
    let prf = scanner_prf(&ledger, &scan.evidence).unwrap();
    assert_eq!(prf[&PlantKind::Association].recall, 1.0);
    assert_eq!(prf[&PlantKind::Association].precision, Some(1.0));
}

#[test]
fn planted_identifier_is_found_in_its_table_only() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 11);
    let (lf, _) = labor_force_fixture("pokedex", 5, 12);
    let ledger = plant_complete_overlap(dir.path(), &lf, 1.0, true, 13).unwrap();
    let index = build_index(dir.path(), &IndexConfig::default()).unwrap();
    let hits = identifier_search(&index, &["POKEDEX-00003", "Missingno"]).unwrap();
    let planted = &ledger.plants[3].locations;
    assert_eq!(&hits["POKEDEX-00003"], planted);
    assert!(hits["Missingno"].is_empty());
}

#[test]
fn sharded_index_answers_like_memory_index() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path(), 14);
    let (lf, task) = labor_force_fixture("lf", 50, 15);
    plant_direct_duplicates(dir.path(), &lf, &[1, 2, 3], 4, 16).unwrap();
    let mem = build_index(dir.path(), &IndexConfig::default()).unwrap();
    let spill = tempfile::tempdir().unwrap();
    let cfg = IndexConfig {
        memory_cap: Some(200_000),
        shards: 16,
        spill_dir: Some(spill.path().to_path_buf()),
        ..Default::default()
    };
    let disk = build_index(dir.path(), &cfg).unwrap();
    assert!(disk.is_sharded());
    assert!(disk.stats().peak_estimated_bytes <= 200_000, "{:?}", disk.stats());
    let a = scan_dataset(&mem, &lf, &task, &options()).unwrap();
    let b = scan_dataset(&disk, &lf, &task, &options()).unwrap();
    assert_eq!(a, b);

    let saved = spill.path().join("saved.idx");
    disk.save(&saved).unwrap();
    let reopened = tabaudit_contam::CorpusIndex::open(&saved).unwrap();
    assert_eq!(scan_dataset(&reopened, &lf, &task, &options()).unwrap(), a);
}
