//! Synthetic corpora with planted contamination, and the oracle that scores
//! a scanner against what was planted.
//!
//! Background cells are `bg` followed by random hex, so nothing outside a
//! plant can collide with an evaluation fixture. Every generator is
//! deterministic in its seed; per-table randomness comes from a ChaCha
//! stream keyed by the table number, so tables can be written in parallel.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tabaudit_core::{Cell, Dataset, TaskLabels, TaskSpec, TaskType};

use crate::error::{Error, Result};
use crate::index::CORPUS_ID_FILE;
use crate::search::{Location, MatchEvidence, Strategy};

/// File name of the ledger inside a generated corpus.
pub const LEDGER_FILE: &str = "ledger.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusParams {
    pub tables: usize,
    pub rows_per_table: usize,
    pub columns: usize,
    pub tables_per_chunk: usize,
}

impl Default for CorpusParams {
    fn default() -> Self {
        CorpusParams { tables: 100, rows_per_table: 1000, columns: 6, tables_per_chunk: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub corpus_id: String,
    pub tables: usize,
    pub rows: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantKind {
    Complete,
    DirectDup,
    Association,
}

impl PlantKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlantKind::Complete => "complete",
            PlantKind::DirectDup => "direct_dup",
            PlantKind::Association => "association",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plant {
    pub kind: PlantKind,
    pub dataset_id: String,
    /// Test row the plant copies; absent for association plants.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_row: Option<u64>,
    pub locations: Vec<Location>,
    pub transformations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantLedger {
    pub corpus_id: String,
    pub seed: u64,
    pub plants: Vec<Plant>,
}

impl PlantLedger {
    pub fn merge(&mut self, other: PlantLedger) -> Result<()> {
        if other.corpus_id != self.corpus_id {
            return Err(Error::CorpusMismatch { expected: self.corpus_id.clone(), found: other.corpus_id });
        }
        self.plants.extend(other.plants);
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|source| Error::Json { path: path.into(), source })?;
        fs::write(path, json + "\n").map_err(Error::io(path))
    }

    pub fn load(path: &Path) -> Result<PlantLedger> {
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        serde_json::from_str(&text).map_err(|source| Error::Json { path: path.into(), source })
    }

    pub fn locations(&self, kind: PlantKind) -> usize {
        self.plants.iter().filter(|p| p.kind == kind).map(|p| p.locations.len()).sum()
    }
}

fn table_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn token(rng: &mut impl Rng) -> String {
    format!("bg{:012x}", rng.gen::<u64>() & 0xffff_ffff_ffff)
}

fn write_table(path: &Path, columns: &[String], rows: &[Vec<String>]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(Error::io(parent))?;
    }
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(columns).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(Error::io(path))
}

pub fn corpus_id_for(params: &CorpusParams, seed: u64) -> String {
    format!("testbed-s{seed}-{}x{}", params.tables, params.rows_per_table)
}

/// Writes `chunkNNN/tNNNNN.csv` background tables and a corpus id file.
pub fn generate_corpus(dir: &Path, params: &CorpusParams, seed: u64) -> Result<CorpusSummary> {
    if params.columns == 0 || params.tables_per_chunk == 0 {
        return Err(Error::InvalidArgument("columns and tables_per_chunk must be positive".into()));
    }
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    (0..params.tables).into_par_iter().try_for_each(|t| {
        let mut rng = table_rng(seed, t as u64);
        let columns: Vec<String> = (0..params.columns).map(|j| format!("c{j}_{:04x}", rng.gen::<u16>())).collect();
        let rows: Vec<Vec<String>> =
            (0..params.rows_per_table).map(|_| (0..params.columns).map(|_| token(&mut rng)).collect()).collect();
        let path = dir.join(format!("chunk{:03}", t / params.tables_per_chunk)).join(format!("t{t:05}.csv"));
        write_table(&path, &columns, &rows)
    })?;
    let corpus_id = corpus_id_for(params, seed);
    let id_path = dir.join(CORPUS_ID_FILE);
    fs::write(&id_path, format!("{corpus_id}\n")).map_err(Error::io(&id_path))?;
    Ok(CorpusSummary { corpus_id, tables: params.tables, rows: (params.tables * params.rows_per_table) as u64 })
}

fn read_corpus_id(dir: &Path) -> Result<String> {
    let p = dir.join(CORPUS_ID_FILE);
    Ok(fs::read_to_string(&p).map_err(Error::io(&p))?.trim().to_string())
}

/// Chunk directories of a corpus, sorted. Falls back to `chunk000`.
fn chunks(dir: &Path) -> Result<Vec<String>> {
    let mut out: Vec<String> = fs::read_dir(dir)
        .map_err(Error::io(dir))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("chunk"))
        .collect();
    out.sort();
    if out.is_empty() {
        out.push("chunk000".into());
    }
    Ok(out)
}

/// Picks an unused `chunk/name.csv` table id.
fn fresh_table(dir: &Path, chunk: &str, stem: &str) -> String {
    let mut k = 0;
    loop {
        let id = format!("{chunk}/{stem}_{k:03}.csv");
        if !dir.join(&id).exists() {
            return id;
        }
        k += 1;
    }
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

const ABBREVIATIONS: &[(&str, &str)] = &[
    ("kids618", "k618"),
    ("kidslt6", "klt6"),
    ("nwifeinc", "inc"),
    ("educ", "ed"),
    ("wage", "w"),
    ("age", "a"),
    ("lfp", "inlf"),
    ("hours", "hrs"),
    ("id", "rid"),
    ("date", "dt"),
    ("weekday", "dow"),
];

/// A renamed column: an abbreviation, or a prefix or suffix mutation.
fn rename(name: &str, rng: &mut impl Rng) -> (String, &'static str) {
    let abbrev = ABBREVIATIONS.iter().find(|(from, _)| *from == name).map(|(_, to)| to.to_string()).unwrap_or_else(|| {
        let digits: String = name.chars().filter(|c| c.is_ascii_digit()).collect();
        let first: String = name.chars().take(1).collect();
        format!("{first}{digits}_")
    });
    match rng.gen_range(0..3) {
        0 => (abbrev, "abbreviate"),
        1 => (format!("x_{name}"), "prefix"),
        _ => (format!("{name}_v2"), "suffix"),
    }
}

/// Column layout for one planted table: renamed source columns plus two
/// background columns, optionally permuted. `order[i]` is the source column
/// at output position i, or `None` for background.
struct Layout {
    columns: Vec<String>,
    order: Vec<Option<usize>>,
    transformations: Vec<String>,
}

fn layout(source: &[String], rename_fraction: f64, permute: bool, rng: &mut impl Rng) -> Layout {
    let n_rename = ((rename_fraction.clamp(0.0, 1.0) * source.len() as f64).round() as usize).min(source.len());
    let mut idx: Vec<usize> = (0..source.len()).collect();
    idx.shuffle(rng);
    let renamed: BTreeSet<usize> = idx[..n_rename].iter().copied().collect();
    let mut transformations = BTreeSet::new();
    let mut used = BTreeSet::new();
    let mut names: Vec<String> = Vec::with_capacity(source.len() + 2);
    for (i, name) in source.iter().enumerate() {
        let mut new = if renamed.contains(&i) {
            let (n, how) = rename(name, rng);
            transformations.insert(format!("rename:{how}"));
            n
        } else {
            name.clone()
        };
        while !used.insert(new.clone()) {
            new.push('_');
        }
        names.push(new);
    }
    let mut order: Vec<Option<usize>> = (0..source.len()).map(Some).collect();
    for _ in 0..2 {
        let mut bg = format!("bgcol_{:04x}", rng.gen::<u16>());
        while !used.insert(bg.clone()) {
            bg.push('_');
        }
        names.push(bg);
        order.push(None);
    }
    let mut positions: Vec<usize> = (0..order.len()).collect();
    if permute {
        positions.shuffle(rng);
        transformations.insert("permute_columns".into());
        transformations.insert("permute_rows".into());
    } else {
        transformations.insert("append_background_columns".into());
    }
    Layout {
        columns: positions.iter().map(|&p| names[p].clone()).collect(),
        order: positions.iter().map(|&p| order[p]).collect(),
        transformations: transformations.into_iter().collect(),
    }
}

fn render_row(row: &[Cell], layout: &Layout, rng: &mut impl Rng) -> Vec<String> {
    layout
        .order
        .iter()
        .map(|o| match o {
            Some(i) => row[*i].raw().unwrap_or("").to_string(),
            None => token(rng),
        })
        .collect()
}

/// Writes one table holding `rows` of `dataset` plus background filler rows,
/// and returns each source row's location.
fn plant_table(
    dir: &Path,
    table_id: &str,
    dataset: &Dataset,
    rows: &[usize],
    layout: &Layout,
    permute: bool,
    rng: &mut impl Rng,
) -> Result<BTreeMap<usize, Location>> {
    let filler = 5;
    let mut slots: Vec<Option<usize>> = rows.iter().copied().map(Some).chain((0..filler).map(|_| None)).collect();
    if permute {
        slots.shuffle(rng);
    }
    let mut out_rows = Vec::with_capacity(slots.len());
    let mut locations = BTreeMap::new();
    for (r, slot) in slots.iter().enumerate() {
        match slot {
            Some(src) => {
                out_rows.push(render_row(&dataset.rows()[*src], layout, rng));
                locations.insert(*src, Location { table: table_id.to_string(), row: r as u32 });
            }
            None => out_rows.push((0..layout.columns.len()).map(|_| token(rng)).collect()),
        }
    }
    write_table(&dir.join(table_id), &layout.columns, &out_rows)?;
    Ok(locations)
}

/// Inserts every row of `dataset`, target included, into one new corpus table
/// with a fraction of its columns renamed and, optionally, columns and rows
/// shuffled.
pub fn plant_complete_overlap(
    corpus: &Path,
    dataset: &Dataset,
    rename_fraction: f64,
    permute: bool,
    seed: u64,
) -> Result<PlantLedger> {
    let corpus_id = read_corpus_id(corpus)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chunks = chunks(corpus)?;
    let chunk = chunks.choose(&mut rng).expect("at least one chunk");
    let table_id = fresh_table(corpus, chunk, &format!("complete_{}", sanitize(dataset.id())));
    let layout = layout(dataset.columns(), rename_fraction, permute, &mut rng);
    let rows: Vec<usize> = (0..dataset.row_count()).collect();
    let locations = plant_table(corpus, &table_id, dataset, &rows, &layout, permute, &mut rng)?;
    let plants = locations
        .into_iter()
        .map(|(src, loc)| Plant {
            kind: PlantKind::Complete,
            dataset_id: dataset.id().to_string(),
            source_row: Some(src as u64),
            locations: vec![loc],
            transformations: layout.transformations.clone(),
        })
        .collect();
    Ok(PlantLedger { corpus_id, seed, plants })
}

/// Inserts each selected row, target included, into `copies` distinct new
/// tables, each with its own column renaming and ordering.
pub fn plant_direct_duplicates(
    corpus: &Path,
    dataset: &Dataset,
    rows: &[usize],
    copies: usize,
    seed: u64,
) -> Result<PlantLedger> {
    if copies == 0 {
        return Err(Error::InvalidArgument("copies must be at least 1".into()));
    }
    if let Some(&bad) = rows.iter().find(|&&r| r >= dataset.row_count()) {
        return Err(Error::InvalidArgument(format!("row {bad} out of range")));
    }
    let corpus_id = read_corpus_id(corpus)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chunks = chunks(corpus)?;
    let mut by_row: BTreeMap<usize, Vec<Location>> = rows.iter().map(|&r| (r, Vec::new())).collect();
    let mut transformations = BTreeSet::new();
    for _ in 0..copies {
        let chunk = chunks.choose(&mut rng).expect("at least one chunk");
        let table_id = fresh_table(corpus, chunk, &format!("dup_{}", sanitize(dataset.id())));
        let layout = layout(dataset.columns(), 1.0, true, &mut rng);
        transformations.extend(layout.transformations.iter().cloned());
        let rows: Vec<usize> = by_row.keys().copied().collect();
        for (src, loc) in plant_table(corpus, &table_id, dataset, &rows, &layout, true, &mut rng)? {
            by_row.get_mut(&src).expect("planted row").push(loc);
        }
    }
    let transformations: Vec<String> = transformations.into_iter().collect();
    let plants = by_row
        .into_iter()
        .map(|(src, locations)| Plant {
            kind: PlantKind::DirectDup,
            dataset_id: dataset.id().to_string(),
            source_row: Some(src as u64),
            locations,
            transformations: transformations.clone(),
        })
        .collect();
    Ok(PlantLedger { corpus_id, seed, plants })
}

/// For each `(key, target)` pair, writes `rows_per_table` rows holding both
/// values into each of `tables` new tables. The other cells are background,
/// so no evaluation row is ever reproduced. Text targets get random casing.
pub fn plant_association(
    corpus: &Path,
    dataset_id: &str,
    pairs: &[(String, String)],
    tables: usize,
    rows_per_table: usize,
    seed: u64,
) -> Result<PlantLedger> {
    if tables == 0 {
        return Err(Error::InvalidArgument("tables must be at least 1".into()));
    }
    let corpus_id = read_corpus_id(corpus)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chunks = chunks(corpus)?;
    let mut locations: Vec<Vec<Location>> = vec![Vec::new(); pairs.len()];
    if rows_per_table > 0 && !pairs.is_empty() {
        for _ in 0..tables {
            let chunk = chunks.choose(&mut rng).expect("at least one chunk");
            let table_id = fresh_table(corpus, chunk, &format!("assoc_{}", sanitize(dataset_id)));
            let width = 5;
            let columns: Vec<String> = (0..width).map(|j| format!("f{j}_{:04x}", rng.gen::<u16>())).collect();
            let mut slots: Vec<Option<usize>> =
                (0..pairs.len()).flat_map(|p| std::iter::repeat(Some(p)).take(rows_per_table)).collect();
            slots.extend((0..3).map(|_| None));
            slots.shuffle(&mut rng);
            let mut rows = Vec::with_capacity(slots.len());
            for (r, slot) in slots.iter().enumerate() {
                let mut row: Vec<String> = (0..width).map(|_| token(&mut rng)).collect();
                if let Some(p) = slot {
                    let (key, target) = &pairs[*p];
                    let mut pos: Vec<usize> = (0..width).collect();
                    pos.shuffle(&mut rng);
                    row[pos[0]] = key.clone();
                    row[pos[1]] = vary_case(target, &mut rng);
                    locations[*p].push(Location { table: table_id.clone(), row: r as u32 });
                }
                rows.push(row);
            }
            write_table(&corpus.join(&table_id), &columns, &rows)?;
        }
    }
    let plants = pairs
        .iter()
        .zip(locations)
        .map(|((k, t), locations)| Plant {
            kind: PlantKind::Association,
            dataset_id: dataset_id.to_string(),
            source_row: None,
            locations,
            transformations: vec![format!("pair:{k}->{t}"), "case".into()],
        })
        .collect();
    Ok(PlantLedger { corpus_id, seed, plants })
}

fn vary_case(s: &str, rng: &mut impl Rng) -> String {
    match rng.gen_range(0..3) {
        0 => s.to_uppercase(),
        1 => s.to_lowercase(),
        _ => s.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub planted: usize,
    pub hits: usize,
    pub true_hits: usize,
    /// `None` when the scanner reported nothing for this kind.
    pub precision: Option<f64>,
    pub recall: f64,
}

/// Precision and recall of the evidence against the ledger, per plant kind.
/// Row-match and identifier evidence is scored against complete and
/// duplicate plants, keyed by (dataset, test row, location); association
/// evidence against association plants, keyed by (dataset, location).
pub fn scanner_prf(ledger: &PlantLedger, evidence: &[MatchEvidence]) -> Result<BTreeMap<PlantKind, Prf>> {
    if let Some(e) = evidence.iter().find(|e| e.corpus_id != ledger.corpus_id) {
        return Err(Error::CorpusMismatch { expected: ledger.corpus_id.clone(), found: e.corpus_id.clone() });
    }
    type Key<'a> = (&'a str, Option<u64>, &'a Location);
    let mut out = BTreeMap::new();
    let kinds: BTreeSet<PlantKind> = ledger.plants.iter().map(|p| p.kind).collect();
    for kind in kinds {
        let row_level = kind != PlantKind::Association;
        let plants = ledger.plants.iter().filter(|p| p.kind == kind);
        let planted: BTreeSet<Key> = plants
            .flat_map(|p| {
                let row = if row_level { p.source_row } else { None };
                p.locations.iter().map(move |l| (p.dataset_id.as_str(), row, l))
            })
            .collect();
        let datasets: BTreeSet<&str> = planted.iter().map(|k| k.0).collect();
        let hits: BTreeSet<Key> = evidence
            .iter()
            .filter(|e| datasets.contains(e.dataset_id.as_str()))
            .filter(|e| match e.strategy {
                Strategy::RowMatch | Strategy::Identifier => row_level,
                Strategy::Association => !row_level,
            })
            .flat_map(|e| {
                let row = if row_level { e.test_row_id } else { None };
                e.matched.iter().map(move |l| (e.dataset_id.as_str(), row, l))
            })
            .collect();
        let true_hits = hits.intersection(&planted).count();
        out.insert(
            kind,
            Prf {
                planted: planted.len(),
                hits: hits.len(),
                true_hits,
                precision: (!hits.is_empty()).then(|| true_hits as f64 / hits.len() as f64),
                recall: if planted.is_empty() { 1.0 } else { true_hits as f64 / planted.len() as f64 },
            },
        );
    }
    Ok(out)
}

/// Labor-force style fixture: a unique id, numeric features and a yes/no
/// target. Values never collide with background tokens.
pub fn labor_force_fixture(id: &str, n: usize, seed: u64) -> (Dataset, TaskSpec) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let columns = ["id", "age", "educ", "kidslt6", "kids618", "nwifeinc", "wage", "hours", "lfp"];
    let rows: Vec<Vec<Cell>> = (0..n)
        .map(|i| {
            let lfp = if rng.gen_bool(0.57) { "yes" } else { "no" };
            let hours = if lfp == "yes" { rng.gen_range(12..4950) } else { 0 };
            [
                format!("{}-{i:05}", sanitize(id)),
                rng.gen_range(30..61).to_string(),
                rng.gen_range(5..18).to_string(),
                rng.gen_range(0..4).to_string(),
                rng.gen_range(0..9).to_string(),
                format!("{:.4}", rng.gen_range(-0.03..96.0f64)),
                format!("{:.4}", rng.gen_range(0.12..25.0f64)),
                hours.to_string(),
                lfp.to_string(),
            ]
            .iter()
            .map(|s| Cell::parse(s))
            .collect()
        })
        .collect();
    let ds = Dataset::new(id, columns.iter().map(|s| s.to_string()).collect(), rows).expect("fixture shape");
    let task = TaskSpec::new(id, TaskType::Binary, "lfp", TaskLabels::Classes(vec!["no".into(), "yes".into()]))
        .expect("fixture task");
    (ds, task)
}

pub const WEEKDAYS: [&str; 7] = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"];

/// Calendar fixture: `n` consecutive ISO dates from `start` and their weekday.
pub fn weekday_fixture(id: &str, start: NaiveDate, n: usize) -> (Dataset, TaskSpec) {
    let rows = (0..n)
        .map(|i| {
            let d = start + Duration::days(i as i64);
            vec![Cell::parse(&d.format("%Y-%m-%d").to_string()), Cell::parse(&d.format("%A").to_string())]
        })
        .collect();
    let ds = Dataset::new(id, vec!["date".into(), "weekday".into()], rows).expect("fixture shape");
    let labels = WEEKDAYS.iter().map(|s| s.to_string()).collect();
    let task = TaskSpec::new(id, TaskType::Categorical, "weekday", TaskLabels::Classes(labels)).expect("fixture task");
    (ds, task)
}

/// The `(date, weekday)` pairs of a calendar fixture.
pub fn weekday_pairs(dataset: &Dataset) -> Vec<(String, String)> {
    dataset
        .rows()
        .iter()
        .map(|r| (r[0].raw().unwrap_or("").to_string(), r[1].raw().unwrap_or("").to_string()))
        .collect()
}

/// Default ledger path for a corpus.
pub fn ledger_path(corpus: &Path) -> PathBuf {
    corpus.join(LEDGER_FILE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::read_csv_rows;
    use crate::normalize::{normalize_cell, NormalizeOptions};

    fn small() -> CorpusParams {
        CorpusParams { tables: 3, rows_per_table: 10, columns: 4, tables_per_chunk: 2 }
    }

    fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
        let mut out: Vec<_> = walkdir::WalkDir::new(dir)
            .sort_by_file_name()
            .into_iter()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_type().is_file())
            .map(|e| (e.path().strip_prefix(dir).unwrap().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
            .collect();
        out.sort();
        out
    }

    #[test]
    fn generation_is_reproducible() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let s = generate_corpus(a.path(), &small(), 1).unwrap();
        generate_corpus(b.path(), &small(), 1).unwrap();
        assert_eq!(s.rows, 30);
        assert_eq!(snapshot(a.path()), snapshot(b.path()));
        assert!(a.path().join("chunk001/t00002.csv").exists());

        let (ds, _) = labor_force_fixture("lf", 20, 3);
        let la = plant_complete_overlap(a.path(), &ds, 1.0, true, 9).unwrap();
        let lb = plant_complete_overlap(b.path(), &ds, 1.0, true, 9).unwrap();
        assert_eq!(la, lb);
        assert_eq!(snapshot(a.path()), snapshot(b.path()));

        let c = tempfile::tempdir().unwrap();
        generate_corpus(c.path(), &small(), 2).unwrap();
        assert_ne!(snapshot(a.path()), snapshot(c.path()));
    }

    fn assert_ledger_readback(dir: &Path, ledger: &PlantLedger, ds: Option<&Dataset>) {
        let opts = NormalizeOptions::default();
        for p in &ledger.plants {
            for loc in &p.locations {
                let (_, rows) = read_csv_rows(&dir.join(&loc.table)).unwrap();
                let got: BTreeSet<String> = rows[loc.row as usize].iter().map(|c| normalize_cell(c, &opts)).collect();
                if let (Some(ds), Some(src)) = (ds, p.source_row) {
                    for c in &ds.rows()[src as usize] {
                        assert!(got.contains(&normalize_cell(c, &opts)), "{loc:?} lacks {c:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn complete_plant_renames_every_column() {
        let dir = tempfile::tempdir().unwrap();
        generate_corpus(dir.path(), &small(), 1).unwrap();
        let (ds, _) = labor_force_fixture("lf", 753, 3);
        let ledger = plant_complete_overlap(dir.path(), &ds, 1.0, true, 5).unwrap();
        assert_eq!(ledger.plants.len(), 753);
        assert_eq!(ledger.locations(PlantKind::Complete), 753);
        let table = &ledger.plants[0].locations[0].table;
        let (cols, _) = read_csv_rows(&dir.path().join(table)).unwrap();
        assert!(ds.columns().iter().all(|c| !cols.contains(c)), "{cols:?}");
        assert_ledger_readback(dir.path(), &ledger, Some(&ds));

        let keep = plant_complete_overlap(dir.path(), &ds, 0.0, false, 6).unwrap();
        let (cols, _) = read_csv_rows(&dir.path().join(&keep.plants[0].locations[0].table)).unwrap();
        assert_eq!(&cols[..ds.columns().len()], ds.columns());
    }

    #[test]
    fn duplicate_and_association_counts() {
        let dir = tempfile::tempdir().unwrap();
        generate_corpus(dir.path(), &small(), 1).unwrap();
        let (ds, _) = labor_force_fixture("lf", 30, 3);
        let rows: Vec<usize> = (0..10).collect();
        let ledger = plant_direct_duplicates(dir.path(), &ds, &rows, 3, 4).unwrap();
        assert_eq!(ledger.locations(PlantKind::DirectDup), 30);
        for p in &ledger.plants {
            let tables: BTreeSet<&str> = p.locations.iter().map(|l| l.table.as_str()).collect();
            assert_eq!(tables.len(), 3);
        }
        assert_ledger_readback(dir.path(), &ledger, Some(&ds));
        assert!(plant_direct_duplicates(dir.path(), &ds, &rows, 0, 4).is_err());

        let pairs = vec![("2021-11-30".to_string(), "Tuesday".to_string())];
        let a = plant_association(dir.path(), "wk", &pairs, 3, 2, 8).unwrap();
        assert_eq!(a.plants[0].locations.len(), 6);
        let none = plant_association(dir.path(), "wk", &pairs, 3, 0, 8).unwrap();
        assert!(none.plants[0].locations.is_empty());
    }

    fn ev(dataset: &str, strategy: Strategy, row: Option<u64>, loc: Location) -> MatchEvidence {
        MatchEvidence {
            corpus_id: "c".into(),
            dataset_id: dataset.into(),
            strategy,
            test_row_id: row,
            matched: vec![loc],
            overlap: 1.0,
            label_exposed: false,
            exposed_value: None,
            probe: None,
            near_miss: None,
        }
    }

    #[test]
    fn prf_arithmetic() {
        let loc = |r| Location { table: "t".into(), row: r };
        let plants = (0..9)
            .map(|i| Plant {
                kind: PlantKind::Complete,
                dataset_id: "d".into(),
                source_row: Some(i),
                locations: vec![loc(i as u32)],
                transformations: vec![],
            })
            .collect();
        let ledger = PlantLedger { corpus_id: "c".into(), seed: 0, plants };
        let mut evidence: Vec<_> = (0..9).map(|i| ev("d", Strategy::RowMatch, Some(i), loc(i as u32))).collect();
        let perfect = scanner_prf(&ledger, &evidence).unwrap();
        assert_eq!(perfect[&PlantKind::Complete].precision, Some(1.0));
        assert_eq!(perfect[&PlantKind::Complete].recall, 1.0);

        evidence.push(ev("d", Strategy::RowMatch, Some(0), loc(99)));
        let spurious = scanner_prf(&ledger, &evidence).unwrap();
        assert!((spurious[&PlantKind::Complete].precision.unwrap() - 0.9).abs() < 1e-12);

        let empty = scanner_prf(&ledger, &[]).unwrap();
        assert_eq!(empty[&PlantKind::Complete].recall, 0.0);
        assert_eq!(empty[&PlantKind::Complete].precision, None);

        let mut other = ev("d", Strategy::RowMatch, Some(0), loc(0));
        other.corpus_id = "elsewhere".into();
        assert!(matches!(scanner_prf(&ledger, &[other]), Err(Error::CorpusMismatch { .. })));
    }

    #[test]
    fn fixtures() {
        let (ds, task) = weekday_fixture("wk", NaiveDate::from_ymd_opt(2021, 11, 29).unwrap(), 3);
        task.validate_against(&ds).unwrap();
        assert_eq!(weekday_pairs(&ds)[1], ("2021-11-30".to_string(), "Tuesday".to_string()));
        let (lf, task) = labor_force_fixture("lf", 50, 1);
        task.validate_against(&lf).unwrap();
        let ids: BTreeSet<_> = lf.column("id").unwrap().map(|c| c.raw().unwrap().to_string()).collect();
        assert_eq!(ids.len(), 50);
    }
}
