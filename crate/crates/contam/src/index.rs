//! Inverted index from normalized cell values to corpus locations.
//!
//! Building is a single streaming pass per file. Files are parsed in parallel
//! batches and merged sequentially in path order, so table ids and postings
//! do not depend on thread scheduling. When the estimated size of the
//! in-memory postings passes [`IndexConfig::memory_cap`], they are spilled to
//! hashed shard files and the finished index is served from disk.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tabaudit_core::Cell;
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::format::{self, FLAG_FOLD_DATES, MAGIC, VERSION};
use crate::normalize::{normalize_cell, NormalizeOptions};
use crate::search::Location;

/// Name of the optional file at the corpus root holding the corpus id.
pub const CORPUS_ID_FILE: &str = "CORPUS_ID";

/// One occurrence: row `row` of catalog table `table`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Posting {
    pub table: u32,
    pub row: u32,
}

/// A cataloged table. `id` is its path relative to the corpus root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableEntry {
    pub id: String,
    pub columns: Vec<String>,
    pub row_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct IndexConfig {
    /// Glob patterns matched against file names and root-relative paths.
    pub patterns: Vec<String>,
    pub normalize: NormalizeOptions,
    /// Estimated bytes of in-memory postings before spilling to disk.
    pub memory_cap: Option<usize>,
    pub shards: usize,
    /// Where spill files go. A temporary directory when unset.
    pub spill_dir: Option<PathBuf>,
    /// Where a spilled build writes its index file. Inside the spill
    /// directory when unset.
    pub index_path: Option<PathBuf>,
}

impl Default for IndexConfig {
    fn default() -> Self {
        IndexConfig {
            patterns: vec!["*.csv".to_string()],
            normalize: NormalizeOptions::default(),
            memory_cap: None,
            shards: 256,
            spill_dir: None,
            index_path: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    /// Largest estimated footprint of postings held in memory during the build.
    pub peak_estimated_bytes: usize,
    pub spills: usize,
    pub distinct_values: usize,
    pub postings: u64,
}

enum Store {
    Memory(HashMap<String, Arc<[Posting]>>),
    Disk {
        path: PathBuf,
        offsets: Vec<(u64, u64)>,
        // keeps a temporary spill directory alive as long as the index
        _spill: Option<Arc<tempfile::TempDir>>,
    },
}

pub struct CorpusIndex {
    corpus_id: String,
    root: PathBuf,
    catalog: Vec<TableEntry>,
    total_rows: u64,
    files_present: u64,
    files_indexed: u64,
    skipped: Vec<SkippedFile>,
    normalize: NormalizeOptions,
    store: Store,
    stats: BuildStats,
    inline: HashMap<u32, Arc<Vec<Vec<Cell>>>>,
    by_id: HashMap<String, u32>,
}

impl std::fmt::Debug for CorpusIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CorpusIndex")
            .field("corpus_id", &self.corpus_id)
            .field("tables", &self.catalog.len())
            .field("total_rows", &self.total_rows)
            .field("sharded", &self.is_sharded())
            .finish()
    }
}

impl CorpusIndex {
    pub fn corpus_id(&self) -> &str {
        &self.corpus_id
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Points table reads at a different copy of the corpus.
    pub fn with_root(mut self, root: impl Into<PathBuf>) -> Self {
        self.root = root.into();
        self
    }

    pub fn catalog(&self) -> &[TableEntry] {
        &self.catalog
    }

    pub fn table(&self, table: u32) -> Option<&TableEntry> {
        self.catalog.get(table as usize)
    }

    pub fn table_index(&self, id: &str) -> Option<u32> {
        self.by_id.get(id).copied()
    }

    pub fn total_rows(&self) -> u64 {
        self.total_rows
    }

    pub fn files_present(&self) -> u64 {
        self.files_present
    }

    pub fn files_indexed(&self) -> u64 {
        self.files_indexed
    }

    /// Files indexed over files present. An empty corpus has coverage 0.
    pub fn coverage(&self) -> f64 {
        if self.files_present == 0 {
            0.0
        } else {
            self.files_indexed as f64 / self.files_present as f64
        }
    }

    pub fn skipped(&self) -> &[SkippedFile] {
        &self.skipped
    }

    pub fn normalize_options(&self) -> &NormalizeOptions {
        &self.normalize
    }

    pub fn stats(&self) -> &BuildStats {
        &self.stats
    }

    pub fn is_sharded(&self) -> bool {
        matches!(self.store, Store::Disk { .. })
    }

    pub fn location(&self, p: Posting) -> Location {
        Location { table: self.catalog[p.table as usize].id.clone(), row: p.row }
    }

    pub fn normalize(&self, cell: &Cell) -> String {
        normalize_cell(cell, &self.normalize)
    }

    /// Postings of an already-normalized value; empty when absent.
    pub fn postings(&self, value: &str) -> Result<Arc<[Posting]>> {
        Ok(self.lookup_many(&[value])?.remove(value).unwrap_or_else(|| Arc::from(Vec::new())))
    }

    /// Postings of several normalized values, reading each disk shard once.
    /// Values absent from the corpus are absent from the result.
    pub fn lookup_many(&self, values: &[&str]) -> Result<HashMap<String, Arc<[Posting]>>> {
        match &self.store {
            Store::Memory(map) => Ok(values
                .iter()
                .filter_map(|v| map.get(*v).map(|p| (v.to_string(), Arc::clone(p))))
                .collect()),
            Store::Disk { path, offsets, .. } => {
                let mut by_shard: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
                for v in values {
                    by_shard.entry(format::shard_of(v, offsets.len())).or_default().push(v);
                }
                let mut file = File::open(path).map_err(Error::io(path))?;
                let mut out = HashMap::new();
                let mut block = Vec::new();
                for (shard, mut wanted) in by_shard {
                    wanted.sort_unstable();
                    wanted.dedup();
                    let (offset, len) = offsets[shard];
                    block.resize(len as usize, 0);
                    file.seek(SeekFrom::Start(offset)).map_err(Error::io(path))?;
                    file.read_exact(&mut block).map_err(Error::io(path))?;
                    let hits = format::find_in_block(&block, &wanted).map_err(|e| Error::Format {
                        path: path.clone(),
                        reason: format!("shard {shard}: {e}"),
                    })?;
                    for (i, postings) in hits {
                        out.insert(wanted[i].to_string(), Arc::from(postings));
                    }
                }
                Ok(out)
            }
        }
    }

    /// Number of corpus rows holding a normalized value.
    pub fn frequency(&self, value: &str) -> Result<usize> {
        Ok(self.postings(value)?.len())
    }

    /// Cells of one corpus table, re-read from its source file.
    pub fn read_rows(&self, table: u32) -> Result<Arc<Vec<Vec<Cell>>>> {
        if let Some(rows) = self.inline.get(&table) {
            return Ok(Arc::clone(rows));
        }
        let entry = self.table(table).ok_or_else(|| Error::UnknownTable(table.to_string()))?;
        let (_, rows) = read_csv_rows(&self.root.join(&entry.id))?;
        Ok(Arc::new(rows))
    }

    /// Builds an in-memory index over tables already loaded. Table ids are the
    /// dataset ids.
    pub fn from_datasets(
        corpus_id: impl Into<String>,
        tables: Vec<tabaudit_core::Dataset>,
        normalize: NormalizeOptions,
    ) -> Result<CorpusIndex> {
        let mut builder = Builder::new(None, 1, None)?;
        let mut inline = HashMap::new();
        let files = tables.len() as u64;
        for ds in tables {
            let mut values: HashMap<String, Vec<u32>> = HashMap::new();
            for (r, row) in ds.rows().iter().enumerate() {
                add_row(&mut values, row, r as u32, &normalize);
            }
            let entry =
                TableEntry { id: ds.id().to_string(), columns: ds.columns().to_vec(), row_count: ds.row_count() as u32 };
            let t = builder.add(entry, values.into_iter().collect(), 0)?;
            inline.insert(t, Arc::new(ds.rows().to_vec()));
        }
        let meta = Meta {
            corpus_id: corpus_id.into(),
            root: PathBuf::new(),
            files_present: files,
            files_indexed: files,
            skipped: Vec::new(),
            normalize,
        };
        let mut index = builder.finish(meta)?;
        index.inline = inline;
        Ok(index)
    }

    /// Writes the index in the binary layout described in the `format` module.
    pub fn save(&self, path: &Path) -> Result<()> {
        match &self.store {
            Store::Memory(map) => {
                let n_shards = 256;
                let mut shards: Vec<Vec<(&str, &[Posting])>> = vec![Vec::new(); n_shards];
                for (k, v) in map {
                    shards[format::shard_of(k, n_shards)].push((k, v));
                }
                write_index(path, &self.meta(), &self.catalog, n_shards, |s| {
                    let entries = &mut shards[s];
                    entries.sort_unstable_by(|a, b| a.0.cmp(b.0));
                    let mut block = Vec::new();
                    block.write_u32::<LE>(entries.len() as u32)?;
                    for (k, v) in entries.iter() {
                        format::write_entry(&mut block, k, v)?;
                    }
                    Ok(block)
                })
            }
            Store::Disk { path: src, .. } => {
                if src != path {
                    fs::copy(src, path).map_err(Error::io(path))?;
                }
                Ok(())
            }
        }
    }

    /// Opens a saved index. Postings stay on disk and are read per lookup.
    pub fn open(path: &Path) -> Result<CorpusIndex> {
        let bad = |reason: String| Error::Format { path: path.to_path_buf(), reason };
        let file = File::open(path).map_err(Error::io(path))?;
        let file_len = file.metadata().map_err(Error::io(path))?.len();
        let mut r = BufReader::new(file);
        let io = |e: std::io::Error| Error::Format { path: path.to_path_buf(), reason: e.to_string() };
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(bad("not an index file".into()));
        }
        let version = r.read_u32::<LE>().map_err(io)?;
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let flags = r.read_u32::<LE>().map_err(io)?;
        let corpus_id = format::read_str(&mut r).map_err(io)?;
        let root = PathBuf::from(format::read_str(&mut r).map_err(io)?);
        let total_rows = r.read_u64::<LE>().map_err(io)?;
        let files_present = r.read_u64::<LE>().map_err(io)?;
        let files_indexed = r.read_u64::<LE>().map_err(io)?;
        let mut skipped = Vec::new();
        for _ in 0..format::read_len(&mut r).map_err(io)? {
            let path = format::read_str(&mut r).map_err(io)?;
            let reason = format::read_str(&mut r).map_err(io)?;
            skipped.push(SkippedFile { path, reason });
        }
        let mut catalog = Vec::new();
        for _ in 0..format::read_len(&mut r).map_err(io)? {
            let id = format::read_str(&mut r).map_err(io)?;
            let mut columns = Vec::new();
            for _ in 0..format::read_len(&mut r).map_err(io)? {
                columns.push(format::read_str(&mut r).map_err(io)?);
            }
            let row_count = r.read_u32::<LE>().map_err(io)?;
            catalog.push(TableEntry { id, columns, row_count });
        }
        let n_shards = format::read_len(&mut r).map_err(io)?;
        if n_shards == 0 {
            return Err(bad("zero shards".into()));
        }
        let mut offsets = Vec::with_capacity(n_shards);
        for _ in 0..n_shards {
            let offset = r.read_u64::<LE>().map_err(io)?;
            let len = r.read_u64::<LE>().map_err(io)?;
            if offset.checked_add(len).map_or(true, |end| end > file_len) || len < 4 {
                return Err(bad(format!("shard extent {offset}+{len} outside file")));
            }
            offsets.push((offset, len));
        }
        let by_id = catalog.iter().enumerate().map(|(i, t)| (t.id.clone(), i as u32)).collect();
        Ok(CorpusIndex {
            corpus_id,
            root,
            catalog,
            total_rows,
            files_present,
            files_indexed,
            skipped,
            normalize: NormalizeOptions { fold_dates: flags & FLAG_FOLD_DATES != 0 },
            store: Store::Disk { path: path.to_path_buf(), offsets, _spill: None },
            stats: BuildStats::default(),
            inline: HashMap::new(),
            by_id,
        })
    }

    fn meta(&self) -> Meta {
        Meta {
            corpus_id: self.corpus_id.clone(),
            root: self.root.clone(),
            files_present: self.files_present,
            files_indexed: self.files_indexed,
            skipped: self.skipped.clone(),
            normalize: self.normalize,
        }
    }
}

struct Meta {
    corpus_id: String,
    root: PathBuf,
    files_present: u64,
    files_indexed: u64,
    skipped: Vec<SkippedFile>,
    normalize: NormalizeOptions,
}

fn write_index(
    path: &Path,
    meta: &Meta,
    catalog: &[TableEntry],
    n_shards: usize,
    mut block: impl FnMut(usize) -> std::io::Result<Vec<u8>>,
) -> Result<()> {
    let io = Error::io(path);
    let mut inner = || -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_u32::<LE>(VERSION)?;
        w.write_u32::<LE>(if meta.normalize.fold_dates { FLAG_FOLD_DATES } else { 0 })?;
        format::write_str(&mut w, &meta.corpus_id)?;
        format::write_str(&mut w, &meta.root.to_string_lossy())?;
        w.write_u64::<LE>(catalog.iter().map(|t| t.row_count as u64).sum())?;
        w.write_u64::<LE>(meta.files_present)?;
        w.write_u64::<LE>(meta.files_indexed)?;
        w.write_u32::<LE>(meta.skipped.len() as u32)?;
        for s in &meta.skipped {
            format::write_str(&mut w, &s.path)?;
            format::write_str(&mut w, &s.reason)?;
        }
        w.write_u32::<LE>(catalog.len() as u32)?;
        for t in catalog {
            format::write_str(&mut w, &t.id)?;
            w.write_u32::<LE>(t.columns.len() as u32)?;
            for c in &t.columns {
                format::write_str(&mut w, c)?;
            }
            w.write_u32::<LE>(t.row_count)?;
        }
        w.write_u32::<LE>(n_shards as u32)?;
        let table_at = w.stream_position()?;
        for _ in 0..n_shards {
            w.write_u64::<LE>(0)?;
            w.write_u64::<LE>(0)?;
        }
        let mut offsets = Vec::with_capacity(n_shards);
        for s in 0..n_shards {
            let bytes = block(s)?;
            offsets.push((w.stream_position()?, bytes.len() as u64));
            w.write_all(&bytes)?;
        }
        w.seek(SeekFrom::Start(table_at))?;
        for (o, l) in offsets {
            w.write_u64::<LE>(o)?;
            w.write_u64::<LE>(l)?;
        }
        w.flush()
    };
    inner().map_err(io)
}

/// Reads a CSV table with the same rules used while indexing.
pub fn read_csv_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<Cell>>)> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut reader = csv_reader(path).map_err(csv_err)?;
    let columns = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        rows.push(record.map_err(csv_err)?.iter().map(Cell::parse).collect());
    }
    Ok((columns, rows))
}

fn csv_reader(path: &Path) -> csv::Result<csv::Reader<File>> {
    csv::ReaderBuilder::new().has_headers(true).flexible(false).from_path(path)
}

fn add_row(values: &mut HashMap<String, Vec<u32>>, row: &[Cell], r: u32, opts: &NormalizeOptions) {
    for cell in row {
        if cell.is_missing() {
            continue;
        }
        let rows = values.entry(normalize_cell(cell, opts)).or_default();
        if rows.last() != Some(&r) {
            rows.push(r);
        }
    }
}

struct ParsedTable {
    columns: Vec<String>,
    row_count: u32,
    values: Vec<(String, Vec<u32>)>,
    estimate: usize,
}

// Rough heap cost of one hash-map entry beyond its key and postings bytes.
const ENTRY_OVERHEAD: usize = 64;
// Parsed postings of a CSV file cost about this many times its size.
const PARSE_EXPANSION: usize = 8;

fn parse_file(path: &Path, opts: &NormalizeOptions) -> Result<ParsedTable> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut reader = csv_reader(path).map_err(csv_err)?;
    let columns: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut values: HashMap<String, Vec<u32>> = HashMap::new();
    let mut record = csv::StringRecord::new();
    let mut r: u32 = 0;
    let mut cells = Vec::with_capacity(columns.len());
    while reader.read_record(&mut record).map_err(csv_err)? {
        cells.clear();
        cells.extend(record.iter().map(Cell::parse));
        add_row(&mut values, &cells, r, opts);
        r = r.checked_add(1).ok_or_else(|| Error::InvalidArgument("table has too many rows".into()))?;
    }
    let estimate = values.iter().map(|(k, v)| k.capacity() + v.capacity() * 4 + ENTRY_OVERHEAD).sum();
    Ok(ParsedTable { columns, row_count: r, values: values.into_iter().collect(), estimate })
}

/// Accumulates postings table by table, spilling to shard files under a cap.
struct Builder {
    map: HashMap<String, Vec<Posting>>,
    estimate: usize,
    cap: Option<usize>,
    n_shards: usize,
    catalog: Vec<TableEntry>,
    spill_dir: Option<PathBuf>,
    temp: Option<Arc<tempfile::TempDir>>,
    index_path: Option<PathBuf>,
    stats: BuildStats,
}

impl Builder {
    fn new(cap: Option<usize>, n_shards: usize, spill_dir: Option<PathBuf>) -> Result<Builder> {
        if n_shards == 0 {
            return Err(Error::InvalidArgument("shard count must be positive".into()));
        }
        Ok(Builder {
            map: HashMap::new(),
            estimate: 0,
            cap,
            n_shards,
            catalog: Vec::new(),
            spill_dir,
            temp: None,
            index_path: None,
            stats: BuildStats::default(),
        })
    }

    /// Merges one table. `pending` is the estimated size of parsed tables
    /// still waiting to be merged.
    fn add(&mut self, entry: TableEntry, values: Vec<(String, Vec<u32>)>, pending: usize) -> Result<u32> {
        let incoming: usize = values.iter().map(|(k, v)| k.len() + v.len() * 8 + ENTRY_OVERHEAD).sum();
        if let Some(cap) = self.cap {
            if !self.map.is_empty() && self.estimate + incoming + pending > cap {
                self.spill()?;
            }
        }
        let t = self.catalog.len() as u32;
        self.catalog.push(entry);
        for (k, rows) in values {
            self.stats.postings += rows.len() as u64;
            match self.map.get_mut(&k) {
                Some(list) => {
                    let before = list.capacity();
                    list.extend(rows.into_iter().map(|row| Posting { table: t, row }));
                    self.estimate += (list.capacity() - before) * 8;
                }
                None => {
                    let list: Vec<Posting> = rows.into_iter().map(|row| Posting { table: t, row }).collect();
                    self.estimate += k.capacity() + list.capacity() * 8 + ENTRY_OVERHEAD;
                    self.map.insert(k, list);
                }
            }
        }
        self.note_peak(pending);
        Ok(t)
    }

    /// Spills ahead of parsing a batch expected to need `expected` bytes.
    fn make_room(&mut self, expected: usize) -> Result<()> {
        if let Some(cap) = self.cap {
            if !self.map.is_empty() && self.estimate + expected > cap {
                self.spill()?;
            }
        }
        Ok(())
    }

    fn note_peak(&mut self, pending: usize) {
        self.stats.peak_estimated_bytes = self.stats.peak_estimated_bytes.max(self.estimate + pending);
    }

    fn spill_dir(&mut self) -> Result<PathBuf> {
        if let Some(d) = &self.spill_dir {
            fs::create_dir_all(d).map_err(Error::io(d))?;
            return Ok(d.clone());
        }
        let t = tempfile::Builder::new()
            .prefix("tabaudit-spill")
            .tempdir()
            .map_err(Error::io(std::env::temp_dir()))?;
        let path = t.path().to_path_buf();
        self.temp = Some(Arc::new(t));
        self.spill_dir = Some(path.clone());
        Ok(path)
    }

    fn shard_path(dir: &Path, s: usize) -> PathBuf {
        dir.join(format!("shard-{s:04}.spill"))
    }

    fn spill(&mut self) -> Result<()> {
        let dir = self.spill_dir()?;
        let mut by_shard: Vec<Vec<(String, Vec<Posting>)>> = vec![Vec::new(); self.n_shards];
        for (k, v) in std::mem::take(&mut self.map) {
            by_shard[format::shard_of(&k, self.n_shards)].push((k, v));
        }
        for (s, entries) in by_shard.into_iter().enumerate() {
            if entries.is_empty() {
                continue;
            }
            let path = Self::shard_path(&dir, s);
            let write = || -> std::io::Result<()> {
                let f = OpenOptions::new().create(true).append(true).open(&path)?;
                let mut w = BufWriter::new(f);
                for (k, v) in &entries {
                    format::write_entry(&mut w, k, v)?;
                }
                w.flush()
            };
            write().map_err(Error::io(&path))?;
        }
        log::info!("spilled {} bytes of postings to {}", self.estimate, dir.display());
        self.estimate = 0;
        self.stats.spills += 1;
        Ok(())
    }

    fn finish(mut self, meta: Meta) -> Result<CorpusIndex> {
        let total_rows = self.catalog.iter().map(|t| t.row_count as u64).sum();
        let by_id = self.catalog.iter().enumerate().map(|(i, t)| (t.id.clone(), i as u32)).collect();
        let store = if self.stats.spills == 0 {
            self.stats.distinct_values = self.map.len();
            let map = self.map.drain().map(|(k, v)| (k, Arc::from(v))).collect();
            Store::Memory(map)
        } else {
            if !self.map.is_empty() {
                self.spill()?;
            }
            let dir = self.spill_dir()?;
            let path = self.index_path.clone().unwrap_or_else(|| dir.join("index.tabaudix"));
            let mut distinct = 0usize;
            let mut peak = self.stats.peak_estimated_bytes;
            write_index(&path, &meta, &self.catalog, self.n_shards, |s| {
                let spill = Self::shard_path(&dir, s);
                let mut merged: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
                let mut shard_estimate = 0usize;
                if spill.exists() {
                    let len = fs::metadata(&spill)?.len();
                    let mut r = BufReader::new(File::open(&spill)?);
                    let mut read = 0u64;
                    while read < len {
                        let (k, v) = format::read_entry(&mut r)?;
                        read += 8 + k.len() as u64 + 8 * v.len() as u64;
                        match merged.get_mut(&k) {
                            Some(list) => list.extend(v),
                            None => {
                                shard_estimate += k.len() + ENTRY_OVERHEAD;
                                merged.insert(k, v);
                            }
                        }
                    }
                    fs::remove_file(&spill)?;
                }
                distinct += merged.len();
                let mut block = Vec::new();
                block.write_u32::<LE>(merged.len() as u32)?;
                for (k, v) in &merged {
                    shard_estimate += v.len() * 8;
                    format::write_entry(&mut block, k, v)?;
                }
                peak = peak.max(shard_estimate + block.len());
                Ok(block)
            })?;
            self.stats.distinct_values = distinct;
            self.stats.peak_estimated_bytes = peak;
            let offsets = CorpusIndex::open(&path)?.store;
            match offsets {
                Store::Disk { offsets, .. } => Store::Disk { path, offsets, _spill: self.temp.clone() },
                Store::Memory(_) => unreachable!("open always yields a disk store"),
            }
        };
        Ok(CorpusIndex {
            corpus_id: meta.corpus_id,
            root: meta.root,
            catalog: self.catalog,
            total_rows,
            files_present: meta.files_present,
            files_indexed: meta.files_indexed,
            skipped: meta.skipped,
            normalize: meta.normalize,
            store,
            stats: self.stats,
            inline: HashMap::new(),
            by_id,
        })
    }
}

fn corpus_id_of(root: &Path) -> String {
    match fs::read_to_string(root.join(CORPUS_ID_FILE)) {
        Ok(s) if !s.trim().is_empty() => s.trim().to_string(),
        _ => root.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "corpus".into()),
    }
}

/// Lists the table files under `root` matching any pattern, sorted by path.
pub fn list_table_files(root: &Path, patterns: &[String]) -> Result<Vec<(String, PathBuf)>> {
    let compiled = patterns
        .iter()
        .map(|p| glob::Pattern::new(p).map_err(|_| Error::Pattern(p.clone())))
        .collect::<Result<Vec<_>>>()?;
    let mut files = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                log::warn!("cannot walk {}: {e}", root.display());
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(root).unwrap_or(entry.path());
        let rel_str = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        let name = entry.file_name().to_string_lossy();
        if compiled.iter().any(|p| p.matches(&name) || p.matches(&rel_str)) {
            files.push((rel_str, entry.path().to_path_buf()));
        }
    }
    files.sort();
    Ok(files)
}

/// Indexes every table file under `corpus_root` matching the configured
/// patterns. Unreadable or malformed files are logged and skipped.
pub fn build_index(corpus_root: &Path, config: &IndexConfig) -> Result<CorpusIndex> {
    let files = list_table_files(corpus_root, &config.patterns)?;
    if files.is_empty() {
        return Err(Error::EmptyCorpus(corpus_root.to_path_buf()));
    }
    let root = fs::canonicalize(corpus_root).map_err(Error::io(corpus_root))?;
    let mut builder = Builder::new(config.memory_cap, config.shards, config.spill_dir.clone())?;
    builder.index_path = config.index_path.clone();

    // batch by file size so parsed-but-unmerged tables stay well under the cap
    let batch_bytes = config.memory_cap.map_or(64 << 20, |c| c / (4 * PARSE_EXPANSION)) as u64;
    let mut skipped = Vec::new();
    let mut start = 0;
    while start < files.len() {
        let mut end = start;
        let mut bytes = 0u64;
        while end < files.len() && (end == start || bytes < batch_bytes) && end - start < 512 {
            bytes += fs::metadata(&files[end].1).map(|m| m.len()).unwrap_or(0);
            end += 1;
        }
        builder.make_room(bytes as usize * PARSE_EXPANSION)?;
        let parsed: Vec<Result<ParsedTable>> =
            files[start..end].par_iter().map(|(_, path)| parse_file(path, &config.normalize)).collect();
        let mut pending: usize = parsed.iter().filter_map(|p| p.as_ref().ok()).map(|p| p.estimate).sum();
        builder.note_peak(pending);
        for ((rel, _), table) in files[start..end].iter().zip(parsed) {
            match table {
                Ok(t) => {
                    pending -= t.estimate;
                    let entry = TableEntry { id: rel.clone(), columns: t.columns, row_count: t.row_count };
                    builder.add(entry, t.values, pending)?;
                }
                Err(e) => {
                    log::warn!("skipping {rel}: {e}");
                    skipped.push(SkippedFile { path: rel.clone(), reason: e.to_string() });
                }
            }
        }
        start = end;
    }
    let meta = Meta {
        corpus_id: corpus_id_of(&root),
        root,
        files_present: files.len() as u64,
        files_indexed: (files.len() - skipped.len()) as u64,
        skipped,
        normalize: config.normalize,
    };
    builder.finish(meta)
}
