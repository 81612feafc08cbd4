//! The three search strategies and label-exposure checks.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tabaudit_core::Cell;

use crate::error::{Error, Result};
use crate::index::{CorpusIndex, Posting};
use crate::normalize::normalize_raw;

/// Relative distance under which a numeric target counts as a near miss.
pub const NEAR_MISS_RELATIVE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub table: String,
    pub row: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Identifier,
    RowMatch,
    Association,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Identifier => "identifier",
            Strategy::RowMatch => "row_match",
            Strategy::Association => "association",
        }
    }
}

/// One contamination finding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchEvidence {
    pub corpus_id: String,
    pub dataset_id: String,
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_row_id: Option<u64>,
    pub matched: Vec<Location>,
    pub overlap: f64,
    pub label_exposed: bool,
    /// The target value as written in the corpus file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exposed_value: Option<String>,
    /// Identifier or association key that produced the hit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<String>,
    /// A corpus number within the near-miss tolerance of a numeric target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub near_miss: Option<String>,
}

impl MatchEvidence {
    fn new(corpus_id: &str, strategy: Strategy, matched: Vec<Location>, overlap: f64) -> Self {
        MatchEvidence {
            corpus_id: corpus_id.to_string(),
            dataset_id: String::new(),
            strategy,
            test_row_id: None,
            matched,
            overlap,
            label_exposed: false,
            exposed_value: None,
            probe: None,
            near_miss: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowMatchParams {
    pub min_overlap: f64,
    pub min_distinctive: usize,
    /// A value is distinctive when it occurs in fewer than this fraction of
    /// indexed rows...
    pub selectivity: f64,
    /// ...or in fewer than this many rows, whichever bound is larger.
    pub selectivity_floor: u64,
}

impl Default for RowMatchParams {
    fn default() -> Self {
        RowMatchParams { min_overlap: 0.8, min_distinctive: 2, selectivity: 0.001, selectivity_floor: 5 }
    }
}

impl RowMatchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_overlap > 0.0 && self.min_overlap <= 1.0) {
            return Err(Error::InvalidArgument(format!("min_overlap {} not in (0, 1]", self.min_overlap)));
        }
        if !(self.selectivity >= 0.0 && self.selectivity <= 1.0) {
            return Err(Error::InvalidArgument(format!("selectivity {} not in [0, 1]", self.selectivity)));
        }
        Ok(())
    }

    /// Frequencies strictly below this are distinctive.
    pub fn distinctive_cap(&self, total_rows: u64) -> f64 {
        (self.selectivity * total_rows as f64).max(self.selectivity_floor as f64)
    }
}

/// Postings fetched ahead of a batch of queries, so sharded indexes read
/// each shard once. Misses fall through to the index.
pub struct PostingCache<'a> {
    index: &'a CorpusIndex,
    map: HashMap<String, Arc<[Posting]>>,
}

impl<'a> PostingCache<'a> {
    pub fn new(index: &'a CorpusIndex) -> Self {
        PostingCache { index, map: HashMap::new() }
    }

    pub fn index(&self) -> &'a CorpusIndex {
        self.index
    }

    pub fn fetch<'v>(&mut self, values: impl IntoIterator<Item = &'v str>) -> Result<()> {
        let mut missing: Vec<&str> = values.into_iter().filter(|v| !self.map.contains_key(*v)).collect();
        missing.sort_unstable();
        missing.dedup();
        let mut found = self.index.lookup_many(&missing)?;
        for v in missing {
            let p = found.remove(v).unwrap_or_else(|| Arc::from(Vec::new()));
            self.map.insert(v.to_string(), p);
        }
        Ok(())
    }

    pub fn get(&self, value: &str) -> Result<Arc<[Posting]>> {
        match self.map.get(value) {
            Some(p) => Ok(Arc::clone(p)),
            None => self.index.postings(value),
        }
    }
}

/// Distinct normalized non-missing values of a row, sorted.
pub fn row_values(index: &CorpusIndex, row: &[Cell]) -> Vec<String> {
    let set: BTreeSet<String> = row.iter().filter(|c| !c.is_missing()).map(|c| index.normalize(c)).collect();
    set.into_iter().collect()
}

/// Where each identifier occurs, after normalization.
pub fn identifier_search(index: &CorpusIndex, identifiers: &[&str]) -> Result<BTreeMap<String, Vec<Location>>> {
    let normalized: Vec<String> = identifiers.iter().map(|s| normalize_raw(s, index.normalize_options())).collect();
    let refs: Vec<&str> = normalized.iter().map(String::as_str).collect();
    let found = index.lookup_many(&refs)?;
    Ok(identifiers
        .iter()
        .zip(&normalized)
        .map(|(id, n)| {
            let hits = found.get(n).map(|p| p.iter().map(|&p| index.location(p)).collect()).unwrap_or_default();
            (id.to_string(), hits)
        })
        .collect())
}

/// Corpus rows sharing at least `min_overlap` of the test row's distinct
/// values, of which at least `min_distinctive` are distinctive. Column names
/// and order play no part. One evidence record per matched corpus row.
pub fn row_match(index: &CorpusIndex, test_row: &[Cell], params: &RowMatchParams) -> Result<Vec<MatchEvidence>> {
    params.validate()?;
    let values = row_values(index, test_row);
    let mut cache = PostingCache::new(index);
    cache.fetch(values.iter().map(String::as_str))?;
    Ok(row_match_postings(&cache, &values, params)?
        .into_iter()
        .map(|(p, overlap)| MatchEvidence::new(index.corpus_id(), Strategy::RowMatch, vec![index.location(p)], overlap))
        .collect())
}

/// Smallest `m` with `m / k >= min_overlap`.
fn required_matches(k: usize, min_overlap: f64) -> usize {
    let mut m = ((min_overlap * k as f64).floor() as usize).min(k);
    while m < k && (m as f64) / (k as f64) < min_overlap {
        m += 1;
    }
    while m > 1 && ((m - 1) as f64) / (k as f64) >= min_overlap {
        m -= 1;
    }
    m.max(1)
}

/// Core of [`row_match`]: matched postings with their overlap, sorted.
pub(crate) fn row_match_postings(
    cache: &PostingCache<'_>,
    values: &[String],
    params: &RowMatchParams,
) -> Result<Vec<(Posting, f64)>> {
    let k = values.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    let cap = params.distinctive_cap(cache.index().total_rows());
    let lists: Vec<(Arc<[Posting]>, bool)> = values
        .iter()
        .map(|v| {
            let p = cache.get(v)?;
            let distinctive = !p.is_empty() && (p.len() as f64) < cap;
            Ok((p, distinctive))
        })
        .collect::<Result<_>>()?;
    let need = required_matches(k, params.min_overlap);
    let n_distinctive = lists.iter().filter(|l| l.1).count();
    if n_distinctive < params.min_distinctive || lists.iter().filter(|l| !l.0.is_empty()).count() < need {
        return Ok(Vec::new());
    }

    // Any match holds `need` of the k values, so it appears in one of the
    // k - need + 1 rarest lists. It also holds `min_distinctive` distinctive
    // values, so it appears in one of the d - min_distinctive + 1 rarest
    // distinctive lists. Generate candidates from the cheaper family.
    let mut by_len: Vec<usize> = (0..k).collect();
    by_len.sort_by_key(|&i| lists[i].0.len());
    let family_a: Vec<usize> = by_len.iter().copied().take(k - need + 1).collect();
    let family_b: Vec<usize> = if params.min_distinctive > 0 {
        by_len.iter().copied().filter(|&i| lists[i].1).take(n_distinctive - params.min_distinctive + 1).collect()
    } else {
        Vec::new()
    };
    let cost = |f: &[usize]| f.iter().map(|&i| lists[i].0.len()).sum::<usize>();
    let family = if !family_b.is_empty() && cost(&family_b) < cost(&family_a) { family_b } else { family_a };
    let mut candidates: Vec<Posting> = family.iter().flat_map(|&i| lists[i].0.iter().copied()).collect();
    candidates.sort_unstable();
    candidates.dedup();

    let mut out = Vec::new();
    for c in candidates {
        let mut matched = 0;
        let mut distinctive = 0;
        for (list, d) in &lists {
            if list.binary_search(&c).is_ok() {
                matched += 1;
                if *d {
                    distinctive += 1;
                }
            }
        }
        let overlap = matched as f64 / k as f64;
        if overlap >= params.min_overlap && distinctive >= params.min_distinctive {
            out.push((c, overlap));
        }
    }
    Ok(out)
}

/// Whether a matched corpus row carries the target value beyond the copies
/// already explained by the test row's own feature values. On success sets
/// `exposed_value` to the corpus spelling. A numeric target found only within
/// [`NEAR_MISS_RELATIVE`] is logged and recorded as a near miss instead.
pub fn label_exposure(
    evidence: &mut MatchEvidence,
    corpus_row: &[Cell],
    test_features: &[Cell],
    target_value: &Cell,
    index: &CorpusIndex,
) -> bool {
    if target_value.is_missing() {
        return false;
    }
    let target = index.normalize(target_value);
    let in_features = test_features.iter().filter(|c| !c.is_missing() && index.normalize(c) == target).count();
    let in_corpus: Vec<&Cell> =
        corpus_row.iter().filter(|c| !c.is_missing() && index.normalize(c) == target).collect();
    if in_corpus.len() > in_features {
        evidence.label_exposed = true;
        evidence.exposed_value = in_corpus[0].raw().map(str::to_string);
        return true;
    }
    if let Some(t) = target_value.as_f64() {
        let near = corpus_row.iter().find(|c| match c.as_f64() {
            Some(v) => v != t && (v - t).abs() <= NEAR_MISS_RELATIVE * v.abs().max(t.abs()),
            None => false,
        });
        if let Some(c) = near {
            let raw = c.raw().unwrap_or_default().to_string();
            log::info!("near miss for target {}: corpus has {raw}", target_value.raw().unwrap_or_default());
            evidence.near_miss = Some(raw);
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssociationResult {
    pub count: usize,
    pub distinct_tables: usize,
    pub samples: Vec<Location>,
}

/// Corpus rows containing both values.
pub fn association_search(
    index: &CorpusIndex,
    key_value: &Cell,
    target_value: &Cell,
    sample_k: usize,
) -> Result<AssociationResult> {
    if key_value.is_missing() || target_value.is_missing() {
        return Err(Error::InvalidArgument("association values must be present".into()));
    }
    let key = index.normalize(key_value);
    let target = index.normalize(target_value);
    let mut cache = PostingCache::new(index);
    cache.fetch([key.as_str(), target.as_str()])?;
    let rows = co_occurrences(&cache, &key, &target, &HashSet::new())?;
    Ok(summarize_rows(index, &rows, sample_k))
}

/// Sorted postings holding both normalized values, minus `exclude`.
pub(crate) fn co_occurrences(
    cache: &PostingCache<'_>,
    key: &str,
    target: &str,
    exclude: &HashSet<Posting>,
) -> Result<Vec<Posting>> {
    let a = cache.get(key)?;
    let b = cache.get(target)?;
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                if !exclude.contains(&a[i]) {
                    out.push(a[i]);
                }
                i += 1;
                j += 1;
            }
        }
    }
    Ok(out)
}

pub(crate) fn summarize_rows(index: &CorpusIndex, rows: &[Posting], sample_k: usize) -> AssociationResult {
    let tables: BTreeSet<u32> = rows.iter().map(|p| p.table).collect();
    AssociationResult {
        count: rows.len(),
        distinct_tables: tables.len(),
        samples: rows.iter().take(sample_k).map(|&p| index.location(p)).collect(),
    }
}
