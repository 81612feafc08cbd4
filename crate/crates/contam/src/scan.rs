//! Runs every search strategy over one dataset.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tabaudit_core::{Cell, Dataset, TaskSpec};

use crate::error::{Error, Result};
use crate::index::{CorpusIndex, Posting};
use crate::search::{
    co_occurrences, label_exposure, row_match_postings, row_values, MatchEvidence, PostingCache, RowMatchParams,
    Strategy,
};
use crate::verdict::{classify_contamination, ContaminationVerdict, EvidenceSummary, VerdictThresholds};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub row_match: RowMatchParams,
    pub thresholds: VerdictThresholds,
    /// Columns whose values are searched as identifiers.
    pub identifier_columns: Vec<String>,
    /// Probe distinctive feature values against each row's target value.
    pub association: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            row_match: RowMatchParams::default(),
            thresholds: VerdictThresholds::default(),
            identifier_columns: Vec::new(),
            association: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetScan {
    pub evidence: Vec<MatchEvidence>,
    pub summary: EvidenceSummary,
    pub verdict: ContaminationVerdict,
}

struct RowHits {
    row_match: Vec<(Posting, f64)>,
    identifiers: Vec<(String, Vec<Posting>)>,
}

/// Searches the corpus for every test row. Row matching uses the feature
/// columns only; the target is then checked for exposure in each matched
/// corpus row. Association probes pair each distinctive feature value with
/// the row's target and ignore corpus rows already found by row matching.
pub fn scan_dataset(
    index: &CorpusIndex,
    dataset: &Dataset,
    task: &TaskSpec,
    opts: &ScanOptions,
) -> Result<DatasetScan> {
    opts.row_match.validate()?;
    let target_col = dataset
        .column_index(&task.target_column)
        .ok_or_else(|| tabaudit_core::Error::MissingColumn(task.target_column.clone()))?;
    let id_cols = opts
        .identifier_columns
        .iter()
        .map(|c| dataset.column_index(c).ok_or_else(|| tabaudit_core::Error::MissingColumn(c.clone()).into()))
        .collect::<Result<Vec<usize>>>()?;

    let features: Vec<Vec<Cell>> = dataset
        .rows()
        .iter()
        .map(|r| r.iter().enumerate().filter(|(i, _)| *i != target_col).map(|(_, c)| c.clone()).collect())
        .collect();
    let values: Vec<Vec<String>> = features.iter().map(|f| row_values(index, f)).collect();
    let targets: Vec<Option<String>> = dataset
        .rows()
        .iter()
        .map(|r| (!r[target_col].is_missing()).then(|| index.normalize(&r[target_col])))
        .collect();

    let mut cache = PostingCache::new(index);
    cache.fetch(values.iter().flatten().chain(targets.iter().flatten()).map(String::as_str))?;

    let hits: Vec<RowHits> = (0..dataset.row_count())
        .into_par_iter()
        .map(|r| {
            let row_match = row_match_postings(&cache, &values[r], &opts.row_match)?;
            let mut identifiers = Vec::new();
            for &c in &id_cols {
                let cell = &dataset.rows()[r][c];
                if cell.is_missing() {
                    continue;
                }
                let v = index.normalize(cell);
                let p = cache.get(&v)?;
                if !p.is_empty() {
                    identifiers.push((cell.raw().unwrap_or_default().to_string(), p.to_vec()));
                }
            }
            Ok(RowHits { row_match, identifiers })
        })
        .collect::<Result<_>>()?;

    // re-read each corpus table that holds a hit, once
    let mut needed: Vec<u32> = hits
        .iter()
        .flat_map(|h| h.row_match.iter().map(|p| p.0.table).chain(h.identifiers.iter().flat_map(|i| i.1.iter().map(|p| p.table))))
        .collect();
    needed.sort_unstable();
    needed.dedup();
    let tables: HashMap<u32, Arc<Vec<Vec<Cell>>>> = needed
        .par_iter()
        .map(|&t| Ok((t, index.read_rows(t)?)))
        .collect::<Result<_>>()?;
    let corpus_row = |p: Posting| -> Result<&[Cell]> {
        tables[&p.table].get(p.row as usize).map(Vec::as_slice).ok_or_else(|| Error::Format {
            path: index.root().join(&index.catalog()[p.table as usize].id),
            reason: format!("row {} changed since indexing", p.row),
        })
    };

    let mut evidence = Vec::new();
    let new_evidence = |strategy, row: usize, matched, overlap, probe: Option<String>| MatchEvidence {
        corpus_id: index.corpus_id().to_string(),
        dataset_id: dataset.id().to_string(),
        strategy,
        test_row_id: Some(row as u64),
        matched,
        overlap,
        label_exposed: false,
        exposed_value: None,
        probe,
        near_miss: None,
    };
    let mut row_matched: HashSet<Posting> = HashSet::new();
    for (r, h) in hits.iter().enumerate() {
        let target = &dataset.rows()[r][target_col];
        for &(p, overlap) in &h.row_match {
            row_matched.insert(p);
            let mut ev = new_evidence(Strategy::RowMatch, r, vec![index.location(p)], overlap, None);
            label_exposure(&mut ev, corpus_row(p)?, &features[r], target, index);
            evidence.push(ev);
        }
        for (id, postings) in &h.identifiers {
            for &p in postings {
                let mut ev = new_evidence(Strategy::Identifier, r, vec![index.location(p)], 1.0, Some(id.clone()));
                label_exposure(&mut ev, corpus_row(p)?, &features[r], target, index);
                evidence.push(ev);
            }
        }
    }

    if opts.association {
        let cap = opts.row_match.distinctive_cap(index.total_rows());
        let probes: Vec<Vec<MatchEvidence>> = (0..dataset.row_count())
            .into_par_iter()
            .map(|r| {
                let Some(target) = &targets[r] else { return Ok(Vec::new()) };
                let raw_target = dataset.rows()[r][target_col].raw().unwrap_or_default().to_string();
                let mut out = Vec::new();
                for v in &values[r] {
                    if v == target {
                        continue;
                    }
                    let freq = cache.get(v)?.len();
                    if freq == 0 || freq as f64 >= cap {
                        continue;
                    }
                    let rows = co_occurrences(&cache, v, target, &row_matched)?;
                    if rows.is_empty() {
                        continue;
                    }
                    let matched = rows.iter().map(|&p| index.location(p)).collect();
                    let mut ev = new_evidence(Strategy::Association, r, matched, 1.0, Some(v.clone()));
                    ev.label_exposed = true;
                    ev.exposed_value = Some(raw_target.clone());
                    out.push(ev);
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        evidence.extend(probes.into_iter().flatten());
    }

    let summary = EvidenceSummary::from_evidence(dataset.row_count(), &evidence);
    let verdict = classify_contamination(dataset.id(), &summary, &opts.thresholds);
    Ok(DatasetScan { evidence, summary, verdict })
}

/// Evidence counts per strategy, for logging and reports.
pub fn strategy_counts(evidence: &[MatchEvidence]) -> BTreeMap<Strategy, usize> {
    let mut counts = BTreeMap::new();
    for e in evidence {
        *counts.entry(e.strategy).or_insert(0) += 1;
    }
    counts
}
