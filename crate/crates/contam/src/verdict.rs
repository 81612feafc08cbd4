//! Per-dataset contamination verdicts.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::search::{MatchEvidence, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    CompleteOverlap,
    DirectWithLabels,
    TaskLeakage,
    None,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::CompleteOverlap => "complete_overlap",
            Category::DirectWithLabels => "direct_with_labels",
            Category::TaskLeakage => "task_leakage",
            Category::None => "none",
        }
    }
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictThresholds {
    /// Row-match fraction at or above which overlap is complete.
    pub complete_min_fraction: f64,
    /// Row-match fraction that must be exceeded for direct contamination.
    pub direct_min_fraction: f64,
    /// Distinct tables an association must span to count as task leakage.
    pub association_min_tables: usize,
}

impl Default for VerdictThresholds {
    fn default() -> Self {
        VerdictThresholds { complete_min_fraction: 0.99, direct_min_fraction: 0.0, association_min_tables: 10 }
    }
}

/// Evidence aggregated over every test row of one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSummary {
    pub test_rows: usize,
    pub rows_matched: usize,
    pub row_match_fraction: f64,
    pub label_exposed_rows: usize,
    pub identifier_hits: usize,
    /// Rows and tables of the strongest association probe.
    pub association_count: usize,
    pub distinct_association_tables: usize,
}

impl EvidenceSummary {
    pub fn from_evidence(test_rows: usize, evidence: &[MatchEvidence]) -> Self {
        let matched: BTreeSet<u64> = evidence
            .iter()
            .filter(|e| e.strategy == Strategy::RowMatch)
            .filter_map(|e| e.test_row_id)
            .collect();
        let exposed: BTreeSet<(Option<u64>, Option<&str>)> = evidence
            .iter()
            .filter(|e| e.strategy != Strategy::Association && e.label_exposed)
            .map(|e| (e.test_row_id, e.probe.as_deref()))
            .collect();
        let identifier_hits = evidence.iter().filter(|e| e.strategy == Strategy::Identifier).count();
        let (distinct_association_tables, association_count) = evidence
            .iter()
            .filter(|e| e.strategy == Strategy::Association)
            .map(|e| (e.matched.iter().map(|l| l.table.as_str()).collect::<BTreeSet<_>>().len(), e.matched.len()))
            .max()
            .unwrap_or((0, 0));
        EvidenceSummary {
            test_rows,
            rows_matched: matched.len(),
            row_match_fraction: if test_rows == 0 { 0.0 } else { matched.len() as f64 / test_rows as f64 },
            label_exposed_rows: exposed.len(),
            identifier_hits,
            association_count,
            distinct_association_tables,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationVerdict {
    pub dataset_id: String,
    pub category: Category,
    pub row_match_fraction: f64,
    pub association_count: usize,
    pub distinct_association_tables: usize,
    pub label_exposed: bool,
}

/// Complete overlap first, then direct contamination with labels, then task
/// leakage, else none.
pub fn classify_contamination(
    dataset_id: &str,
    summary: &EvidenceSummary,
    thresholds: &VerdictThresholds,
) -> ContaminationVerdict {
    let f = summary.row_match_fraction;
    let label_exposed = summary.label_exposed_rows > 0;
    let category = if f >= thresholds.complete_min_fraction {
        Category::CompleteOverlap
    } else if f > thresholds.direct_min_fraction && label_exposed {
        Category::DirectWithLabels
    } else if summary.association_count > 0
        && summary.distinct_association_tables >= thresholds.association_min_tables
    {
        Category::TaskLeakage
    } else {
        Category::None
    };
    ContaminationVerdict {
        dataset_id: dataset_id.to_string(),
        category,
        row_match_fraction: f,
        association_count: summary.association_count,
        distinct_association_tables: summary.distinct_association_tables,
        label_exposed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::Location;
    use proptest::prelude::{prop_assert, proptest};

    fn summary(test_rows: usize, matched: usize, exposed: usize, assoc: usize, tables: usize) -> EvidenceSummary {
        EvidenceSummary {
            test_rows,
            rows_matched: matched,
            row_match_fraction: matched as f64 / test_rows as f64,
            label_exposed_rows: exposed,
            identifier_hits: 0,
            association_count: assoc,
            distinct_association_tables: tables,
        }
    }

    fn classify(s: &EvidenceSummary) -> Category {
        classify_contamination("d", s, &VerdictThresholds::default()).category
    }

    #[test]
    fn reference_cases() {
        assert_eq!(classify(&summary(753, 753, 753, 0, 0)), Category::CompleteOverlap);
        assert_eq!(classify(&summary(100, 0, 0, 844, 24)), Category::TaskLeakage);
        assert_eq!(classify(&summary(100, 0, 0, 0, 0)), Category::None);
        assert_eq!(classify(&summary(100, 10, 3, 0, 0)), Category::DirectWithLabels);
        // matches without labels are not direct contamination
        assert_eq!(classify(&summary(100, 10, 0, 0, 0)), Category::None);
        // association spread too thin
        assert_eq!(classify(&summary(100, 0, 0, 50, 9)), Category::None);
    }

    #[test]
    fn summary_from_evidence() {
        let loc = |t: &str, r| Location { table: t.into(), row: r };
        let ev = |strategy, row: u64, matched: Vec<Location>, exposed: bool| MatchEvidence {
            corpus_id: "c".into(),
            dataset_id: "d".into(),
            strategy,
            test_row_id: Some(row),
            matched,
            overlap: 1.0,
            label_exposed: exposed,
            exposed_value: exposed.then(|| "no".to_string()),
            probe: None,
            near_miss: None,
        };
        let evidence = vec![
            ev(Strategy::RowMatch, 0, vec![loc("a", 0)], true),
            ev(Strategy::RowMatch, 0, vec![loc("b", 0)], true),
            ev(Strategy::RowMatch, 2, vec![loc("a", 1)], false),
            ev(Strategy::Association, 1, vec![loc("x", 0), loc("y", 0), loc("y", 1)], true),
            ev(Strategy::Association, 3, vec![loc("x", 0), loc("x", 1), loc("x", 2), loc("x", 3)], true),
        ];
        let s = EvidenceSummary::from_evidence(4, &evidence);
        assert_eq!(s.rows_matched, 2);
        assert_eq!(s.row_match_fraction, 0.5);
        assert_eq!(s.label_exposed_rows, 1);
        // the probe spanning more tables wins over the one with more rows
        assert_eq!((s.association_count, s.distinct_association_tables), (3, 2));
    }

    proptest! {
        #[test]
        fn verdict_invariants(n in 1usize..500, m_frac in 0.0f64..=1.0, exposed: bool, assoc in 0usize..100, tables in 0usize..30) {
            let m = ((n as f64) * m_frac).round() as usize;
            let tables = tables.min(assoc);
            let s = summary(n, m, if exposed { m.max(1) } else { 0 }, assoc, tables);
            let th = VerdictThresholds::default();
            let v = classify_contamination("d", &s, &th);
            match v.category {
                Category::CompleteOverlap => prop_assert!(v.row_match_fraction >= th.complete_min_fraction),
                Category::TaskLeakage => {
                    prop_assert!(v.row_match_fraction < th.complete_min_fraction);
                    prop_assert!(v.distinct_association_tables >= th.association_min_tables);
                }
                Category::DirectWithLabels => prop_assert!(v.row_match_fraction > 0.0 && v.label_exposed),
                Category::None => {}
            }
        }
    }
}
