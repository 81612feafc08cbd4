//! Quartile-classification tasks: boundary estimation, bin labels, bin
//! assignment and the single-feature shortcut audit.

use serde::{Deserialize, Serialize};

use crate::data::{Cell, Dataset};
use crate::error::{Error, Result};
use crate::num::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuartileBoundaries<T> {
    pub q1: T,
    pub q2: T,
    pub q3: T,
}

impl<T: Scalar> QuartileBoundaries<T> {
    pub fn new(q1: T, q2: T, q3: T) -> Result<Self> {
        if !(q1.is_finite() && q2.is_finite() && q3.is_finite()) || q1 > q2 || q2 > q3 {
            return Err(Error::BoundaryOrder);
        }
        Ok(QuartileBoundaries { q1, q2, q3 })
    }

    pub fn as_array(&self) -> [T; 3] {
        [self.q1, self.q2, self.q3]
    }

    pub fn assign(&self, value: T) -> Result<usize> {
        assign_bin(value, self)
    }

    /// The four bin labels in bin order.
    pub fn labels(&self) -> [String; 4] {
        [0, 1, 2, 3].map(|i| bin_label(self, i).expect("index in range"))
    }
}

/// Sample quantile by linear interpolation between order statistics at the
/// zero-based position `p·(n−1)`. `sorted` must be ascending and non-empty.
pub fn sample_quantile<T: Scalar>(sorted: &[T], p: T) -> T {
    let pos = p * T::of_usize(sorted.len() - 1);
    let lo = pos.floor();
    let frac = pos - lo;
    let i = lo.to_usize().expect("position in range");
    if i + 1 >= sorted.len() || frac == T::zero() {
        return sorted[i.min(sorted.len() - 1)];
    }
    sorted[i] + (sorted[i + 1] - sorted[i]) * frac
}

/// Quartile boundaries of a continuous target.
pub fn quartile_bins<T: Scalar>(values: &[T]) -> Result<QuartileBoundaries<T>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if values.len() < 4 {
        return Err(Error::InsufficientData(format!("quartile bins need at least 4 values, got {}", values.len())));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::DegenerateTarget);
    }
    QuartileBoundaries::new(
        sample_quantile(&sorted, T::of(0.25)),
        sample_quantile(&sorted, T::of(0.5)),
        sample_quantile(&sorted, T::of(0.75)),
    )
}

/// Prompt label of a bin. Numbers use the shortest representation that
/// round-trips, so boundaries read from a manifest keep their digits.
pub fn bin_label<T: Scalar>(b: &QuartileBoundaries<T>, bin_index: usize) -> Result<String> {
    Ok(match bin_index {
        0 => format!("less than {}", b.q1),
        1 => format!("between {} and {}", b.q1, b.q2),
        2 => format!("between {} and {}", b.q2, b.q3),
        3 => format!("greater than {}", b.q3),
        i => return Err(Error::BinIndex(i)),
    })
}

/// Bin of a value; boundaries belong to the upper bin (`v == q1` → bin 1).
pub fn assign_bin<T: Scalar>(value: T, b: &QuartileBoundaries<T>) -> Result<usize> {
    if !value.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(if value < b.q1 {
        0
    } else if value < b.q2 {
        1
    } else if value < b.q3 {
        2
    } else {
        3
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuartileTask<T> {
    pub source_column: String,
    pub boundaries: QuartileBoundaries<T>,
    pub bin_labels: [String; 4],
}

impl<T: Scalar> QuartileTask<T> {
    pub fn new(source_column: impl Into<String>, boundaries: QuartileBoundaries<T>) -> Self {
        QuartileTask { source_column: source_column.into(), bin_labels: boundaries.labels(), boundaries }
    }
}

/// Builds a quartile task from a numeric column of `dataset`.
pub fn quartile_task(dataset: &Dataset, column: &str) -> Result<QuartileTask<f64>> {
    let mut values = Vec::new();
    for cell in dataset.column(column)? {
        match cell {
            Cell::Number { value, .. } => values.push(*value),
            Cell::Missing => {}
            other => {
                return Err(Error::InvalidTable {
                    table: dataset.id().to_string(),
                    reason: format!("target `{column}` has non-numeric value `{}`", other.raw().unwrap_or("")),
                })
            }
        }
    }
    Ok(QuartileTask::new(column, quartile_bins(&values)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureShortcut {
    pub feature: String,
    /// Fraction of scored rows where binning the feature with the target's
    /// boundaries gives the target's bin.
    pub single_feature_bin_accuracy: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortcutReport {
    pub dataset_id: String,
    pub target_column: String,
    pub threshold: f64,
    pub scored_rows: usize,
    pub features: Vec<FeatureShortcut>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ShortcutReport {
    pub fn flagged(&self) -> impl Iterator<Item = &FeatureShortcut> {
        self.features.iter().filter(|f| f.flagged)
    }
}

pub const DEFAULT_SHORTCUT_THRESHOLD: f64 = 0.9;

/// Scores every numeric non-target column as a one-feature predictor of the
/// target bin. Rows with a missing target are skipped; a missing feature
/// value counts as a miss.
pub fn shortcut_audit(dataset: &Dataset, task: &QuartileTask<f64>, threshold: f64) -> Result<ShortcutReport> {
    let target_idx = dataset
        .column_index(&task.source_column)
        .ok_or_else(|| Error::MissingColumn(task.source_column.clone()))?;
    let target_bins: Vec<Option<usize>> = dataset
        .rows()
        .iter()
        .map(|r| r[target_idx].as_f64().map(|v| assign_bin(v, &task.boundaries)).transpose())
        .collect::<Result<_>>()?;
    let scored_rows = target_bins.iter().flatten().count();

    let numeric_columns: Vec<usize> = (0..dataset.columns().len())
        .filter(|&c| c != target_idx)
        .filter(|&c| {
            let mut any = false;
            let all_numeric = dataset.rows().iter().all(|r| match &r[c] {
                Cell::Number { .. } => {
                    any = true;
                    true
                }
                Cell::Missing => true,
                _ => false,
            });
            all_numeric && any
        })
        .collect();

    let mut features = Vec::with_capacity(numeric_columns.len());
    for c in numeric_columns {
        let hits = dataset
            .rows()
            .iter()
            .zip(&target_bins)
            .filter_map(|(r, tb)| tb.map(|tb| (r, tb)))
            .filter(|(r, tb)| r[c].as_f64().and_then(|v| assign_bin(v, &task.boundaries).ok()) == Some(*tb))
            .count();
        let acc = if scored_rows == 0 { 0.0 } else { hits as f64 / scored_rows as f64 };
        features.push(FeatureShortcut {
            feature: dataset.columns()[c].clone(),
            single_feature_bin_accuracy: acc,
            flagged: acc >= threshold,
        });
    }
    let note = features.is_empty().then(|| "no numeric non-target features".to_string());
    Ok(ShortcutReport {
        dataset_id: dataset.id().to_string(),
        target_column: task.source_column.clone(),
        threshold,
        scored_rows,
        features,
        note,
    })
}
