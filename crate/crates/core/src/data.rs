//! Datasets, task manifests and prediction files.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::hash::Hash;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::serialize::{extract_prediction, ExtractOptions};
use crate::taskgen::QuartileBoundaries;

/// One table cell.
///
/// Numbers and booleans keep the text they were parsed from so prompts can
/// reproduce the source bytes exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Missing,
    Bool { value: bool, raw: String },
    Number { value: f64, raw: String },
    Text(String),
}

impl Cell {
    /// Classifies a raw field. Empty fields are missing; `true`/`false` in any
    /// case are booleans; finite decimal literals are numbers.
    pub fn parse(raw: &str) -> Cell {
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            return Cell::Missing;
        }
        if trimmed.eq_ignore_ascii_case("true") {
            return Cell::Bool { value: true, raw: raw.to_string() };
        }
        if trimmed.eq_ignore_ascii_case("false") {
            return Cell::Bool { value: false, raw: raw.to_string() };
        }
        if is_decimal_literal(trimmed) {
            if let Ok(value) = trimmed.parse::<f64>() {
                if value.is_finite() {
                    return Cell::Number { value, raw: raw.to_string() };
                }
            }
        }
        Cell::Text(raw.to_string())
    }

    /// Source text, or `None` for a missing cell.
    pub fn raw(&self) -> Option<&str> {
        match self {
            Cell::Missing => None,
            Cell::Bool { raw, .. } | Cell::Number { raw, .. } => Some(raw),
            Cell::Text(s) => Some(s),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Number { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::parse(s)
    }
}

/// `[+-]digits[.digits][e[+-]digits]`, with at least one mantissa digit.
pub(crate) fn is_decimal_literal(s: &str) -> bool {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let mut digits = 0;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
        digits += 1;
    }
    if i < b.len() && b[i] == b'.' {
        i += 1;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
            digits += 1;
        }
    }
    if digits == 0 {
        return false;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        let start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == start {
            return false;
        }
    }
    i == b.len()
}

/// A table with named columns. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    id: String,
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Dataset {
    pub fn new(id: impl Into<String>, columns: Vec<String>, rows: Vec<Vec<Cell>>) -> Result<Self> {
        let id = id.into();
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.as_str()) {
                return Err(Error::InvalidTable {
                    table: id,
                    reason: format!("duplicate column name `{c}`"),
                });
            }
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != columns.len()) {
            return Err(Error::InvalidTable {
                table: id,
                reason: format!("row {i} has {} cells, expected {}", r.len(), columns.len()),
            });
        }
        Ok(Dataset { id, columns, rows })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> Option<&[Cell]> {
        self.rows.get(i).map(Vec::as_slice)
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Result<impl Iterator<Item = &Cell> + '_> {
        let idx = self.column_index(name).ok_or_else(|| Error::MissingColumn(name.to_string()))?;
        Ok(self.rows.iter().map(move |r| &r[idx]))
    }

    /// Reads a CSV file with a header row.
    pub fn read_csv(path: &Path, id: impl Into<String>) -> Result<Self> {
        let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_path(path)
            .map_err(csv_err)?;
        let columns: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(csv_err)?;
            rows.push(record.iter().map(Cell::parse).collect());
        }
        Dataset::new(id, columns, rows)
    }

    /// Writes the canonical CSV form. Missing cells become empty fields.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
        let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
        writer.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            writer
                .write_record(row.iter().map(|c| c.raw().unwrap_or("")))
                .map_err(csv_err)?;
        }
        writer.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
    }
}

/// Reads a table file, choosing the adapter from the extension.
pub fn read_table(path: &Path, id: impl Into<String>) -> Result<Dataset> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("csv") => Dataset::read_csv(path, id),
        _ => Err(Error::UnsupportedFormat(path.to_path_buf())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskType {
    Binary,
    Categorical,
    Quartile,
}

impl TaskType {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskType::Binary => "binary",
            TaskType::Categorical => "categorical",
            TaskType::Quartile => "quartile",
        }
    }
}

impl std::fmt::Display for TaskType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TaskType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(TaskType::Binary),
            "categorical" => Ok(TaskType::Categorical),
            "quartile" => Ok(TaskType::Quartile),
            other => Err(Error::InvalidArgument(format!("unknown task type `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskLabels {
    Classes(Vec<String>),
    Quartile(QuartileBoundaries<f64>),
}

/// What to predict on a dataset and which answers are admissible.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub dataset_id: String,
    pub task_type: TaskType,
    pub target_column: String,
    pub labels: TaskLabels,
}

impl TaskSpec {
    pub fn new(
        dataset_id: impl Into<String>,
        task_type: TaskType,
        target_column: impl Into<String>,
        labels: TaskLabels,
    ) -> Result<Self> {
        match (&labels, task_type) {
            (TaskLabels::Classes(l), TaskType::Binary) if l.len() != 2 => {
                return Err(Error::LabelSet(format!("binary task needs 2 class labels, got {}", l.len())))
            }
            (TaskLabels::Classes(l), TaskType::Categorical) if l.len() < 3 => {
                return Err(Error::LabelSet(format!(
                    "categorical task needs at least 3 class labels, got {}",
                    l.len()
                )))
            }
            (TaskLabels::Classes(_), TaskType::Quartile) => {
                return Err(Error::LabelSet("quartile task takes boundaries, not class labels".into()))
            }
            (TaskLabels::Quartile(_), TaskType::Binary | TaskType::Categorical) => {
                return Err(Error::LabelSet(format!("{task_type} task takes class labels, not boundaries")))
            }
            _ => {}
        }
        if let TaskLabels::Classes(l) = &labels {
            let mut seen = HashSet::new();
            if let Some(dup) = l.iter().find(|x| !seen.insert(x.as_str())) {
                return Err(Error::LabelSet(format!("duplicate class label `{dup}`")));
            }
        }
        Ok(TaskSpec {
            dataset_id: dataset_id.into(),
            task_type,
            target_column: target_column.into(),
            labels,
        })
    }

    /// Admissible answers in prompt order. Quartile tasks use their four bin labels.
    pub fn label_set(&self) -> Vec<String> {
        match &self.labels {
            TaskLabels::Classes(l) => l.clone(),
            TaskLabels::Quartile(b) => b.labels().to_vec(),
        }
    }

    /// Gold label for a target cell.
    pub fn gold_label(&self, cell: &Cell) -> Result<String> {
        let unknown = |label: &str| Error::UnknownLabel {
            label: label.to_string(),
            context: format!("target of `{}`", self.dataset_id),
        };
        match &self.labels {
            TaskLabels::Classes(labels) => {
                let raw = cell.raw().ok_or_else(|| unknown("<missing>"))?.trim();
                if let Some(l) = labels.iter().find(|l| l.as_str() == raw) {
                    return Ok(l.clone());
                }
                // "1.0" against label "1"
                if let Some(v) = cell.as_f64() {
                    if let Some(l) = labels.iter().find(|l| l.trim().parse::<f64>().ok() == Some(v)) {
                        return Ok(l.clone());
                    }
                }
                Err(unknown(raw))
            }
            TaskLabels::Quartile(b) => {
                let v = cell.as_f64().ok_or_else(|| unknown(cell.raw().unwrap_or("<missing>")))?;
                let bin = b.assign(v)?;
                Ok(b.labels()[bin].clone())
            }
        }
    }

    pub fn validate_against(&self, dataset: &Dataset) -> Result<()> {
        if dataset.column_index(&self.target_column).is_none() {
            return Err(Error::MissingColumn(self.target_column.clone()));
        }
        Ok(())
    }
}

/// On-disk manifest: one JSON object per dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub id: String,
    pub task_type: TaskType,
    pub target_column: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quartile_boundaries: Option<Vec<f64>>,
    pub table_path: String,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        serde_json::from_str(&text).map_err(|e| Error::Manifest { path: path.to_path_buf(), reason: e.to_string() })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
    }

    pub fn from_task(task: &TaskSpec, table_path: impl Into<String>) -> Self {
        let (class_labels, quartile_boundaries) = match &task.labels {
            TaskLabels::Classes(l) => (Some(l.clone()), None),
            TaskLabels::Quartile(b) => (None, Some(vec![b.q1, b.q2, b.q3])),
        };
        Manifest {
            id: task.dataset_id.clone(),
            task_type: task.task_type,
            target_column: task.target_column.clone(),
            class_labels,
            quartile_boundaries,
            table_path: table_path.into(),
        }
    }

    pub fn task_spec(&self) -> Result<TaskSpec> {
        let labels = match (self.task_type, &self.class_labels, &self.quartile_boundaries) {
            (TaskType::Quartile, None, Some(b)) => {
                if b.len() != 3 {
                    return Err(Error::BoundaryCount(b.len()));
                }
                TaskLabels::Quartile(QuartileBoundaries::new(b[0], b[1], b[2])?)
            }
            (TaskType::Quartile, _, None) => return Err(Error::BoundaryCount(0)),
            (_, Some(l), None) => TaskLabels::Classes(l.clone()),
            (_, Some(_), Some(_)) => {
                return Err(Error::LabelSet("both class_labels and quartile_boundaries given".into()))
            }
            (t, None, _) => return Err(Error::LabelSet(format!("{t} task needs class_labels"))),
        };
        TaskSpec::new(self.id.clone(), self.task_type, self.target_column.clone(), labels)
    }

    /// Table path resolved against the manifest's directory.
    pub fn resolve_table(&self, manifest_path: &Path) -> PathBuf {
        let p = Path::new(&self.table_path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            manifest_path.parent().unwrap_or(Path::new(".")).join(p)
        }
    }
}

/// Loads a manifest and its table, validating both.
pub fn load_dataset(manifest_path: &Path) -> Result<(Dataset, TaskSpec)> {
    let manifest = Manifest::read(manifest_path)?;
    let task = manifest.task_spec().map_err(|e| match e {
        Error::BoundaryCount(_) | Error::BoundaryOrder | Error::LabelSet(_) => e,
        other => Error::Manifest { path: manifest_path.to_path_buf(), reason: other.to_string() },
    })?;
    let table = manifest.resolve_table(manifest_path);
    if !table.exists() {
        return Err(Error::Io {
            path: table,
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "table file not found"),
        });
    }
    let dataset = read_table(&table, manifest.id.clone())?;
    task.validate_against(&dataset)?;
    Ok((dataset, task))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Predicted {
    Label(String),
    /// Output that does not resolve to any admissible label. Keeps the raw text.
    Invalid(String),
}

impl Predicted {
    pub fn label(&self) -> Option<&str> {
        match self {
            Predicted::Label(l) => Some(l),
            Predicted::Invalid(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub row_id: u64,
    pub true_label: String,
    pub predicted: Predicted,
}

/// Predictions of one model on one dataset, joined to the truth.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub dataset_id: String,
    pub model_id: String,
    pub records: Vec<PredictionRecord>,
}

impl PredictionSet {
    pub fn new(dataset_id: impl Into<String>, model_id: impl Into<String>, records: Vec<PredictionRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.row_id) {
                return Err(Error::DuplicateRowId(r.row_id));
            }
        }
        Ok(PredictionSet { dataset_id: dataset_id.into(), model_id: model_id.into(), records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn truth(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.true_label.as_str()).collect()
    }

    pub fn predictions(&self) -> Vec<Option<&str>> {
        self.records.iter().map(|r| r.predicted.label()).collect()
    }
}

fn label_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

/// Reads a JSON Lines prediction file for one dataset and one model.
///
/// Predicted labels pass through [`extract_prediction`]; anything that does
/// not resolve to a label is kept as [`Predicted::Invalid`].
pub fn load_predictions(path: &Path, task: &TaskSpec, opts: &ExtractOptions) -> Result<PredictionSet> {
    let file = File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let labels = task.label_set();
    let mut model_id: Option<String> = None;
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| Error::PredictionRecord { line: line_no, reason };
        let obj: serde_json::Map<String, Value> = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let field = |name: &str| obj.get(name).ok_or_else(|| bad(format!("missing field `{name}`")));

        let dataset_id = field("dataset_id")?.as_str().ok_or_else(|| bad("dataset_id must be a string".into()))?;
        if dataset_id != task.dataset_id {
            return Err(bad(format!("dataset_id `{dataset_id}` does not match task `{}`", task.dataset_id)));
        }
        let this_model = field("model_id")?.as_str().ok_or_else(|| bad("model_id must be a string".into()))?;
        match &model_id {
            None => model_id = Some(this_model.to_string()),
            Some(m) if m != this_model => {
                return Err(bad(format!("mixed model ids `{m}` and `{this_model}` in one file")))
            }
            _ => {}
        }
        let row_id = field("row_id")?.as_u64().ok_or_else(|| bad("row_id must be a non-negative integer".into()))?;
        if !seen.insert(row_id) {
            return Err(Error::DuplicateRowId(row_id));
        }
        let true_label = label_text(field("true_label")?).ok_or_else(|| bad("true_label must be a scalar".into()))?;
        if !labels.contains(&true_label) {
            return Err(Error::UnknownLabel { label: true_label, context: format!("line {line_no}") });
        }
        let predicted = match field("predicted_label")? {
            Value::Null => Predicted::Invalid(String::new()),
            v => {
                let raw = label_text(v).unwrap_or_else(|| v.to_string());
                match extract_prediction(&raw, &labels, opts) {
                    Some(l) => Predicted::Label(l),
                    None => Predicted::Invalid(raw),
                }
            }
        };
        records.push(PredictionRecord { row_id, true_label, predicted });
    }
    PredictionSet::new(task.dataset_id.clone(), model_id.unwrap_or_default(), records)
}

/// Writes predictions in the JSON Lines schema read by [`load_predictions`].
pub fn write_predictions(path: &Path, preds: &PredictionSet) -> Result<()> {
    let mut out = String::new();
    for r in &preds.records {
        let predicted = match &r.predicted {
            Predicted::Label(l) => Value::String(l.clone()),
            Predicted::Invalid(raw) => Value::String(raw.clone()),
        };
        let obj = serde_json::json!({
            "dataset_id": preds.dataset_id,
            "row_id": r.row_id,
            "true_label": r.true_label,
            "predicted_label": predicted,
            "model_id": preds.model_id,
        });
        out.push_str(&obj.to_string());
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Count of each label.
pub fn class_distribution<L: Ord + Clone>(labels: &[L]) -> Result<BTreeMap<L, usize>> {
    if labels.is_empty() {
        return Err(Error::Empty("class distribution of no labels"));
    }
    let mut counts = BTreeMap::new();
    for l in labels {
        *counts.entry(l.clone()).or_insert(0) += 1;
    }
    Ok(counts)
}

/// Same as [`class_distribution`] for labels that are only hashable.
pub(crate) fn counts_by<L: Eq + Hash>(labels: impl IntoIterator<Item = L>) -> std::collections::HashMap<L, usize> {
    let mut counts = std::collections::HashMap::new();
    for l in labels {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    counts
}
