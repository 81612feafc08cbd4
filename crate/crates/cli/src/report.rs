//! Audit report: full-precision JSON plus markdown tables and plot data.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tabaudit_contam::index::SkippedFile;
use tabaudit_contam::ContaminationVerdict;
use tabaudit_core::{AuditMetrics, GapRow, StatTestResult, TaskType, TaskTypeSummary};

use crate::config::Settings;
use crate::error::{CliError, Result};

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub id: String,
    pub task_type: TaskType,
}

/// Column means over one model's datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: usize,
    pub accuracy: f64,
    pub majority_baseline: f64,
    pub lift: f64,
    pub kappa: f64,
    pub at_or_below_baseline: usize,
    pub pct_at_or_below_baseline: f64,
}

impl Aggregate {
    pub fn of(metrics: &[&AuditMetrics]) -> Option<Aggregate> {
        if metrics.is_empty() {
            return None;
        }
        let n = metrics.len();
        let mean = |f: fn(&AuditMetrics) -> f64| metrics.iter().map(|m| f(m)).sum::<f64>() / n as f64;
        let below = metrics.iter().filter(|m| m.lift <= 0.0).count();
        Some(Aggregate {
            n,
            accuracy: mean(|m| m.accuracy),
            majority_baseline: mean(|m| m.majority_baseline),
            lift: mean(|m| m.lift),
            kappa: mean(|m| m.kappa),
            at_or_below_baseline: below,
            pct_at_or_below_baseline: 100.0 * below as f64 / n as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub group_a: TaskType,
    pub group_b: TaskType,
    pub result: StatTestResult,
}

/// One model's aggregate over binary and categorical datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub model_id: String,
    pub n: usize,
    pub accuracy: f64,
    pub lift: f64,
    /// Percent of the reference model's accuracy; absent for the reference.
    pub recovery: Option<f64>,
    pub pct_at_or_below_baseline: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionGap {
    pub model_a: String,
    pub model_b: String,
    pub partition: BTreeMap<String, String>,
    pub rows: Vec<GapRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub corpus_id: String,
    pub total_rows: u64,
    pub files_present: u64,
    pub files_indexed: u64,
    pub coverage: f64,
    pub coverage_floor: f64,
    pub skipped: Vec<SkippedFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationSection {
    pub coverage: CoverageStats,
    pub verdicts: Vec<ContaminationVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub toolkit_version: String,
    pub timestamp: String,
    pub config: Settings,
    pub primary_model: String,
    pub datasets: Vec<DatasetEntry>,
    /// Every model on every dataset.
    pub metrics: Vec<AuditMetrics>,
    pub aggregate: Option<Aggregate>,
    pub task_summaries: Vec<TaskTypeSummary>,
    pub anova: Option<StatTestResult>,
    pub pairwise: Vec<PairwiseTest>,
    /// Tests that could not be computed, with the reason.
    pub stat_notes: Vec<String>,
    pub imbalance_riders: Vec<AuditMetrics>,
    pub negative_kappa: Vec<AuditMetrics>,
    pub model_comparison: Vec<ModelComparison>,
    pub partition_gap: Option<PartitionGap>,
    pub contamination: Option<ContaminationSection>,
}

impl AuditReport {
    pub fn task_type_of(&self, dataset_id: &str) -> Option<TaskType> {
        self.datasets.iter().find(|d| d.id == dataset_id).map(|d| d.task_type)
    }

    pub fn primary_metrics(&self) -> impl Iterator<Item = &AuditMetrics> {
        self.metrics.iter().filter(move |m| m.model_id == self.primary_model)
    }

    pub fn load(path: &Path) -> Result<AuditReport> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(path, text + "\n").map_err(CliError::io(path))
    }
}

/// Fixed decimals with negative zero folded to zero, optionally signed.
pub fn fixed(v: f64, decimals: usize, signed: bool) -> String {
    let mut s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s.remove(0);
    }
    if signed && !s.starts_with('-') {
        s.insert(0, '+');
    }
    s
}

/// Percent (or percentage points) of a fraction, one decimal.
fn pct(v: f64, signed: bool) -> String {
    fixed(100.0 * v, 1, signed)
}

fn title_case(t: TaskType) -> &'static str {
    match t {
        TaskType::Binary => "Binary",
        TaskType::Categorical => "Categorical",
        TaskType::Quartile => "Quartile",
    }
}

fn p_value(p: f64) -> String {
    if p == 0.0 {
        "0".into()
    } else {
        format!("{p:.2e}")
    }
}

/// Row in the imbalance-rider layout: `Acc. | Maj. | Lift | κ`.
pub fn metric_cells(m: &AuditMetrics) -> String {
    format!(
        "{} | {} | {} | {}",
        fixed(m.accuracy, 3, false),
        fixed(m.majority_baseline, 3, false),
        fixed(m.lift, 3, true),
        fixed(m.kappa, 3, false)
    )
}

/// Task types in the order the stratified tables list them.
pub const TASK_ORDER: [TaskType; 3] = [TaskType::Quartile, TaskType::Categorical, TaskType::Binary];

pub fn render_markdown(r: &AuditReport) -> String {
    let mut s = String::new();
    let w = &mut s;
    writeln!(w, "# Audit report\n").unwrap();
    writeln!(w, "toolkit {} | run {} | model `{}`\n", r.toolkit_version, r.timestamp, r.primary_model).unwrap();

    writeln!(w, "## Imbalance riders\n").unwrap();
    writeln!(w, "| Dataset | Acc. | Maj. | Lift | κ |\n|---|---|---|---|---|").unwrap();
    for m in &r.imbalance_riders {
        writeln!(w, "| {} | {} |", m.dataset_id, metric_cells(m)).unwrap();
    }
    if let Some(a) = &r.aggregate {
        writeln!(
            w,
            "| Avg. All (N={}) | {} | {} | {} | {} |",
            a.n,
            fixed(a.accuracy, 3, false),
            fixed(a.majority_baseline, 3, false),
            fixed(a.lift, 3, true),
            fixed(a.kappa, 3, false)
        )
        .unwrap();
        writeln!(
            w,
            "\nAt or below the majority baseline: {}/{} ({}%)",
            a.at_or_below_baseline,
            a.n,
            fixed(a.pct_at_or_below_baseline, 1, false)
        )
        .unwrap();
    }

    writeln!(w, "\n## Negative κ\n").unwrap();
    writeln!(w, "| Dataset | Type | Acc. | Maj. | Lift | κ |\n|---|---|---|---|---|---|").unwrap();
    for m in &r.negative_kappa {
        let t = r.task_type_of(&m.dataset_id).map(title_case).unwrap_or("?");
        writeln!(w, "| {} | {} | {} |", m.dataset_id, t, metric_cells(m)).unwrap();
    }

    writeln!(w, "\n## Lift by task type\n").unwrap();
    writeln!(w, "| Task Type | N | Mean Lift | Median Lift | ≤ Maj. Baseline (%) |\n|---|---|---|---|---|").unwrap();
    for t in TASK_ORDER {
        if let Some(x) = r.task_summaries.iter().find(|x| x.task_type == t) {
            writeln!(
                w,
                "| {} | {} | {} | {} | {} |",
                title_case(t),
                x.n_datasets,
                pct(x.mean_lift, true),
                pct(x.median_lift, true),
                fixed(x.pct_at_or_below_baseline, 1, false)
            )
            .unwrap();
        }
    }
    if let Some(a) = &r.anova {
        let df: Vec<String> = a.degrees_of_freedom.iter().map(|d| fixed(*d, 0, false)).collect();
        writeln!(w, "\nOne-way ANOVA: F = {}, p = {} (df {})", fixed(a.statistic, 2, false), p_value(a.p_value), df.join(", "))
            .unwrap();
    }

    if !r.pairwise.is_empty() {
        writeln!(w, "\n## Pairwise t-tests\n").unwrap();
        writeln!(w, "| Comparison | t-statistic | p-value |\n|---|---|---|").unwrap();
        for p in &r.pairwise {
            writeln!(
                w,
                "| {} vs. {} | {} | {} |",
                title_case(p.group_a),
                title_case(p.group_b),
                fixed(p.result.statistic, 2, false),
                p_value(p.result.p_value)
            )
            .unwrap();
        }
    }
    for note in &r.stat_notes {
        writeln!(w, "\nNote: {note}").unwrap();
    }

    if !r.model_comparison.is_empty() {
        writeln!(w, "\n## Models (binary and categorical tasks)\n").unwrap();
        writeln!(w, "| Model | Acc. | Lift | Recovery | ≤ Baseline |\n|---|---|---|---|---|").unwrap();
        for m in &r.model_comparison {
            let rec = m.recovery.map_or_else(|| "NA".to_string(), |v| fixed(v, 1, false));
            writeln!(
                w,
                "| {} | {} | {} | {} | {} |",
                m.model_id,
                pct(m.accuracy, false),
                pct(m.lift, true),
                rec,
                fixed(m.pct_at_or_below_baseline, 1, false)
            )
            .unwrap();
        }
    }

    if let Some(g) = &r.partition_gap {
        writeln!(w, "\n## Lift gap by dataset group\n").unwrap();
        writeln!(w, "| Datasets | N | {} | {} | Gap |\n|---|---|---|---|---|", g.model_a, g.model_b).unwrap();
        for row in &g.rows {
            writeln!(
                w,
                "| {} | {} | {} | {} | {} |",
                row.group,
                row.n,
                pct(row.mean_lift_a, false),
                pct(row.mean_lift_b, false),
                pct(row.gap, false)
            )
            .unwrap();
        }
    }

    if let Some(c) = &r.contamination {
        writeln!(w, "\n## Contamination\n").unwrap();
        render_coverage(w, &c.coverage);
        render_verdicts(w, &c.verdicts);
    }

    writeln!(w, "\n## Configuration\n\n```toml\n{}```", toml::to_string(&r.config).expect("config serializes")).unwrap();
    s
}

pub fn render_coverage(w: &mut String, c: &CoverageStats) {
    writeln!(
        w,
        "Corpus `{}`: {}/{} files indexed (coverage {}, floor {}), {} rows.\n",
        c.corpus_id,
        c.files_indexed,
        c.files_present,
        fixed(c.coverage, 4, false),
        c.coverage_floor,
        c.total_rows
    )
    .unwrap();
}

pub fn render_verdicts(w: &mut String, verdicts: &[ContaminationVerdict]) {
    writeln!(w, "| Dataset | Verdict | Row-match fraction | Association rows | Association tables | Label exposed |").unwrap();
    writeln!(w, "|---|---|---|---|---|---|").unwrap();
    for v in verdicts {
        writeln!(
            w,
            "| {} | {} | {} | {} | {} | {} |",
            v.dataset_id,
            v.category,
            fixed(v.row_match_fraction, 3, false),
            v.association_count,
            v.distinct_association_tables,
            if v.label_exposed { "yes" } else { "no" }
        )
        .unwrap();
    }
}

/// Per-dataset plot data for the primary model.
pub fn write_plot_csv(r: &AuditReport, path: &Path) -> Result<()> {
    let err = |e: csv::Error| CliError::Input(format!("{}: {e}", path.display()));
    let mut out = csv::Writer::from_path(path).map_err(err)?;
    out.write_record(["id", "task_type", "accuracy", "majority", "lift", "kappa"]).map_err(err)?;
    for m in r.primary_metrics() {
        let t = r.task_type_of(&m.dataset_id).map_or("", TaskType::as_str);
        out.write_record([
            m.dataset_id.clone(),
            t.to_string(),
            m.accuracy.to_string(),
            m.majority_baseline.to_string(),
            m.lift.to_string(),
            m.kappa.to_string(),
        ])
        .map_err(err)?;
    }
    out.flush().map_err(CliError::io(path))
}
