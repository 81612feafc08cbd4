//! One function per subcommand. Each writes its files under the output
//! directory and returns what it wrote so callers and tests can inspect it.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tabaudit_contam::scan::{scan_dataset, strategy_counts};
use tabaudit_contam::testbed::{
    generate_corpus, labor_force_fixture, ledger_path, plant_association, plant_complete_overlap,
    plant_direct_duplicates, scanner_prf, weekday_fixture, weekday_pairs, CorpusParams, PlantKind, PlantLedger, Prf,
};
use tabaudit_contam::{build_index, CorpusIndex, EvidenceSummary, MatchEvidence, Strategy};
use tabaudit_core::data::{load_dataset, load_predictions, Manifest};
use tabaudit_core::metrics::{audit_dataset, recovery};
use tabaudit_core::serialize::{select_shots, serialize_row, Shot};
use tabaudit_core::stratify::{
    flag_imbalance_riders, flag_negative_kappa, lifts_by_task, one_way_anova, pairwise_t, partition_gap,
    summarize_by_task,
};
use tabaudit_core::taskgen::{quartile_task, shortcut_audit, ShortcutReport};
use tabaudit_core::{AuditMetrics, Dataset, TaskLabels, TaskSpec, TaskType};

use crate::config::Settings;
use crate::error::{CliError, Result};
use crate::report::{
    fixed, render_coverage, render_markdown, render_verdicts, write_plot_csv, Aggregate, AuditReport,
    ContaminationSection, CoverageStats, DatasetEntry, ModelComparison, PairwiseTest, PartitionGap, TASK_ORDER,
    TOOLKIT_VERSION,
};

/// Settings as echoed in reports: paths that only locate inputs or outputs
/// are dropped.
fn echo(settings: &Settings) -> Settings {
    Settings { out_dir: None, partition: None, ..settings.clone() }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(CliError::io(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, &(serde_json::to_string_pretty(value).expect("serializable") + "\n"))
}

/// File-system safe stem for a dataset id.
pub fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect()
}

/// Files as given; directories expand to their files with `ext`, sorted.
pub fn expand(paths: &[PathBuf], ext: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(CliError::io(p))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.extension().is_some_and(|x| x == ext))
                .collect();
            found.sort();
            out.extend(found);
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            return Err(CliError::Input(format!("{}: no such file or directory", p.display())));
        }
    }
    if out.is_empty() {
        return Err(CliError::Input(format!("no .{ext} files in {paths:?}")));
    }
    Ok(out)
}

fn read_manifests(paths: &[PathBuf]) -> Result<BTreeMap<String, (PathBuf, Manifest)>> {
    let mut out: BTreeMap<String, (PathBuf, Manifest)> = BTreeMap::new();
    for p in expand(paths, "json")? {
        let m = Manifest::read(&p)?;
        if let Some((prev, _)) = out.get(&m.id) {
            return Err(CliError::Input(format!(
                "dataset `{}` declared by both {} and {}",
                m.id,
                prev.display(),
                p.display()
            )));
        }
        out.insert(m.id.clone(), (p, m));
    }
    Ok(out)
}

fn peek_dataset_id(path: &Path) -> Result<String> {
    let file = fs::File::open(path).map_err(CliError::io(path))?;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(CliError::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        return v
            .get("dataset_id")
            .and_then(|d| d.as_str())
            .map(str::to_string)
            .ok_or_else(|| CliError::Input(format!("{}: first record has no dataset_id", path.display())));
    }
    Err(CliError::Input(format!("{}: no prediction records", path.display())))
}

/// Metrics for every prediction file, sorted by dataset then model.
pub fn audit_predictions(
    settings: &Settings,
    manifests: &BTreeMap<String, (PathBuf, Manifest)>,
    prediction_files: &[PathBuf],
) -> Result<Vec<AuditMetrics>> {
    let extract = settings.extract();
    let mut metrics: Vec<AuditMetrics> = prediction_files
        .par_iter()
        .map(|p| {
            let id = peek_dataset_id(p)?;
            let (_, manifest) = manifests
                .get(&id)
                .ok_or_else(|| CliError::Input(format!("{}: no manifest for dataset `{id}`", p.display())))?;
            let task = manifest.task_spec()?;
            let preds = load_predictions(p, &task, &extract)
                .map_err(|e| CliError::from(e).context(&p.display().to_string()))?;
            audit_dataset::<f64>(&preds).map_err(|e| CliError::from(e).context(&id))
        })
        .collect::<Result<_>>()?;
    metrics.sort_by(|a, b| (&a.dataset_id, &a.model_id).cmp(&(&b.dataset_id, &b.model_id)));
    if let Some(w) = metrics.windows(2).find(|w| w[0].dataset_id == w[1].dataset_id && w[0].model_id == w[1].model_id) {
        return Err(CliError::Input(format!(
            "two prediction files for dataset `{}` and model `{}`",
            w[0].dataset_id, w[0].model_id
        )));
    }
    Ok(metrics)
}

impl CliError {
    fn context(self, what: &str) -> CliError {
        match self {
            CliError::Input(m) => CliError::Input(format!("{what}: {m}")),
            CliError::Computation(m) => CliError::Computation(format!("{what}: {m}")),
            other => other,
        }
    }
}

fn stat<T>(settings: &Settings, notes: &mut Vec<String>, what: &str, r: tabaudit_core::Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if settings.strict_stats => Err(CliError::from(e).context(what)),
        Err(e) => {
            warn!("{what}: {e}");
            notes.push(format!("{what} not computed: {e}"));
            Ok(None)
        }
    }
}

fn model_comparison(
    reference: &str,
    metrics: &[AuditMetrics],
    tasks: &HashMap<String, TaskType>,
) -> Result<Vec<ModelComparison>> {
    let classification = |m: &&AuditMetrics| matches!(tasks.get(&m.dataset_id), Some(TaskType::Binary | TaskType::Categorical));
    let mut by_model: BTreeMap<&str, Vec<&AuditMetrics>> = BTreeMap::new();
    for m in metrics.iter().filter(classification) {
        by_model.entry(m.model_id.as_str()).or_default().push(m);
    }
    let ids = |v: &[&AuditMetrics]| v.iter().map(|m| m.dataset_id.clone()).collect::<HashSet<_>>();
    let ref_rows = by_model
        .get(reference)
        .ok_or_else(|| CliError::Input(format!("reference model `{reference}` has no binary or categorical predictions")))?;
    let ref_ids = ids(ref_rows);
    let ref_acc = Aggregate::of(ref_rows).expect("non-empty").accuracy;
    let mut out = Vec::new();
    for (model, rows) in &by_model {
        if ids(rows) != ref_ids {
            return Err(CliError::Input(format!(
                "model `{model}` and reference `{reference}` cover different binary/categorical datasets"
            )));
        }
        let a = Aggregate::of(rows).expect("non-empty");
        out.push(ModelComparison {
            model_id: model.to_string(),
            n: a.n,
            accuracy: a.accuracy,
            lift: a.lift,
            recovery: if *model == reference { None } else { Some(recovery(a.accuracy, ref_acc)?) },
            pct_at_or_below_baseline: a.pct_at_or_below_baseline,
        });
    }
    out.sort_by(|a, b| a.accuracy.total_cmp(&b.accuracy).then_with(|| a.model_id.cmp(&b.model_id)));
    Ok(out)
}

fn gap_section(settings: &Settings, metrics: &[AuditMetrics]) -> Result<Option<PartitionGap>> {
    let (Some(a), Some(b)) = (&settings.gap_model_a, &settings.gap_model_b) else {
        if settings.gap_model_a.is_some() || settings.gap_model_b.is_some() {
            return Err(CliError::Usage("the gap table needs both --gap-model-a and --gap-model-b".into()));
        }
        return Ok(None);
    };
    let path = settings
        .partition
        .as_ref()
        .ok_or_else(|| CliError::Usage("the gap table needs --partition".into()))?;
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let partition: BTreeMap<String, String> =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let pick = |model: &str| -> Vec<AuditMetrics> {
        metrics.iter().filter(|m| m.model_id == model && partition.contains_key(&m.dataset_id)).cloned().collect()
    };
    let map: HashMap<String, String> = partition.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    let rows = partition_gap(&pick(a), &pick(b), &map)?;
    Ok(Some(PartitionGap { model_a: a.clone(), model_b: b.clone(), partition, rows }))
}

/// Metrics, stratification and flags over already-audited datasets.
pub fn build_audit_report(
    settings: &Settings,
    tasks: &HashMap<String, TaskType>,
    metrics: Vec<AuditMetrics>,
) -> Result<AuditReport> {
    let models: Vec<&str> = {
        let mut m: Vec<&str> = metrics.iter().map(|m| m.model_id.as_str()).collect();
        m.sort_unstable();
        m.dedup();
        m
    };
    let primary_model = match &settings.model {
        Some(m) if models.contains(&m.as_str()) => m.clone(),
        Some(m) => return Err(CliError::Input(format!("no predictions for model `{m}` (have {models:?})"))),
        None if models.len() == 1 => models[0].to_string(),
        None if models.is_empty() => return Err(CliError::Input("no predictions".into())),
        None => return Err(CliError::Usage(format!("several models {models:?}; choose one with --model"))),
    };
    let primary: Vec<AuditMetrics> = metrics.iter().filter(|m| m.model_id == primary_model).cloned().collect();
    let mut notes = Vec::new();

    let task_summaries = summarize_by_task(&primary, tasks)?;
    let lifts = lifts_by_task(&primary, tasks)?;
    let groups: Vec<&Vec<f64>> = TASK_ORDER.iter().filter_map(|t| lifts.get(t)).collect();
    let anova = if groups.len() >= 2 {
        stat(settings, &mut notes, "one-way ANOVA", one_way_anova::<f64, _>(&groups))?
    } else {
        None
    };
    let mut pairwise = Vec::new();
    for (a, b) in [
        (TaskType::Quartile, TaskType::Binary),
        (TaskType::Quartile, TaskType::Categorical),
        (TaskType::Categorical, TaskType::Binary),
    ] {
        if let (Some(la), Some(lb)) = (lifts.get(&a), lifts.get(&b)) {
            if let Some(result) = stat(settings, &mut notes, &format!("{a} vs {b} t-test"), pairwise_t(la, lb))? {
                pairwise.push(PairwiseTest { group_a: a, group_b: b, result });
            }
        }
    }

    let model_comparison = match &settings.reference_model {
        Some(r) => model_comparison(r, &metrics, tasks)?,
        None => Vec::new(),
    };
    let partition_gap = gap_section(settings, &metrics)?;

    let mut datasets: Vec<DatasetEntry> = primary
        .iter()
        .map(|m| DatasetEntry { id: m.dataset_id.clone(), task_type: tasks[&m.dataset_id] })
        .collect();
    datasets.sort_by(|a, b| a.id.cmp(&b.id));
    let refs: Vec<&AuditMetrics> = primary.iter().collect();
    Ok(AuditReport {
        toolkit_version: TOOLKIT_VERSION.to_string(),
        timestamp: now(),
        config: echo(settings),
        primary_model,
        datasets,
        aggregate: Aggregate::of(&refs),
        task_summaries,
        anova,
        pairwise,
        stat_notes: notes,
        imbalance_riders: flag_imbalance_riders(&primary, settings.riders()),
        negative_kappa: flag_negative_kappa(&primary),
        model_comparison,
        partition_gap,
        contamination: None,
        metrics,
    })
}

#[derive(Debug, Clone)]
pub struct AuditOutput {
    pub report: AuditReport,
    pub json: PathBuf,
    pub markdown: PathBuf,
    pub plot_csv: PathBuf,
}

pub fn cmd_audit(settings: &Settings, manifests: &[PathBuf], predictions: &[PathBuf]) -> Result<AuditOutput> {
    let manifests = read_manifests(manifests)?;
    let files = expand(predictions, "jsonl")?;
    info!("auditing {} prediction files against {} manifests", files.len(), manifests.len());
    let metrics = audit_predictions(settings, &manifests, &files)?;
    let tasks: HashMap<String, TaskType> = manifests.iter().map(|(id, (_, m))| (id.clone(), m.task_type)).collect();
    let report = build_audit_report(settings, &tasks, metrics)?;
    write_audit(settings, report)
}

pub fn write_audit(settings: &Settings, report: AuditReport) -> Result<AuditOutput> {
    let dir = settings.resolve_out_dir();
    create_dir(&dir)?;
    let json = dir.join("report.json");
    let markdown = dir.join("report.md");
    let plot_csv = dir.join("plot_data.csv");
    report.save(&json)?;
    write_file(&markdown, &render_markdown(&report))?;
    write_plot_csv(&report, &plot_csv)?;
    Ok(AuditOutput { report, json, markdown, plot_csv })
}

pub fn cmd_report_render(settings: &Settings, report: &Path) -> Result<PathBuf> {
    let r = AuditReport::load(report)?;
    let dir = settings.resolve_out_dir();
    create_dir(&dir)?;
    let out = dir.join("report.md");
    write_file(&out, &render_markdown(&r))?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSummary {
    pub path: PathBuf,
    pub corpus_id: String,
    pub total_rows: u64,
    pub files_present: u64,
    pub files_indexed: u64,
    pub coverage: f64,
    pub sharded: bool,
    pub stats: tabaudit_contam::index::BuildStats,
}

fn coverage_stats(index: &CorpusIndex, floor: f64) -> CoverageStats {
    CoverageStats {
        corpus_id: index.corpus_id().to_string(),
        total_rows: index.total_rows(),
        files_present: index.files_present(),
        files_indexed: index.files_indexed(),
        coverage: index.coverage(),
        coverage_floor: floor,
        skipped: index.skipped().to_vec(),
    }
}

fn check_coverage(c: &CoverageStats) -> Result<()> {
    if c.coverage < c.coverage_floor {
        return Err(CliError::PartialCoverage { coverage: c.coverage, floor: c.coverage_floor });
    }
    Ok(())
}

fn open_corpus(settings: &Settings, corpus: &Path) -> Result<CorpusIndex> {
    if !corpus.is_dir() {
        return Err(CliError::Input(format!("{}: not a directory", corpus.display())));
    }
    let t = std::time::Instant::now();
    let index = build_index(corpus, &settings.index_config()?)?;
    info!(
        "indexed {} rows from {}/{} files in {:.1?} (sharded: {})",
        index.total_rows(),
        index.files_indexed(),
        index.files_present(),
        t.elapsed(),
        index.is_sharded()
    );
    Ok(index)
}

/// Builds an index and saves it. Exits 4 after saving if coverage is below the floor.
pub fn cmd_index(settings: &Settings, corpus: &Path, output: Option<&Path>) -> Result<IndexSummary> {
    let index = open_corpus(settings, corpus)?;
    let path = match output {
        Some(p) => p.to_path_buf(),
        None => {
            let dir = settings.resolve_out_dir();
            create_dir(&dir)?;
            dir.join("index.tabaudix")
        }
    };
    index.save(&path)?;
    let summary = IndexSummary {
        path,
        corpus_id: index.corpus_id().to_string(),
        total_rows: index.total_rows(),
        files_present: index.files_present(),
        files_indexed: index.files_indexed(),
        coverage: index.coverage(),
        sharded: index.is_sharded(),
        stats: index.stats().clone(),
    };
    check_coverage(&coverage_stats(&index, settings.coverage_floor))?;
    Ok(summary)
}

pub enum CorpusSource<'a> {
    Index { path: &'a Path, root: Option<&'a Path> },
    Corpus(&'a Path),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetScanSummary {
    pub dataset_id: String,
    pub evidence_file: String,
    pub evidence_count: usize,
    pub strategy_counts: BTreeMap<Strategy, usize>,
    pub summary: EvidenceSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub toolkit_version: String,
    pub timestamp: String,
    pub config: Settings,
    pub coverage: CoverageStats,
    pub datasets: Vec<DatasetScanSummary>,
    pub verdicts: Vec<tabaudit_contam::ContaminationVerdict>,
}

/// Scans every manifest's dataset, writing evidence JSON Lines per dataset,
/// `verdicts.json` and `verdicts.md`. With `report`, the verdicts and
/// coverage are also merged into that audit report. Low coverage is an
/// error only after everything is written.
pub fn cmd_scan(
    settings: &Settings,
    source: CorpusSource<'_>,
    manifests: &[PathBuf],
    report: Option<&Path>,
) -> Result<ScanReport> {
    let opts = settings.scan_options()?;
    let index = match source {
        CorpusSource::Corpus(dir) => open_corpus(settings, dir)?,
        CorpusSource::Index { path, root } => {
            let ix = CorpusIndex::open(path)?;
            match root {
                Some(r) => ix.with_root(r),
                None => ix,
            }
        }
    };
    let manifests = read_manifests(manifests)?;
    let dir = settings.resolve_out_dir();
    let ev_dir = dir.join("evidence");
    create_dir(&ev_dir)?;

    let mut datasets = Vec::new();
    let mut verdicts = Vec::new();
    for (id, (path, _)) in &manifests {
        let (ds, task) = load_dataset(path)?;
        let t = std::time::Instant::now();
        let scan = scan_dataset(&index, &ds, &task, &opts)?;
        info!("{id}: {} ({} evidence records, {:.1?})", scan.verdict.category, scan.evidence.len(), t.elapsed());
        let name = format!("{}.jsonl", file_stem(id));
        write_evidence(&ev_dir.join(&name), &scan.evidence)?;
        datasets.push(DatasetScanSummary {
            dataset_id: id.clone(),
            evidence_file: format!("evidence/{name}"),
            evidence_count: scan.evidence.len(),
            strategy_counts: strategy_counts(&scan.evidence),
            summary: scan.summary,
        });
        verdicts.push(scan.verdict);
    }

    let coverage = coverage_stats(&index, settings.coverage_floor);
    let out = ScanReport {
        toolkit_version: TOOLKIT_VERSION.to_string(),
        timestamp: now(),
        config: echo(settings),
        coverage: coverage.clone(),
        datasets,
        verdicts: verdicts.clone(),
    };
    write_json(&dir.join("verdicts.json"), &out)?;
    let mut md = String::from("# Contamination scan\n\n");
    render_coverage(&mut md, &coverage);
    render_verdicts(&mut md, &verdicts);
    write_file(&dir.join("verdicts.md"), &md)?;

    if let Some(path) = report {
        let mut r = AuditReport::load(path)?;
        r.contamination = Some(ContaminationSection { coverage: coverage.clone(), verdicts });
        r.save(path)?;
        write_file(&path.with_extension("md"), &render_markdown(&r))?;
    }
    check_coverage(&coverage)?;
    Ok(out)
}

pub fn write_evidence(path: &Path, evidence: &[MatchEvidence]) -> Result<()> {
    let mut text = String::new();
    for e in evidence {
        text.push_str(&serde_json::to_string(e).expect("evidence serializes"));
        text.push('\n');
    }
    write_file(path, &text)
}

pub fn read_evidence(paths: &[PathBuf]) -> Result<Vec<MatchEvidence>> {
    let mut out = Vec::new();
    for p in expand(paths, "jsonl")? {
        let text = fs::read_to_string(&p).map_err(CliError::io(&p))?;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            out.push(
                serde_json::from_str(line)
                    .map_err(|e| CliError::Input(format!("{} line {}: {e}", p.display(), i + 1)))?,
            );
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuartileOutput {
    pub manifest: PathBuf,
    pub shortcuts: ShortcutReport,
}

/// Quartile task manifests plus numeric-shortcut reports. `column` overrides
/// each manifest's target column.
pub fn cmd_gen_quartile(settings: &Settings, manifests: &[PathBuf], column: Option<&str>) -> Result<Vec<QuartileOutput>> {
    let manifests = read_manifests(manifests)?;
    let dir = settings.resolve_out_dir().join("quartile");
    create_dir(&dir)?;
    let mut out = Vec::new();
    let mut md = String::from("# Numeric shortcuts\n\n| Dataset | Feature | Single-feature bin accuracy | Flagged |\n|---|---|---|---|\n");
    for (id, (path, manifest)) in &manifests {
        let (ds, _) = load_dataset(path)?;
        let col = column.unwrap_or(&manifest.target_column);
        let qt = quartile_task(&ds, col).map_err(|e| CliError::from(e).context(id))?;
        let report = shortcut_audit(&ds, &qt, settings.shortcut_threshold)?;
        let task = TaskSpec::new(id.clone(), TaskType::Quartile, col, TaskLabels::Quartile(qt.boundaries))?;
        let table = manifest.resolve_table(path);
        let table = table.canonicalize().map_err(CliError::io(&table))?;
        let stem = file_stem(id);
        let mpath = dir.join(format!("{stem}.json"));
        Manifest::from_task(&task, table.to_string_lossy()).write(&mpath)?;
        write_json(&dir.join(format!("{stem}.shortcuts.json")), &report)?;
        for f in &report.features {
            writeln!(
                md,
                "| {id} | {} | {} | {} |",
                f.feature,
                fixed(f.single_feature_bin_accuracy, 3, false),
                if f.flagged { "yes" } else { "no" }
            )
            .unwrap();
        }
        for f in report.flagged() {
            warn!("{id}: feature `{}` predicts the target bin {:.3} of the time", f.feature, f.single_feature_bin_accuracy);
        }
        out.push(QuartileOutput { manifest: mpath, shortcuts: report });
    }
    write_file(&dir.join("shortcuts.md"), &md)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub row_id: u64,
    pub prompt: String,
    pub gold_label: String,
}

/// Prompts for every row with a target value. Shots come from the other
/// such rows of the same dataset.
pub fn prompts_for(settings: &Settings, ds: &Dataset, task: &TaskSpec) -> Result<Vec<PromptRecord>> {
    let target = ds.column_index(&task.target_column).ok_or_else(|| CliError::Input(task.target_column.clone()))?;
    let mut pool = Vec::new();
    let mut gold = Vec::new();
    for (i, row) in ds.rows().iter().enumerate() {
        if row[target].is_missing() {
            continue;
        }
        pool.push(i);
        gold.push(task.gold_label(&row[target])?);
    }
    (0..pool.len())
        .into_par_iter()
        .map(|q| {
            let picked = select_shots(pool.len(), q, settings.shots, settings.seed)?;
            let shots: Vec<Shot> = picked.iter().map(|&k| Shot { row: &ds.rows()[pool[k]], label: &gold[k] }).collect();
            let prompt = serialize_row(settings.style, task, ds.columns(), &ds.rows()[pool[q]], &shots)?;
            Ok(PromptRecord { row_id: pool[q] as u64, prompt, gold_label: gold[q].clone() })
        })
        .collect()
}

pub fn cmd_serialize(settings: &Settings, manifests: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let manifests = read_manifests(manifests)?;
    let dir = settings.resolve_out_dir().join("prompts");
    create_dir(&dir)?;
    let style = match settings.style {
        tabaudit_core::serialize::PromptStyle::Tabula => "tabula",
        tabaudit_core::serialize::PromptStyle::Alpaca => "alpaca",
    };
    let mut written = Vec::new();
    for (id, (path, _)) in &manifests {
        let (ds, task) = load_dataset(path)?;
        let mut text = String::new();
        for r in prompts_for(settings, &ds, &task)? {
            text.push_str(&serde_json::to_string(&r).expect("record serializes"));
            text.push('\n');
        }
        let out = dir.join(format!("{}.{style}.jsonl", file_stem(id)));
        write_file(&out, &text)?;
        written.push(out);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestbedOutput {
    pub corpus: PathBuf,
    pub ledger: PathBuf,
    pub fixtures: PathBuf,
    pub corpus_id: String,
    pub rows: u64,
    pub plants: BTreeMap<PlantKind, usize>,
}

fn write_fixture(dir: &Path, ds: &Dataset, task: &TaskSpec) -> Result<()> {
    let table = format!("{}.csv", file_stem(ds.id()));
    ds.write_csv(&dir.join(&table))?;
    Manifest::from_task(task, table).write(&dir.join(format!("{}.json", file_stem(ds.id()))))?;
    Ok(())
}

/// Background corpus under `corpus/`, optionally with one plant of each kind
/// and the matching evaluation fixtures under `fixtures/`. `lf_clean` is
/// never planted.
pub fn cmd_testbed_gen(settings: &Settings, params: &CorpusParams, plants: bool) -> Result<TestbedOutput> {
    let out = settings.resolve_out_dir();
    let corpus = out.join("corpus");
    let fixtures = out.join("fixtures");
    if corpus.exists() {
        return Err(CliError::Input(format!("{} already exists", corpus.display())));
    }
    let seed = settings.seed;
    let summary = generate_corpus(&corpus, params, seed)?;
    let mut ledger = PlantLedger { corpus_id: summary.corpus_id.clone(), seed, plants: Vec::new() };
    if plants {
        create_dir(&fixtures)?;
        let (complete, task) = labor_force_fixture("lf_complete", 200, seed.wrapping_add(1));
        write_fixture(&fixtures, &complete, &task)?;
        ledger.merge(plant_complete_overlap(&corpus, &complete, 1.0, true, seed.wrapping_add(2))?)?;

        let (dup, task) = labor_force_fixture("lf_direct", 100, seed.wrapping_add(3));
        write_fixture(&fixtures, &dup, &task)?;
        let rows: Vec<usize> = (0..dup.row_count()).step_by(10).collect();
        ledger.merge(plant_direct_duplicates(&corpus, &dup, &rows, 4, seed.wrapping_add(4))?)?;

        let start = NaiveDate::from_ymd_opt(2021, 11, 1).expect("valid date");
        let (wk, task) = weekday_fixture("weekday", start, 60);
        write_fixture(&fixtures, &wk, &task)?;
        let pairs = weekday_pairs(&wk);
        ledger.merge(plant_association(&corpus, wk.id(), &pairs[29..30], 12, 2, seed.wrapping_add(5))?)?;

        let (clean, task) = labor_force_fixture("lf_clean", 100, seed.wrapping_add(6));
        write_fixture(&fixtures, &clean, &task)?;
    }
    let lpath = ledger_path(&corpus);
    ledger.save(&lpath)?;
    let mut counts = BTreeMap::new();
    for kind in [PlantKind::Complete, PlantKind::DirectDup, PlantKind::Association] {
        counts.insert(kind, ledger.locations(kind));
    }
    Ok(TestbedOutput { corpus, ledger: lpath, fixtures, corpus_id: summary.corpus_id, rows: summary.rows, plants: counts })
}

pub fn render_prf(prf: &BTreeMap<PlantKind, Prf>) -> String {
    let mut s = String::from("| Plant | Planted | Hits | True hits | Precision | Recall |\n|---|---|---|---|---|---|\n");
    for (kind, p) in prf {
        let precision = p.precision.map_or_else(|| "NA".to_string(), |v| fixed(v, 3, false));
        writeln!(s, "| {} | {} | {} | {} | {} | {} |", kind.as_str(), p.planted, p.hits, p.true_hits, precision, fixed(p.recall, 3, false))
            .unwrap();
    }
    s
}

/// Precision and recall of scan evidence against a plant ledger.
pub fn cmd_testbed_eval(settings: &Settings, ledger: &Path, evidence: &[PathBuf]) -> Result<BTreeMap<PlantKind, Prf>> {
    let ledger = PlantLedger::load(ledger)?;
    let evidence = read_evidence(evidence)?;
    let prf = scanner_prf(&ledger, &evidence)?;
    let dir = settings.resolve_out_dir();
    create_dir(&dir)?;
    write_json(&dir.join("testbed_eval.json"), &prf)?;
    write_file(&dir.join("testbed_eval.md"), &render_prf(&prf))?;
    Ok(prf)
}
