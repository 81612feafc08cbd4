//! Flat run configuration. Every key has a matching long flag; flags win
//! over the config file.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use tabaudit_contam::scan::ScanOptions;
use tabaudit_contam::{IndexConfig, NormalizeOptions, RowMatchParams, VerdictThresholds};
use tabaudit_core::serialize::{ExtractOptions, PromptStyle, DEFAULT_SHOTS};
use tabaudit_core::stratify::RiderThresholds;
use tabaudit_core::taskgen::DEFAULT_SHORTCUT_THRESHOLD;

use crate::error::{CliError, Result};

/// Environment variable naming the output directory when no flag or config
/// key sets it.
pub const OUT_DIR_ENV: &str = "TABAUDIT_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Not echoed in reports: output locations do not affect results.
    #[serde(skip_serializing)]
    pub out_dir: Option<PathBuf>,

    pub model: Option<String>,
    pub reference_model: Option<String>,
    pub gap_model_a: Option<String>,
    pub gap_model_b: Option<String>,
    #[serde(skip_serializing)]
    pub partition: Option<PathBuf>,
    pub rider_min_majority: f64,
    pub rider_max_lift: f64,
    pub case_insensitive: bool,
    pub strict_stats: bool,

    pub shortcut_threshold: f64,

    pub style: PromptStyle,
    pub shots: usize,
    pub seed: u64,

    pub min_overlap: f64,
    pub min_distinctive: usize,
    pub selectivity: f64,
    pub selectivity_floor: u64,
    pub complete_min_fraction: f64,
    pub direct_min_fraction: f64,
    pub association_min_tables: usize,
    pub association: bool,
    pub identifier_columns: Vec<String>,
    pub coverage_floor: f64,
    pub memory_cap: Option<usize>,
    pub shards: usize,
    pub patterns: Vec<String>,
    pub fold_dates: bool,
}

impl Default for Settings {
    fn default() -> Self {
        let riders = RiderThresholds::<f64>::default();
        let rm = RowMatchParams::default();
        let th = VerdictThresholds::default();
        let ix = IndexConfig::default();
        Settings {
            out_dir: None,
            model: None,
            reference_model: None,
            gap_model_a: None,
            gap_model_b: None,
            partition: None,
            rider_min_majority: riders.min_majority,
            rider_max_lift: riders.max_lift,
            case_insensitive: false,
            strict_stats: false,
            shortcut_threshold: DEFAULT_SHORTCUT_THRESHOLD,
            style: PromptStyle::Tabula,
            shots: DEFAULT_SHOTS,
            seed: 0,
            min_overlap: rm.min_overlap,
            min_distinctive: rm.min_distinctive,
            selectivity: rm.selectivity,
            selectivity_floor: rm.selectivity_floor,
            complete_min_fraction: th.complete_min_fraction,
            direct_min_fraction: th.direct_min_fraction,
            association_min_tables: th.association_min_tables,
            association: true,
            identifier_columns: Vec::new(),
            coverage_floor: 0.99,
            memory_cap: None,
            shards: ix.shards,
            patterns: ix.patterns,
            fold_dates: false,
        }
    }
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    /// Output directory: flag or config key, then the environment, then
    /// `tabaudit-out` in the working directory.
    pub fn resolve_out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("tabaudit-out"))
    }

    pub fn riders(&self) -> RiderThresholds<f64> {
        RiderThresholds { min_majority: self.rider_min_majority, max_lift: self.rider_max_lift }
    }

    pub fn extract(&self) -> ExtractOptions {
        ExtractOptions { case_insensitive: self.case_insensitive }
    }

    pub fn scan_options(&self) -> Result<ScanOptions> {
        let row_match = RowMatchParams {
            min_overlap: self.min_overlap,
            min_distinctive: self.min_distinctive,
            selectivity: self.selectivity,
            selectivity_floor: self.selectivity_floor,
        };
        row_match.validate()?;
        Ok(ScanOptions {
            row_match,
            thresholds: VerdictThresholds {
                complete_min_fraction: self.complete_min_fraction,
                direct_min_fraction: self.direct_min_fraction,
                association_min_tables: self.association_min_tables,
            },
            identifier_columns: self.identifier_columns.clone(),
            association: self.association,
        })
    }

    pub fn index_config(&self) -> Result<IndexConfig> {
        if self.shards == 0 {
            return Err(CliError::Usage("shards must be at least 1".into()));
        }
        Ok(IndexConfig {
            patterns: self.patterns.clone(),
            normalize: NormalizeOptions { fold_dates: self.fold_dates },
            memory_cap: self.memory_cap,
            shards: self.shards,
            ..Default::default()
        })
    }
}

/// Flags mirroring [`Settings`]. Unset flags leave the config value alone.
#[derive(Debug, Clone, Default, Args)]
pub struct SettingsArgs {
    /// TOML file with any of the keys below (snake_case).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    /// Model whose predictions fill the per-dataset tables.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Model that other models' accuracy is recovered against.
    #[arg(long, global = true)]
    pub reference_model: Option<String>,
    #[arg(long, global = true)]
    pub gap_model_a: Option<String>,
    #[arg(long, global = true)]
    pub gap_model_b: Option<String>,
    /// JSON object mapping dataset id to group name, for the gap table.
    #[arg(long, global = true)]
    pub partition: Option<PathBuf>,
    #[arg(long, global = true)]
    pub rider_min_majority: Option<f64>,
    #[arg(long, global = true)]
    pub rider_max_lift: Option<f64>,
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub case_insensitive: Option<bool>,
    /// Fail (exit 3) when a heterogeneity test is undefined instead of noting it.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub strict_stats: Option<bool>,

    #[arg(long, global = true)]
    pub shortcut_threshold: Option<f64>,

    #[arg(long, global = true)]
    pub style: Option<PromptStyle>,
    #[arg(long, global = true)]
    pub shots: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[arg(long, global = true)]
    pub min_overlap: Option<f64>,
    #[arg(long, global = true)]
    pub min_distinctive: Option<usize>,
    #[arg(long, global = true)]
    pub selectivity: Option<f64>,
    #[arg(long, global = true)]
    pub selectivity_floor: Option<u64>,
    #[arg(long, global = true)]
    pub complete_min_fraction: Option<f64>,
    #[arg(long, global = true)]
    pub direct_min_fraction: Option<f64>,
    #[arg(long, global = true)]
    pub association_min_tables: Option<usize>,
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub association: Option<bool>,
    /// Comma-separated identifier columns.
    #[arg(long, global = true, value_delimiter = ',')]
    pub identifier_columns: Option<Vec<String>>,
    #[arg(long, global = true)]
    pub coverage_floor: Option<f64>,
    /// Estimated bytes of in-memory postings before spilling to disk shards.
    #[arg(long, global = true)]
    pub memory_cap: Option<usize>,
    #[arg(long, global = true)]
    pub shards: Option<usize>,
    /// Comma-separated file globs.
    #[arg(long, global = true, value_delimiter = ',')]
    pub patterns: Option<Vec<String>>,
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub fold_dates: Option<bool>,
}

impl SettingsArgs {
    /// Config file (or defaults) with every given flag applied on top.
    pub fn resolve(&self) -> Result<Settings> {
        let mut s = match &self.config {
            Some(p) => Settings::from_file(p)?,
            None => Settings::default(),
        };
        macro_rules! over {
            ($($f:ident),*) => { $( if let Some(v) = &self.$f { s.$f = v.clone().into(); } )* };
        }
        over!(out_dir, model, reference_model, gap_model_a, gap_model_b, partition);
        over!(rider_min_majority, rider_max_lift, case_insensitive, strict_stats, shortcut_threshold);
        over!(style, shots, seed, min_overlap, min_distinctive, selectivity, selectivity_floor);
        over!(complete_min_fraction, direct_min_fraction, association_min_tables, association);
        over!(identifier_columns, coverage_floor, memory_cap, shards, patterns, fold_dates);
        Ok(s)
    }
}
