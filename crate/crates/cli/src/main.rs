use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tabaudit_cli::commands::{self, CorpusSource};
use tabaudit_cli::{CliError, SettingsArgs};
use tabaudit_contam::testbed::CorpusParams;

#[derive(Parser)]
#[command(name = "tabaudit", version, about = "Audit tabular-model benchmark results")]
struct Cli {
    #[command(flatten)]
    settings: SettingsArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Metrics, task-type statistics and flags from prediction dumps.
    Audit {
        /// Manifest files or directories of them.
        #[arg(long, num_args = 1.., required = true)]
        manifests: Vec<PathBuf>,
        /// Prediction JSON Lines files or directories of them.
        #[arg(long, num_args = 1.., required = true)]
        predictions: Vec<PathBuf>,
    },
    /// Search a corpus for the evaluation rows of each manifest.
    Scan {
        #[arg(long, conflicts_with = "corpus", required_unless_present = "corpus")]
        index: Option<PathBuf>,
        /// Corpus directory indexed on the fly.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Corpus location when it moved since the index was built.
        #[arg(long, requires = "index")]
        corpus_root: Option<PathBuf>,
        #[arg(long, num_args = 1.., required = true)]
        manifests: Vec<PathBuf>,
        /// Audit report to merge the verdicts into.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build and save a corpus index.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Quartile task manifests and numeric-shortcut reports.
    GenQuartile {
        #[arg(long, num_args = 1.., required = true)]
        manifests: Vec<PathBuf>,
        /// Numeric column to discretize instead of each manifest's target.
        #[arg(long)]
        column: Option<String>,
    },
    /// Prompt files for external model runners.
    Serialize {
        #[arg(long, num_args = 1.., required = true)]
        manifests: Vec<PathBuf>,
    },
    /// Synthetic corpus with planted contamination.
    Testbed {
        #[command(subcommand)]
        command: TestbedCommand,
    },
    /// Re-render markdown from a report.
    Report {
        #[command(subcommand)]
        command: ReportCommand,
    },
}

#[derive(Subcommand)]
enum TestbedCommand {
    Gen {
        #[arg(long, default_value_t = CorpusParams::default().tables)]
        tables: usize,
        #[arg(long, default_value_t = CorpusParams::default().rows_per_table)]
        rows: usize,
        #[arg(long, default_value_t = CorpusParams::default().columns)]
        columns: usize,
        #[arg(long, default_value_t = CorpusParams::default().tables_per_chunk)]
        tables_per_chunk: usize,
        /// Background corpus only.
        #[arg(long)]
        no_plants: bool,
    },
    Eval {
        #[arg(long)]
        ledger: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        evidence: Vec<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ReportCommand {
    Render {
        #[arg(long)]
        report: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let s = cli.settings.resolve()?;
    match cli.command {
        Command::Audit { manifests, predictions } => {
            let out = commands::cmd_audit(&s, &manifests, &predictions)?;
            println!("{}", out.json.display());
            println!("{}", out.markdown.display());
            println!("{}", out.plot_csv.display());
        }
        Command::Scan { index, corpus, corpus_root, manifests, report } => {
            let source = match (&index, &corpus) {
                (Some(path), _) => CorpusSource::Index { path, root: corpus_root.as_deref() },
                (None, Some(dir)) => CorpusSource::Corpus(dir),
                (None, None) => return Err(CliError::Usage("pass --index or --corpus".into())),
            };
            let out = commands::cmd_scan(&s, source, &manifests, report.as_deref())?;
            for v in &out.verdicts {
                println!("{}\t{}", v.dataset_id, v.category);
            }
        }
        Command::Index { corpus, output } => {
            let summary = commands::cmd_index(&s, &corpus, output.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
        }
        Command::GenQuartile { manifests, column } => {
            for q in commands::cmd_gen_quartile(&s, &manifests, column.as_deref())? {
                let flagged: Vec<&str> = q.shortcuts.flagged().map(|f| f.feature.as_str()).collect();
                println!("{}\tflagged: {}", q.manifest.display(), flagged.join(","));
            }
        }
        Command::Serialize { manifests } => {
            for p in commands::cmd_serialize(&s, &manifests)? {
                println!("{}", p.display());
            }
        }
        Command::Testbed { command: TestbedCommand::Gen { tables, rows, columns, tables_per_chunk, no_plants } } => {
            let params = CorpusParams { tables, rows_per_table: rows, columns, tables_per_chunk };
            let out = commands::cmd_testbed_gen(&s, &params, !no_plants)?;
            println!("{}", serde_json::to_string_pretty(&out).expect("summary serializes"));
        }
        Command::Testbed { command: TestbedCommand::Eval { ledger, evidence } } => {
            let prf = commands::cmd_testbed_eval(&s, &ledger, &evidence)?;
            print!("{}", commands::render_prf(&prf));
        }
        Command::Report { command: ReportCommand::Render { report } } => {
            println!("{}", commands::cmd_report_render(&s, &report)?.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tabaudit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
