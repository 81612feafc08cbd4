//! Command-line front end: audit reports, contamination scans, quartile task
//! generation, prompt serialization and the synthetic testbed.
//!
//! Exit codes: 0 success, 1 usage, 2 invalid input, 3 undefined
//! computation, 4 corpus coverage below the configured floor.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use config::{Settings, SettingsArgs, OUT_DIR_ENV};
pub use error::{CliError, Result};
pub use report::{AuditReport, TOOLKIT_VERSION};
