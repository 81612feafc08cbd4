//! Train/test contamination scanning over a corpus of table files.
//!
//! A [`CorpusIndex`] maps normalized cell values to the `(table, row)`
//! locations holding them. Three searches run against it:
//!
//! * [`identifier_search`]: where do distinctive identifiers occur?
//! * [`row_match`]: which corpus rows share most of a test row's values,
//!   regardless of column names and order?
//! * [`association_search`]: how many rows pair a key value with a target
//!   value (date → weekday style task leakage)?
//!
//! [`scan::scan_dataset`] runs all three for a dataset and
//! [`classify_contamination`] turns the evidence into a verdict. The
//! [`testbed`] module plants known contamination in synthetic corpora so the
//! scanner's precision and recall can be measured.

pub mod error;
mod format;
pub mod index;
pub mod normalize;
pub mod scan;
pub mod search;
pub mod testbed;
pub mod verdict;

pub use error::{Error, Result};
pub use index::{build_index, CorpusIndex, IndexConfig, Posting, TableEntry};
pub use normalize::{normalize_cell, NormalizeOptions};
pub use search::{
    association_search, identifier_search, label_exposure, row_match, AssociationResult, Location, MatchEvidence,
    RowMatchParams, Strategy,
};
pub use verdict::{classify_contamination, Category, ContaminationVerdict, EvidenceSummary, VerdictThresholds};
