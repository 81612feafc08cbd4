//! Prompt construction in the special-token ("tabula") and instruction
//! ("alpaca") styles, and extraction of a class from a model completion.
//!
//! Both styles share the same question block:
//!
//! ```text
//! Predict the value of {target}: ||L1||L2||...|| The {col} is {val}. ... What is the value of {target}? ||L1||L2||...||
//! ```
//!
//! The tabula style frames it with `<|endinput|>` / `<|endcompletion|>`; the
//! alpaca style wraps the same blocks in an instruction/input/response frame.

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Cell, TaskSpec};
use crate::error::{Error, Result};

pub const BEGIN_OF_TEXT: &str = "<|begin_of_text|>";
pub const END_INPUT: &str = "<|endinput|>";
pub const END_COMPLETION: &str = "<|endcompletion|>";

/// Generation stops at the first of these.
pub const STOP_TOKENS: &[&str] = &[END_COMPLETION, "<|end_of_text|>", "<|eot_id|>", END_INPUT];

pub const ALPACA_PREAMBLE: &str =
    "Below is an instruction that describes a task. Write a response that appropriately completes the request.";
pub const ALPACA_INSTRUCTION: &str = "Predict the correct value based on the input.";

/// Shots used by the evaluation prompts unless overridden.
pub const DEFAULT_SHOTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptStyle {
    Tabula,
    Alpaca,
}

impl std::str::FromStr for PromptStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tabula" => Ok(PromptStyle::Tabula),
            "alpaca" => Ok(PromptStyle::Alpaca),
            other => Err(Error::InvalidArgument(format!("unknown prompt style `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PromptTemplate<'a> {
    pub style: PromptStyle,
    pub shots: usize,
    pub task: &'a TaskSpec,
}

impl<'a> PromptTemplate<'a> {
    pub fn new(style: PromptStyle, task: &'a TaskSpec) -> Self {
        PromptTemplate { style, shots: DEFAULT_SHOTS, task }
    }

    pub fn with_shots(mut self, shots: usize) -> Self {
        self.shots = shots;
        self
    }
}

/// A labeled example row.
#[derive(Debug, Clone, Copy)]
pub struct Shot<'a> {
    pub row: &'a [Cell],
    pub label: &'a str,
}

fn label_list(labels: &[String]) -> String {
    let mut s = String::from("||");
    for l in labels {
        s.push_str(l);
        s.push_str("||");
    }
    s
}

/// `The {col} is {val}.` for every non-target column in column order.
/// Missing cells produce no statement.
pub fn value_statements(task: &TaskSpec, columns: &[String], row: &[Cell]) -> Result<Vec<String>> {
    if row.len() != columns.len() {
        return Err(Error::InvalidArgument(format!(
            "row has {} cells but the table has {} columns",
            row.len(),
            columns.len()
        )));
    }
    if !columns.iter().any(|c| c == &task.target_column) {
        return Err(Error::MissingColumn(task.target_column.clone()));
    }
    Ok(columns
        .iter()
        .zip(row)
        .filter(|(c, _)| **c != task.target_column)
        .filter_map(|(c, cell)| cell.raw().map(|v| format!("The {c} is {v}.")))
        .collect())
}

fn question_block(task: &TaskSpec, labels: &str, columns: &[String], row: &[Cell]) -> Result<String> {
    let target = &task.target_column;
    let mut s = format!("Predict the value of {target}: {labels}");
    for stmt in value_statements(task, columns, row)? {
        s.push(' ');
        s.push_str(&stmt);
    }
    write!(s, " What is the value of {target}? {labels}").expect("write to String");
    Ok(s)
}

/// Builds the prompt for `row`, preceded by `few_shots`. Byte-deterministic.
pub fn serialize_row(
    style: PromptStyle,
    task: &TaskSpec,
    columns: &[String],
    row: &[Cell],
    few_shots: &[Shot<'_>],
) -> Result<String> {
    let label_set = task.label_set();
    let labels = label_list(&label_set);
    for shot in few_shots {
        if !label_set.iter().any(|l| l == shot.label) {
            return Err(Error::UnknownLabel { label: shot.label.to_string(), context: "few-shot example".into() });
        }
    }
    let query = question_block(task, &labels, columns, row)?;
    let mut out = String::new();
    match style {
        PromptStyle::Tabula => {
            out.push_str(BEGIN_OF_TEXT);
            for shot in few_shots {
                out.push_str(&question_block(task, &labels, columns, shot.row)?);
                out.push_str(END_INPUT);
                out.push_str(shot.label);
                out.push_str(END_COMPLETION);
            }
            out.push_str(&query);
            out.push_str(END_INPUT);
        }
        PromptStyle::Alpaca => {
            write!(out, "{ALPACA_PREAMBLE}\n\n### Instruction:\n{ALPACA_INSTRUCTION}\n\n### Input:\n\n").expect("write");
            for (k, shot) in few_shots.iter().enumerate() {
                let block = question_block(task, &labels, columns, shot.row)?;
                write!(out, "Example {}:\n{block}\nResponse: {}\n\n", k + 1, shot.label).expect("write");
            }
            write!(out, "Now complete the following:\n{query}\n\n### Response:\n").expect("write");
        }
    }
    Ok(out)
}

/// Picks `shots` distinct rows other than `query` from `n_rows`, seeded by
/// `(seed, query)` so each query's shots are stable across runs.
pub fn select_shots(n_rows: usize, query: usize, shots: usize, seed: u64) -> Result<Vec<usize>> {
    let pool = n_rows.saturating_sub(1);
    if shots > pool {
        return Err(Error::InvalidArgument(format!("{shots} shots requested but only {pool} other rows")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (query as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut picked: Vec<usize> = sample(&mut rng, pool, shots)
        .into_iter()
        .map(|i| if i >= query { i + 1 } else { i })
        .collect();
    picked.sort_unstable();
    Ok(picked)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractOptions {
    pub case_insensitive: bool,
}

/// Maps a completion to a class label.
///
/// The completion is cut at the first stop token and trimmed. An exact match
/// wins; otherwise the longest label occurring as a substring; otherwise `None`.
pub fn extract_prediction(completion: &str, class_labels: &[String], opts: &ExtractOptions) -> Option<String> {
    let mut text = completion;
    for stop in STOP_TOKENS {
        if let Some(i) = text.find(stop) {
            text = &text[..i];
        }
    }
    let text = text.trim();
    let fold = |s: &str| if opts.case_insensitive { s.to_lowercase() } else { s.to_string() };
    let folded = fold(text);
    if let Some(l) = class_labels.iter().find(|l| fold(l.trim()) == folded) {
        return Some(l.clone());
    }
    let mut by_len: Vec<&String> = class_labels.iter().filter(|l| !l.trim().is_empty()).collect();
    // stable: equal-length labels keep their declared order
    by_len.sort_by_key(|l| std::cmp::Reverse(l.trim().chars().count()));
    by_len.into_iter().find(|l| folded.contains(&fold(l.trim()))).cloned()
}
