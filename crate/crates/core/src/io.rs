//! Tab-separated pair files: candidates, ground truth, training labels,
//! decisions and the review queue. No header rows; blank lines and lines
//! starting with `#` are skipped on read.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{canonicalize_pair, EntityPair, GroundTruth, ModelError, Mode};
use crate::similarity::{LabeledPair, MatchDecision, MatchLabel};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: expected {expected} tab-separated columns, found {found}")]
    Columns { line: usize, expected: usize, found: usize },
    #[error("line {line}: {message}")]
    Value { line: usize, message: String },
    #[error("line {line}: {source}")]
    Model { line: usize, source: ModelError },
}

fn rows(text: &str, expected: usize) -> impl Iterator<Item = Result<(usize, Vec<&str>), IoError>> {
    text.lines().enumerate().filter_map(move |(i, raw)| {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.starts_with('#') {
            return None;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        Some(if cols.len() == expected {
            Ok((i + 1, cols))
        } else {
            Err(IoError::Columns { line: i + 1, expected, found: cols.len() })
        })
    })
}

fn pair_at(line: usize, l: &str, r: &str, mode: Mode) -> Result<EntityPair, IoError> {
    canonicalize_pair(l, r, mode).map_err(|source| IoError::Model { line, source })
}

pub fn write_pairs<'a>(pairs: impl IntoIterator<Item = &'a EntityPair>) -> String {
    let mut out = String::new();
    for p in pairs {
        let _ = writeln!(out, "{p}");
    }
    out
}

/// Pairs from a two-column file, canonicalized for `mode`. Repeats collapse.
pub fn read_pairs(text: &str, mode: Mode) -> Result<BTreeSet<EntityPair>, IoError> {
    rows(text, 2).map(|r| r.and_then(|(line, c)| pair_at(line, c[0], c[1], mode))).collect()
}

pub fn read_ground_truth(text: &str, mode: Mode) -> Result<GroundTruth, IoError> {
    read_pairs(text, mode).map(GroundTruth::new)
}

fn parse_bool_label(line: usize, s: &str) -> Result<bool, IoError> {
    match s.trim() {
        "1" | "true" | "duplicate" => Ok(true),
        "0" | "false" | "non_duplicate" => Ok(false),
        other => Err(IoError::Value { line, message: format!("training label {other:?} is not 1/0/true/false") }),
    }
}

/// Training pairs: left, right, label (1/0, true/false or duplicate/non_duplicate).
pub fn read_labeled(text: &str, mode: Mode) -> Result<Vec<LabeledPair>, IoError> {
    rows(text, 3)
        .map(|r| {
            let (line, c) = r?;
            Ok(LabeledPair { pair: pair_at(line, c[0], c[1], mode)?, is_duplicate: parse_bool_label(line, c[2])? })
        })
        .collect()
}

/// left, right, score with 6 decimals, label.
pub fn write_decisions<'a>(decisions: impl IntoIterator<Item = &'a MatchDecision>) -> String {
    let mut out = String::new();
    for d in decisions {
        let _ = writeln!(out, "{}\t{:.6}\t{}", d.pair, d.score, d.label.as_str());
    }
    out
}

pub fn read_decisions(text: &str, mode: Mode) -> Result<Vec<MatchDecision>, IoError> {
    rows(text, 4)
        .map(|r| {
            let (line, c) = r?;
            let score: f64 = c[2]
                .parse()
                .map_err(|_| IoError::Value { line, message: format!("score {:?} is not a number", c[2]) })?;
            let label = MatchLabel::parse(c[3])
                .ok_or_else(|| IoError::Value { line, message: format!("unknown label {:?}", c[3]) })?;
            Ok(MatchDecision { pair: pair_at(line, c[0], c[1], mode)?, score, label })
        })
        .collect()
}

/// The manual-review queue: Indeterminate decisions in decision format.
pub fn write_review<'a>(decisions: impl IntoIterator<Item = &'a MatchDecision>) -> String {
    write_decisions(decisions.into_iter().filter(|d| d.label == MatchLabel::Indeterminate))
}
