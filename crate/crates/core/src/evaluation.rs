//! Blocking and matching metrics against a ground truth.
//!
//! All ratios are computed exactly as `Ratio<i128>` and only rendered to
//! `f64` for reports. Undefined ratios (empty denominators) are `None` in
//! reports and errors from the single-metric functions.

use std::collections::BTreeMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CandidateSet, EntityPair, GroundTruth};
use crate::similarity::{MatchDecision, MatchLabel};

pub type Rational = Ratio<i128>;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("{0} is undefined: {1}")]
    Undefined(&'static str, &'static str),
    #[error("candidate set has {candidates} pairs but the pair space only {omega}")]
    CandidatesExceedOmega { candidates: u64, omega: u64 },
    #[error("decision for pair {0} which is not in the candidate set")]
    OutsideCandidates(String),
    #[error("pair {0} has more than one decision")]
    RepeatedDecision(String),
    #[error("candidate pair {0} has no decision")]
    MissingDecision(String),
    #[error("a curve needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("a curve cannot mix blocking and matching reports")]
    MixedCurve,
    #[error("csv: {0}")]
    Csv(String),
}

pub fn to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn ratio(num: u64, den: u64) -> Rational {
    Rational::new(i128::from(num), i128::from(den))
}

fn true_candidates(c: &CandidateSet, gt: &GroundTruth) -> u64 {
    // Iterate the smaller of the two sorted sets.
    if c.len() <= gt.len() {
        c.iter().filter(|p| gt.contains(p)).count() as u64
    } else {
        gt.matches().iter().filter(|p| c.contains(p)).count() as u64
    }
}

/// 1 − |C| / |Ω|.
pub fn reduction_ratio(c: &CandidateSet, omega: u64) -> Result<Rational, EvalError> {
    BlockingCounts { candidates: c.len() as u64, omega, true_candidates: 0, ground_truth: 0 }.rr()
}

/// |C ∩ Ω_M| / |Ω_M|.
pub fn pairs_completeness(c: &CandidateSet, gt: &GroundTruth) -> Result<Rational, EvalError> {
    BlockingCounts::new(c, 0, gt).pc()
}

/// |C ∩ Ω_M| / |C|.
pub fn pairs_quality(c: &CandidateSet, gt: &GroundTruth) -> Result<Rational, EvalError> {
    BlockingCounts::new(c, 0, gt).pq()
}

/// Harmonic mean 2ab / (a + b), zero when a + b = 0.
pub fn f_measure(a: Rational, b: Rational) -> Rational {
    let sum = a + b;
    if sum == Rational::from_integer(0) {
        sum
    } else {
        Rational::from_integer(2) * a * b / sum
    }
}

pub fn f_measure_f64(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

/// 1 − |C| / |baseline|; negative when C is larger than the baseline.
pub fn relative_rr(c: &CandidateSet, baseline: &CandidateSet) -> Result<Rational, EvalError> {
    relative_rr_counts(c.len() as u64, baseline.len() as u64)
}

pub fn relative_rr_counts(c: u64, baseline: u64) -> Result<Rational, EvalError> {
    if baseline == 0 {
        return Err(EvalError::Undefined("relative RR", "empty baseline candidate set"));
    }
    Ok(Rational::from_integer(1) - ratio(c, baseline))
}

/// (|C|, |Ω|, |C ∩ Ω_M|, |Ω_M|).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockingCounts {
    pub candidates: u64,
    pub omega: u64,
    pub true_candidates: u64,
    pub ground_truth: u64,
}

impl BlockingCounts {
    pub fn new(c: &CandidateSet, omega: u64, gt: &GroundTruth) -> Self {
        Self { candidates: c.len() as u64, omega, true_candidates: true_candidates(c, gt), ground_truth: gt.len() as u64 }
    }

    pub fn rr(&self) -> Result<Rational, EvalError> {
        if self.omega == 0 {
            return Err(EvalError::Undefined("RR", "the pair space is empty"));
        }
        if self.candidates > self.omega {
            return Err(EvalError::CandidatesExceedOmega { candidates: self.candidates, omega: self.omega });
        }
        Ok(Rational::from_integer(1) - ratio(self.candidates, self.omega))
    }

    pub fn pc(&self) -> Result<Rational, EvalError> {
        if self.ground_truth == 0 {
            return Err(EvalError::Undefined("PC", "the ground truth is empty"));
        }
        Ok(ratio(self.true_candidates, self.ground_truth))
    }

    pub fn pq(&self) -> Result<Rational, EvalError> {
        if self.candidates == 0 {
            return Err(EvalError::Undefined("PQ", "the candidate set is empty"));
        }
        Ok(ratio(self.true_candidates, self.candidates))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockingReport {
    pub method: String,
    pub counts: BlockingCounts,
    pub rr: Option<f64>,
    pub pc: Option<f64>,
    pub pq: Option<f64>,
    pub f_pc_rr: Option<f64>,
    pub f_pc_pq: Option<f64>,
    pub relative_rr: Option<f64>,
}

impl BlockingReport {
    /// Report for `c`; `baseline` is the size of a reference candidate set
    /// for relative RR.
    pub fn new(c: &CandidateSet, omega: u64, gt: &GroundTruth, baseline: Option<u64>) -> Result<Self, EvalError> {
        let counts = BlockingCounts::new(c, omega, gt);
        let rr = counts.rr().ok();
        let pc = counts.pc().ok();
        let pq = counts.pq().ok();
        let f = |a: Option<Rational>, b: Option<Rational>| Some(to_f64(f_measure(a?, b?)));
        if counts.candidates > counts.omega {
            return Err(EvalError::CandidatesExceedOmega { candidates: counts.candidates, omega: counts.omega });
        }
        Ok(Self {
            method: c.method().to_owned(),
            counts,
            rr: rr.map(to_f64),
            pc: pc.map(to_f64),
            pq: pq.map(to_f64),
            f_pc_rr: f(pc, rr),
            f_pc_pq: f(pc, pq),
            relative_rr: baseline.and_then(|b| relative_rr_counts(counts.candidates, b).ok()).map(to_f64),
        })
    }
}

/// How Indeterminate decisions enter the match metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndeterminatePolicy {
    /// Predicted non-duplicate.
    #[default]
    AsNegative,
    /// Left out of TP, FP and FN altogether.
    Exclude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// Ground-truth pairs blocking never proposed; part of `fn`.
    pub missed_by_blocking: u64,
    pub indeterminate: u64,
    pub policy: IndeterminatePolicy,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

impl MatchReport {
    pub fn precision_exact(&self) -> Option<Rational> {
        (self.tp + self.fp > 0).then(|| ratio(self.tp, self.tp + self.fp))
    }

    pub fn recall_exact(&self) -> Option<Rational> {
        (self.tp + self.fn_ > 0).then(|| ratio(self.tp, self.tp + self.fn_))
    }
}

/// TP/FP/FN over the decisions, which must cover the candidate set exactly
/// once. Ground-truth pairs missing from the candidate set count as FN.
pub fn match_metrics(
    decisions: &[MatchDecision],
    gt: &GroundTruth,
    candidates: &CandidateSet,
    policy: IndeterminatePolicy,
) -> Result<MatchReport, EvalError> {
    let mut seen: BTreeMap<&EntityPair, MatchLabel> = BTreeMap::new();
    for d in decisions {
        if !candidates.contains(&d.pair) {
            return Err(EvalError::OutsideCandidates(d.pair.to_string()));
        }
        if seen.insert(&d.pair, d.label).is_some() {
            return Err(EvalError::RepeatedDecision(d.pair.to_string()));
        }
    }
    if let Some(p) = candidates.iter().find(|p| !seen.contains_key(p)) {
        return Err(EvalError::MissingDecision(p.to_string()));
    }
    let (mut tp, mut fp, mut fn_, mut indeterminate) = (0, 0, 0, 0);
    for (pair, label) in &seen {
        let truth = gt.contains(pair);
        let positive = match label {
            MatchLabel::Duplicate => true,
            MatchLabel::NonDuplicate => false,
            MatchLabel::Indeterminate => {
                indeterminate += 1;
                if policy == IndeterminatePolicy::Exclude {
                    continue;
                }
                false
            }
        };
        match (positive, truth) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let missed = gt.matches().iter().filter(|p| !candidates.contains(p)).count() as u64;
    fn_ += missed;
    let mut report = MatchReport {
        tp,
        fp,
        fn_,
        missed_by_blocking: missed,
        indeterminate,
        policy,
        precision: None,
        recall: None,
        f1: None,
    };
    let (p, r) = (report.precision_exact(), report.recall_exact());
    report.precision = p.map(to_f64);
    report.recall = r.map(to_f64);
    report.f1 = match (p, r) {
        (Some(p), Some(r)) => Some(to_f64(f_measure(p, r))),
        _ => None,
    };
    Ok(report)
}

/// One sweep result.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepReport {
    Blocking(BlockingReport),
    Matching(MatchReport),
}

/// (param, PC, RR) or (param, precision, recall) rows sorted by param.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub param: String,
    pub columns: [&'static str; 2],
    pub rows: Vec<(f64, Option<f64>, Option<f64>)>,
}

pub fn curve_points(param: &str, sweep: &[(f64, SweepReport)]) -> Result<Curve, EvalError> {
    if sweep.len() < 2 {
        return Err(EvalError::TooFewPoints(sweep.len()));
    }
    let blocking = matches!(sweep[0].1, SweepReport::Blocking(_));
    let mut rows = Vec::with_capacity(sweep.len());
    for (x, r) in sweep {
        rows.push(match (r, blocking) {
            (SweepReport::Blocking(b), true) => (*x, b.pc, b.rr),
            (SweepReport::Matching(m), false) => (*x, m.precision, m.recall),
            _ => return Err(EvalError::MixedCurve),
        });
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let columns = if blocking { ["pc", "rr"] } else { ["precision", "recall"] };
    Ok(Curve { param: param.to_owned(), columns, rows })
}

impl Curve {
    /// CSV with a header row; undefined values are empty cells.
    pub fn to_csv(&self) -> Result<String, EvalError> {
        let err = |e: csv::Error| EvalError::Csv(e.to_string());
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([self.param.as_str(), self.columns[0], self.columns[1]]).map_err(err)?;
        let cell = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for &(x, a, b) in &self.rows {
            w.write_record([x.to_string(), cell(a), cell(b)]).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| EvalError::Csv(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv writer emits UTF-8"))
    }
}
