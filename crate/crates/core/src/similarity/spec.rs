//! Link specifications: a scorer over feature vectors plus a decision rule.

use serde::{Deserialize, Serialize};

use crate::model::EntityPair;

use super::features::{FeatureVector, MISSING};
use super::SimilarityError;

/// A fitted logistic-linear scorer, serialized as the model JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Feature function names, in layout order.
    pub library: Vec<String>,
    /// Field names, in layout order.
    pub schema: Vec<String>,
    #[serde(default)]
    pub final_loss: Option<f64>,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LinearModel {
    pub fn logit(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scorer {
    /// Mean of the non-sentinel entries.
    Mean,
    /// Weighted mean of the non-sentinel entries; one weight per slot.
    WeightedMean(Vec<f64>),
    /// Logistic of the affine combination; sentinels contribute zero.
    Linear(LinearModel),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecisionRule {
    Threshold { threshold: f64 },
    TwoThreshold { lower: f64, upper: f64 },
}

impl DecisionRule {
    pub fn threshold(t: f64) -> Result<Self, SimilarityError> {
        if !t.is_finite() {
            return Err(SimilarityError::InvalidSpec(format!("threshold {t} is not finite")));
        }
        Ok(Self::Threshold { threshold: t })
    }

    pub fn two_threshold(lower: f64, upper: f64) -> Result<Self, SimilarityError> {
        if !(lower.is_finite() && upper.is_finite() && lower <= upper) {
            return Err(SimilarityError::InvalidSpec(format!(
                "two-threshold rule needs lower <= upper, got {lower} and {upper}"
            )));
        }
        Ok(Self::TwoThreshold { lower, upper })
    }

    /// Strictly greater than the (upper) threshold is a duplicate.
    pub fn label(&self, score: f64) -> MatchLabel {
        match *self {
            Self::Threshold { threshold } => {
                if score > threshold {
                    MatchLabel::Duplicate
                } else {
                    MatchLabel::NonDuplicate
                }
            }
            Self::TwoThreshold { lower, upper } => {
                if score > upper {
                    MatchLabel::Duplicate
                } else if score <= lower {
                    MatchLabel::NonDuplicate
                } else {
                    MatchLabel::Indeterminate
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecKind {
    BooleanThreshold,
    TwoThreshold,
    LearnedLinear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub scorer: Scorer,
    pub rule: DecisionRule,
}

/// A score in [0, 1]; `no_evidence` marks an all-sentinel vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub value: f64,
    pub no_evidence: bool,
}

impl LinkSpec {
    pub fn new(scorer: Scorer, rule: DecisionRule) -> Self {
        Self { scorer, rule }
    }

    pub fn threshold(t: f64) -> Result<Self, SimilarityError> {
        Ok(Self::new(Scorer::Mean, DecisionRule::threshold(t)?))
    }

    pub fn two_threshold(lower: f64, upper: f64) -> Result<Self, SimilarityError> {
        Ok(Self::new(Scorer::Mean, DecisionRule::two_threshold(lower, upper)?))
    }

    pub fn kind(&self) -> SpecKind {
        match (&self.scorer, self.rule) {
            (Scorer::Linear(_), _) => SpecKind::LearnedLinear,
            (_, DecisionRule::TwoThreshold { .. }) => SpecKind::TwoThreshold,
            _ => SpecKind::BooleanThreshold,
        }
    }

    /// Slot count the scorer expects, if fixed.
    pub fn dimension(&self) -> Option<usize> {
        match &self.scorer {
            Scorer::Mean => None,
            Scorer::WeightedMean(w) => Some(w.len()),
            Scorer::Linear(m) => Some(m.weights.len()),
        }
    }

    pub fn score(&self, v: &FeatureVector) -> Result<Score, SimilarityError> {
        if let Some(expected) = self.dimension() {
            if expected != v.len() {
                return Err(SimilarityError::DimensionMismatch { expected, got: v.len() });
            }
        }
        let no_evidence = v.values.iter().all(|&x| x == MISSING);
        if no_evidence {
            log::warn!("all-sentinel feature vector scored 0");
            return Ok(Score { value: 0.0, no_evidence });
        }
        let value = match &self.scorer {
            Scorer::Mean => {
                let present: Vec<f64> = v.values.iter().copied().filter(|&x| x != MISSING).collect();
                present.iter().sum::<f64>() / present.len() as f64
            }
            Scorer::WeightedMean(weights) => {
                let (num, den) = v
                    .values
                    .iter()
                    .zip(weights)
                    .filter(|(x, _)| **x != MISSING)
                    .fold((0.0, 0.0), |(n, d), (x, w)| (n + x * w, d + w));
                if den > 0.0 {
                    num / den
                } else {
                    0.0
                }
            }
            Scorer::Linear(m) => sigmoid(m.logit(&v.zeroed())),
        };
        Ok(Score { value: value.clamp(0.0, 1.0), no_evidence })
    }

    pub fn decide(&self, score: f64, pair: EntityPair) -> MatchDecision {
        MatchDecision { label: self.rule.label(score), score, pair }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchLabel {
    Duplicate,
    NonDuplicate,
    Indeterminate,
}

impl MatchLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Duplicate => "duplicate",
            Self::NonDuplicate => "non_duplicate",
            Self::Indeterminate => "indeterminate",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Duplicate, Self::NonDuplicate, Self::Indeterminate].into_iter().find(|l| l.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchDecision {
    pub pair: EntityPair,
    pub score: f64,
    pub label: MatchLabel,
}
