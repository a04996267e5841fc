//! The matching step: vectorize candidate pairs with a feature library and
//! label them with a link specification.

mod features;
mod spec;
mod train;

use thiserror::Error;

use crate::model::{CandidateSet, EntityPair, ModelError};
use crate::par;

pub use features::{feature_library, select_features, vectorize, FeatureFunction, FeatureVector, Vectorizer, MISSING};
pub use spec::{DecisionRule, LinearModel, LinkSpec, MatchDecision, MatchLabel, Score, Scorer, SpecKind};
pub use train::{fit_logistic, log_loss, log_loss_gradient, train_linear, TrainOptions};

#[derive(Debug, Error, PartialEq)]
pub enum SimilarityError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("feature vector has {got} slots, the link specification expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training data needs at least one positive and one negative example")]
    SingleClass,
    #[error("pair {0} is labeled both duplicate and non-duplicate")]
    ContradictoryLabels(String),
    #[error("invalid link specification: {0}")]
    InvalidSpec(String),
}

/// A training example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledPair {
    pub pair: EntityPair,
    pub is_duplicate: bool,
}

/// Decisions for a candidate set and their partition into C_D, C_ND and the
/// manual-review queue.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Matching {
    pub decisions: Vec<MatchDecision>,
    pub duplicates: Vec<EntityPair>,
    pub non_duplicates: Vec<EntityPair>,
    pub review: Vec<EntityPair>,
    /// Pairs whose vectors were all sentinels (scored 0).
    pub no_evidence: usize,
}

impl Matching {
    /// Partitions decisions, which must already be in canonical order.
    pub fn from_decisions(decisions: Vec<MatchDecision>, no_evidence: usize) -> Self {
        let mut m = Self { no_evidence, ..Self::default() };
        for d in &decisions {
            match d.label {
                MatchLabel::Duplicate => m.duplicates.push(d.pair.clone()),
                MatchLabel::NonDuplicate => m.non_duplicates.push(d.pair.clone()),
                MatchLabel::Indeterminate => m.review.push(d.pair.clone()),
            }
        }
        m.decisions = decisions;
        m
    }
}

/// Scores of every candidate pair, in canonical order. Reusable across
/// decision rules.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPairs {
    pub scores: Vec<(EntityPair, f64)>,
    pub no_evidence: usize,
}

impl ScoredPairs {
    pub fn decide(&self, rule: DecisionRule) -> Matching {
        let decisions = self
            .scores
            .iter()
            .map(|(pair, score)| MatchDecision { pair: pair.clone(), score: *score, label: rule.label(*score) })
            .collect();
        Matching::from_decisions(decisions, self.no_evidence)
    }
}

pub fn score_candidates(
    candidates: &CandidateSet,
    spec: &LinkSpec,
    vectorizer: &Vectorizer<'_>,
) -> Result<ScoredPairs, SimilarityError> {
    let pairs: Vec<&EntityPair> = candidates.iter().collect();
    let scored = par::map(&pairs, |p| vectorizer.vectorize(p).and_then(|v| spec.score(&v)));
    let mut out = Vec::with_capacity(pairs.len());
    let mut no_evidence = 0;
    for (p, s) in pairs.into_iter().zip(scored) {
        let s = s?;
        no_evidence += usize::from(s.no_evidence);
        out.push((p.clone(), s.value));
    }
    Ok(ScoredPairs { scores: out, no_evidence })
}

/// One decision per candidate pair, plus the partition.
pub fn apply_similarity(
    candidates: &CandidateSet,
    spec: &LinkSpec,
    vectorizer: &Vectorizer<'_>,
) -> Result<Matching, SimilarityError> {
    Ok(score_candidates(candidates, spec, vectorizer)?.decide(spec.rule))
}
