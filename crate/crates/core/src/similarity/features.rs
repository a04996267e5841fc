//! Feature functions and pair vectorization.

use crate::model::{Datatype, Dataset, Entity, EntityPair, Literal, Side, Sources};
use crate::text::{jaccard, normalized_levenshtein, soundex, token_set};

use super::SimilarityError;

/// Slot value for a missing input or a failed feature function.
pub const MISSING: f64 = -1.0;

type Eval = fn(&Literal, &Literal) -> Option<f64>;

/// A symmetric similarity over two literals, in [0, 1].
#[derive(Clone, Copy)]
pub struct FeatureFunction {
    name: &'static str,
    applicable: &'static [Datatype],
    eval: Eval,
}

impl std::fmt::Debug for FeatureFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FeatureFunction").field("name", &self.name).finish()
    }
}

impl PartialEq for FeatureFunction {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

impl FeatureFunction {
    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn applies_to(&self, dt: Datatype) -> bool {
        self.applicable.contains(&dt)
    }

    /// The similarity, or [`MISSING`] when an input is absent, a datatype is
    /// not applicable, or the function cannot evaluate the values.
    pub fn evaluate(&self, a: Option<&Literal>, b: Option<&Literal>) -> f64 {
        match (a, b) {
            (Some(a), Some(b)) if self.applies_to(a.datatype()) && self.applies_to(b.datatype()) => {
                (self.eval)(a, b).map_or(MISSING, |v| v.clamp(0.0, 1.0))
            }
            _ => MISSING,
        }
    }
}

fn exact(a: &Literal, b: &Literal) -> Option<f64> {
    Some(if a.lexical() == b.lexical() { 1.0 } else { 0.0 })
}

fn levenshtein(a: &Literal, b: &Literal) -> Option<f64> {
    Some(normalized_levenshtein(a.lexical(), b.lexical()))
}

fn token_jaccard(a: &Literal, b: &Literal) -> Option<f64> {
    Some(jaccard(&token_set(a.lexical()), &token_set(b.lexical())))
}

fn soundex_eq(a: &Literal, b: &Literal) -> Option<f64> {
    let (x, y) = (soundex(a.lexical())?, soundex(b.lexical())?);
    Some(if x == y { 1.0 } else { 0.0 })
}

fn scaled_numeric(a: &Literal, b: &Literal) -> Option<f64> {
    let x: f64 = a.lexical().trim().parse().ok().filter(|v: &f64| v.is_finite())?;
    let y: f64 = b.lexical().trim().parse().ok().filter(|v: &f64| v.is_finite())?;
    Some(1.0 - (x - y).abs() / x.abs().max(y.abs()).max(1.0))
}

const ALL: &[Datatype] = &Datatype::ALL;
const TEXT: &[Datatype] = &[Datatype::String, Datatype::Date];
const STRING: &[Datatype] = &[Datatype::String];
const NUMERIC: &[Datatype] = &[Datatype::Integer, Datatype::Decimal, Datatype::String];

const LIBRARY: [FeatureFunction; 5] = [
    FeatureFunction { name: "exact_match", applicable: ALL, eval: exact },
    FeatureFunction { name: "normalized_levenshtein", applicable: TEXT, eval: levenshtein },
    FeatureFunction { name: "jaccard_tokens", applicable: STRING, eval: token_jaccard },
    FeatureFunction { name: "soundex_equality", applicable: STRING, eval: soundex_eq },
    FeatureFunction { name: "scaled_numeric", applicable: NUMERIC, eval: scaled_numeric },
];

/// The five library functions, in their fixed order.
pub fn feature_library() -> Vec<FeatureFunction> {
    LIBRARY.to_vec()
}

/// A subset of the library, in the order given.
pub fn select_features<S: AsRef<str>>(names: &[S]) -> Result<Vec<FeatureFunction>, SimilarityError> {
    names
        .iter()
        .map(|n| {
            LIBRARY
                .iter()
                .find(|f| f.name == n.as_ref())
                .copied()
                .ok_or_else(|| SimilarityError::InvalidSpec(format!("unknown feature function {:?}", n.as_ref())))
        })
        .collect()
}

/// m·n values, field-major: all functions for field 1, then field 2, ...
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sentinels replaced by zero, as fed to the linear model.
    pub fn zeroed(&self) -> Vec<f64> {
        self.values.iter().map(|&v| if v == MISSING { 0.0 } else { v }).collect()
    }
}

/// Vectorizes pairs for fixed sources and library. The layout follows the
/// left dataset's schema; a field absent from the right dataset is missing.
#[derive(Debug, Clone)]
pub struct Vectorizer<'a> {
    sources: Sources<'a>,
    library: Vec<FeatureFunction>,
    right_index: Vec<Option<usize>>,
}

impl<'a> Vectorizer<'a> {
    pub fn new(sources: Sources<'a>, library: Vec<FeatureFunction>) -> Self {
        let right: &Dataset = sources.dataset(Side::Right);
        let right_index = sources.left.schema().iter().map(|f| right.field_index(f)).collect();
        Self { sources, library, right_index }
    }

    pub fn sources(&self) -> &Sources<'a> {
        &self.sources
    }

    pub fn library(&self) -> &[FeatureFunction] {
        &self.library
    }

    pub fn schema(&self) -> &'a [String] {
        self.sources.left.schema()
    }

    /// m·n.
    pub fn dimension(&self) -> usize {
        self.library.len() * self.right_index.len()
    }

    pub fn entities(&self, left: &Entity, right: &Entity) -> FeatureVector {
        let mut values = Vec::with_capacity(self.dimension());
        for (i, ri) in self.right_index.iter().enumerate() {
            let a = left.field(i);
            let b = ri.and_then(|j| right.field(j));
            values.extend(self.library.iter().map(|f| f.evaluate(a, b)));
        }
        FeatureVector { values }
    }

    pub fn vectorize(&self, pair: &EntityPair) -> Result<FeatureVector, SimilarityError> {
        let (l, r) = self.sources.resolve(pair)?;
        Ok(self.entities(l, r))
    }
}

/// One-shot vectorization of a single pair.
pub fn vectorize(
    pair: &EntityPair,
    sources: &Sources<'_>,
    library: &[FeatureFunction],
) -> Result<FeatureVector, SimilarityError> {
    Vectorizer::new(*sources, library.to_vec()).vectorize(pair)
}
