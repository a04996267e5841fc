//! Datasets, entities, pair identities and the pair-set containers shared by
//! blocking, matching and evaluation.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("literal {lexical:?} is not a valid {datatype}")]
    InvalidLiteral { lexical: String, datatype: Datatype },
    #[error("empty IRI in {0} position")]
    EmptyIri(&'static str),
    #[error("duplicate entity id {0:?}")]
    DuplicateId(String),
    #[error("entity {id:?} has {got} fields, schema has {expected}")]
    SchemaMismatch { id: String, expected: usize, got: usize },
    #[error("self-pair {0:?} is not a valid deduplication pair")]
    SelfPair(String),
    #[error("empty entity id")]
    EmptyId,
    #[error("unknown entity id {0:?}")]
    UnknownId(String),
    #[error("exhaustive pair set has {size} pairs, above the cap of {cap}")]
    OmegaTooLarge { size: u64, cap: u64 },
}

/// Datatype tag carried by every literal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Datatype {
    String,
    Integer,
    Decimal,
    Date,
}

impl Datatype {
    pub const ALL: [Datatype; 4] = [Self::String, Self::Integer, Self::Decimal, Self::Date];

    pub fn name(self) -> &'static str {
        match self {
            Self::String => "string",
            Self::Integer => "integer",
            Self::Decimal => "decimal",
            Self::Date => "date",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.name() == name)
    }

    fn accepts(self, lexical: &str) -> bool {
        match self {
            Self::String => true,
            Self::Integer => {
                let digits = lexical.strip_prefix(['+', '-']).unwrap_or(lexical);
                !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
            }
            Self::Decimal => {
                let body = lexical.strip_prefix(['+', '-']).unwrap_or(lexical);
                let mut parts = body.splitn(2, '.');
                let int = parts.next().unwrap_or("");
                let frac = parts.next();
                let all_digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
                match frac {
                    None => !int.is_empty() && all_digits(int),
                    Some(f) => (!int.is_empty() || !f.is_empty()) && all_digits(int) && all_digits(f),
                }
            }
            Self::Date => {
                lexical.len() == 10 && NaiveDate::parse_from_str(lexical, "%Y-%m-%d").is_ok()
            }
        }
    }
}

impl fmt::Display for Datatype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A typed literal value. The lexical form always parses under its tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    lexical: String,
    datatype: Datatype,
}

impl Literal {
    pub fn new(lexical: impl Into<String>, datatype: Datatype) -> Result<Self, ModelError> {
        let lexical = lexical.into();
        if !datatype.accepts(&lexical) {
            return Err(ModelError::InvalidLiteral { lexical, datatype });
        }
        Ok(Self { lexical, datatype })
    }

    pub fn string(lexical: impl Into<String>) -> Self {
        Self { lexical: lexical.into(), datatype: Datatype::String }
    }

    pub fn lexical(&self) -> &str {
        &self.lexical
    }

    pub fn datatype(&self) -> Datatype {
        self.datatype
    }
}

/// Object position of a triple: an IRI or a literal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Object {
    Iri(String),
    Literal(Literal),
}

/// An RDF triple restricted to IRIs in subject and property position.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Triple {
    subject: String,
    property: String,
    object: Object,
}

impl Triple {
    pub fn new(
        subject: impl Into<String>,
        property: impl Into<String>,
        object: Object,
    ) -> Result<Self, ModelError> {
        let subject = subject.into();
        let property = property.into();
        if subject.is_empty() {
            return Err(ModelError::EmptyIri("subject"));
        }
        if property.is_empty() {
            return Err(ModelError::EmptyIri("property"));
        }
        if let Object::Iri(iri) = &object {
            if iri.is_empty() {
                return Err(ModelError::EmptyIri("object"));
            }
        }
        Ok(Self { subject, property, object })
    }

    pub fn subject(&self) -> &str {
        &self.subject
    }

    pub fn property(&self) -> &str {
        &self.property
    }

    pub fn object(&self) -> &Object {
        &self.object
    }
}

/// A named instance: URI id, mnemonic label and one optional value per
/// schema field, in schema order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub id: String,
    pub label: String,
    pub fields: Vec<Option<Literal>>,
}

impl Entity {
    pub fn field(&self, index: usize) -> Option<&Literal> {
        self.fields.get(index).and_then(Option::as_ref)
    }
}

/// Fallback label: the part of the IRI after the last `/`, `#` or `:`.
pub fn local_name(iri: &str) -> &str {
    let tail = iri.rsplit(['/', '#', ':']).next().unwrap_or(iri);
    if tail.is_empty() {
        iri
    } else {
        tail
    }
}

/// A structurally homogeneous collection of entities.
#[derive(Debug, Clone)]
pub struct Dataset {
    name: String,
    schema: Vec<String>,
    entities: Vec<Entity>,
    label_field: Option<String>,
    by_id: HashMap<String, usize>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.schema == other.schema
            && self.entities == other.entities
            && self.label_field == other.label_field
    }
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        schema: Vec<String>,
        entities: Vec<Entity>,
        label_field: Option<String>,
    ) -> Result<Self, ModelError> {
        let mut by_id = HashMap::with_capacity(entities.len());
        for (i, e) in entities.iter().enumerate() {
            if e.id.is_empty() {
                return Err(ModelError::EmptyId);
            }
            if e.fields.len() != schema.len() {
                return Err(ModelError::SchemaMismatch {
                    id: e.id.clone(),
                    expected: schema.len(),
                    got: e.fields.len(),
                });
            }
            if by_id.insert(e.id.clone(), i).is_some() {
                return Err(ModelError::DuplicateId(e.id.clone()));
            }
        }
        Ok(Self { name: name.into(), schema, entities, label_field, by_id })
    }

    pub fn empty(name: impl Into<String>, schema: Vec<String>) -> Self {
        Self::new(name, schema, Vec::new(), None).expect("empty dataset is always valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn schema(&self) -> &[String] {
        &self.schema
    }

    pub fn field_index(&self, field: &str) -> Option<usize> {
        self.schema.iter().position(|f| f == field)
    }

    pub fn label_field(&self) -> Option<&str> {
        self.label_field.as_deref()
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Entity> {
        self.by_id.get(id).map(|&i| &self.entities[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }
}

/// Whether pairs span two datasets or live inside one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Bilateral,
    Dedup,
}

/// An entity pair. Bilateral pairs keep (D1, D2) orientation; dedup pairs
/// hold the byte-lexicographically smaller id on the left.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityPair {
    left: String,
    right: String,
}

impl EntityPair {
    pub fn left(&self) -> &str {
        &self.left
    }

    pub fn right(&self) -> &str {
        &self.right
    }
}

impl fmt::Display for EntityPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}", self.left, self.right)
    }
}

pub fn canonicalize_pair(
    a: impl Into<String>,
    b: impl Into<String>,
    mode: Mode,
) -> Result<EntityPair, ModelError> {
    let (a, b) = (a.into(), b.into());
    if a.is_empty() || b.is_empty() {
        return Err(ModelError::EmptyId);
    }
    match mode {
        Mode::Bilateral => Ok(EntityPair { left: a, right: b }),
        Mode::Dedup => match a.as_bytes().cmp(b.as_bytes()) {
            std::cmp::Ordering::Less => Ok(EntityPair { left: a, right: b }),
            std::cmp::Ordering::Greater => Ok(EntityPair { left: b, right: a }),
            std::cmp::Ordering::Equal => Err(ModelError::SelfPair(a)),
        },
    }
}

/// The datasets being resolved: two for bilateral linkage, one for dedup.
#[derive(Debug, Clone, Copy)]
pub struct Sources<'a> {
    pub left: &'a Dataset,
    pub right: Option<&'a Dataset>,
}

/// Which input dataset an entity comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
}

impl<'a> Sources<'a> {
    pub fn bilateral(left: &'a Dataset, right: &'a Dataset) -> Self {
        Self { left, right: Some(right) }
    }

    pub fn dedup(data: &'a Dataset) -> Self {
        Self { left: data, right: None }
    }

    pub fn mode(&self) -> Mode {
        if self.right.is_some() {
            Mode::Bilateral
        } else {
            Mode::Dedup
        }
    }

    pub fn dataset(&self, side: Side) -> &'a Dataset {
        match side {
            Side::Left => self.left,
            Side::Right => self.right.unwrap_or(self.left),
        }
    }

    /// Datasets participating in pair generation, tagged by side.
    pub fn sides(&self) -> Vec<(Side, &'a Dataset)> {
        let mut out = vec![(Side::Left, self.left)];
        if let Some(r) = self.right {
            out.push((Side::Right, r));
        }
        out
    }

    /// |Ω|: |D1|·|D2|, or |D|·(|D|−1)/2 in dedup mode.
    pub fn omega_size(&self) -> u64 {
        let n = self.left.len() as u64;
        match self.right {
            Some(r) => n * r.len() as u64,
            None => n * n.saturating_sub(1) / 2,
        }
    }

    /// Builds the pair for two members, or `None` when the two may not be
    /// paired (same side in bilateral mode, or the same entity).
    pub fn pair(&self, a: Member, b: Member) -> Option<EntityPair> {
        match self.mode() {
            Mode::Bilateral => {
                let (l, r) = match (a.side, b.side) {
                    (Side::Left, Side::Right) => (a, b),
                    (Side::Right, Side::Left) => (b, a),
                    _ => return None,
                };
                Some(EntityPair {
                    left: self.left.entities[l.index].id.clone(),
                    right: self.dataset(Side::Right).entities[r.index].id.clone(),
                })
            }
            Mode::Dedup => {
                if a.index == b.index {
                    return None;
                }
                let ea = &self.left.entities[a.index].id;
                let eb = &self.left.entities[b.index].id;
                canonicalize_pair(ea.as_str(), eb.as_str(), Mode::Dedup).ok()
            }
        }
    }

    pub fn entity(&self, m: Member) -> &'a Entity {
        &self.dataset(m.side).entities[m.index]
    }

    /// Resolves a pair to its two entities.
    pub fn resolve(&self, pair: &EntityPair) -> Result<(&'a Entity, &'a Entity), ModelError> {
        let left = self.left.get(&pair.left).ok_or_else(|| ModelError::UnknownId(pair.left.clone()))?;
        let right = self
            .dataset(Side::Right)
            .get(&pair.right)
            .ok_or_else(|| ModelError::UnknownId(pair.right.clone()))?;
        Ok((left, right))
    }

    /// Every member of every participating dataset.
    pub fn members(&self) -> Vec<Member> {
        self.sides()
            .into_iter()
            .flat_map(|(side, d)| (0..d.len()).map(move |index| Member { side, index }))
            .collect()
    }
}

/// Reference to one entity of one side, by position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Member {
    pub side: Side,
    pub index: usize,
}

/// The deduplicated, sorted output of a blocking method.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CandidateSet {
    pairs: BTreeSet<EntityPair>,
    method: String,
}

impl CandidateSet {
    pub fn new(method: impl Into<String>, pairs: BTreeSet<EntityPair>) -> Self {
        Self { pairs, method: method.into() }
    }

    pub fn method(&self) -> &str {
        &self.method
    }

    pub fn pairs(&self) -> &BTreeSet<EntityPair> {
        &self.pairs
    }

    pub fn into_pairs(self) -> BTreeSet<EntityPair> {
        self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, pair: &EntityPair) -> bool {
        self.pairs.contains(pair)
    }

    pub fn iter(&self) -> impl Iterator<Item = &EntityPair> {
        self.pairs.iter()
    }

    /// Checks that every pair's ids resolve in the given sources.
    pub fn validate(&self, sources: &Sources<'_>) -> Result<(), ModelError> {
        self.pairs.iter().try_for_each(|p| sources.resolve(p).map(|_| ()))
    }
}

/// Gold-standard matching pairs (Ω_M).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroundTruth {
    matches: BTreeSet<EntityPair>,
}

impl GroundTruth {
    pub fn new(matches: BTreeSet<EntityPair>) -> Self {
        Self { matches }
    }

    pub fn matches(&self) -> &BTreeSet<EntityPair> {
        &self.matches
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    pub fn contains(&self, pair: &EntityPair) -> bool {
        self.matches.contains(pair)
    }

    pub fn validate(&self, sources: &Sources<'_>) -> Result<(), ModelError> {
        self.matches.iter().try_for_each(|p| sources.resolve(p).map(|_| ()))
    }
}

/// Materializes Ω. Refuses when |Ω| exceeds `cap`.
pub fn exhaustive_pairs(sources: &Sources<'_>, cap: Option<u64>) -> Result<CandidateSet, ModelError> {
    let size = sources.omega_size();
    if let Some(cap) = cap {
        if size > cap {
            return Err(ModelError::OmegaTooLarge { size, cap });
        }
    }
    let mut pairs = BTreeSet::new();
    match sources.right {
        Some(right) => {
            for l in sources.left.entities() {
                for r in right.entities() {
                    pairs.insert(EntityPair { left: l.id.clone(), right: r.id.clone() });
                }
            }
        }
        None => {
            let ents = sources.left.entities();
            for (i, a) in ents.iter().enumerate() {
                for b in &ents[i + 1..] {
                    pairs.insert(canonicalize_pair(a.id.as_str(), b.id.as_str(), Mode::Dedup)?);
                }
            }
        }
    }
    Ok(CandidateSet::new("exhaustive", pairs))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn toy(name: &str, n: usize) -> Dataset {
        let entities = (0..n)
            .map(|i| Entity {
                id: format!("urn:{name}:{i}"),
                label: format!("e{i}"),
                fields: vec![Some(Literal::string(format!("v{i}")))],
            })
            .collect();
        Dataset::new(name, vec!["f".into()], entities, None).unwrap()
    }

    #[test]
    fn canonicalize_examples() {
        let p = canonicalize_pair("urn:b", "urn:a", Mode::Dedup).unwrap();
        assert_eq!((p.left(), p.right()), ("urn:a", "urn:b"));
        let p = canonicalize_pair("urn:x", "urn:y", Mode::Bilateral).unwrap();
        assert_eq!((p.left(), p.right()), ("urn:x", "urn:y"));
        let p = canonicalize_pair("urn:y", "urn:x", Mode::Bilateral).unwrap();
        assert_eq!((p.left(), p.right()), ("urn:y", "urn:x"));
        assert_eq!(
            canonicalize_pair("urn:a", "urn:a", Mode::Dedup),
            Err(ModelError::SelfPair("urn:a".into()))
        );
        assert_eq!(canonicalize_pair("", "urn:a", Mode::Bilateral), Err(ModelError::EmptyId));
    }

    #[test]
    fn exhaustive_cardinalities() {
        for n1 in 0..=20 {
            let d1 = toy("a", n1);
            let dd = exhaustive_pairs(&Sources::dedup(&d1), None).unwrap();
            assert_eq!(dd.len(), n1 * n1.saturating_sub(1) / 2);
            for n2 in [0, 1, 4, 13, 20] {
                let d2 = toy("b", n2);
                let s = Sources::bilateral(&d1, &d2);
                let all = exhaustive_pairs(&s, None).unwrap();
                assert_eq!(all.len(), n1 * n2);
                assert_eq!(s.omega_size(), (n1 * n2) as u64);
            }
        }
        let d1 = toy("a", 3);
        let d2 = toy("b", 4);
        assert_eq!(exhaustive_pairs(&Sources::bilateral(&d1, &d2), None).unwrap().len(), 12);
        assert_eq!(exhaustive_pairs(&Sources::dedup(&toy("a", 5)), None).unwrap().len(), 10);
    }

    #[test]
    fn exhaustive_guard() {
        let d1 = toy("a", 10);
        let d2 = toy("b", 10);
        let err = exhaustive_pairs(&Sources::bilateral(&d1, &d2), Some(99)).unwrap_err();
        assert_eq!(err, ModelError::OmegaTooLarge { size: 100, cap: 99 });
    }

    #[test]
    fn dataset_rejects_duplicates_and_ragged_entities() {
        let e = |id: &str, n: usize| Entity { id: id.into(), label: id.into(), fields: vec![None; n] };
        assert!(matches!(
            Dataset::new("d", vec!["a".into()], vec![e("x", 1), e("x", 1)], None),
            Err(ModelError::DuplicateId(_))
        ));
        assert!(matches!(
            Dataset::new("d", vec!["a".into()], vec![e("x", 2)], None),
            Err(ModelError::SchemaMismatch { .. })
        ));
    }

    #[test]
    fn literal_validation() {
        assert!(Literal::new("1998-03-02", Datatype::Date).is_ok());
        assert!(Literal::new("1998-02-30", Datatype::Date).is_err());
        assert!(Literal::new("2nd March 1998", Datatype::Date).is_err());
        assert!(Literal::new("-42", Datatype::Integer).is_ok());
        assert!(Literal::new("4.2", Datatype::Integer).is_err());
        assert!(Literal::new("4.25", Datatype::Decimal).is_ok());
        assert!(Literal::new(".", Datatype::Decimal).is_err());
    }

    #[test]
    fn local_names() {
        assert_eq!(local_name("http://ex.org/John_Adams"), "John_Adams");
        assert_eq!(local_name("urn:p1"), "p1");
        assert_eq!(local_name("http://ex.org/#"), "http://ex.org/#");
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn dedup_canonicalization_is_symmetric(a in "[a-z:]{1,8}", b in "[a-z:]{1,8}") {
                let ab = canonicalize_pair(a.as_str(), b.as_str(), Mode::Dedup);
                let ba = canonicalize_pair(b.as_str(), a.as_str(), Mode::Dedup);
                prop_assert_eq!(ab, ba);
            }
        }
    }
}
