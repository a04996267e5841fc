//! Blocking keys: declarative extractors mapping an entity to a non-empty set
//! of blocking key values (BKVs).
//!
//! Text form, used by configs and the CLI:
//!
//! ```text
//! tokens(:instance) | year(date_of_birth)
//! concat(initials(first), initials(last), prefix(zipcode, 2))
//! ```
//!
//! `:instance` names the entity's label. Transforms: `tokens`,
//! `lower_tokens`, `year`, `year_last`, `prefix(field, k)`, `exact`,
//! `initials`. Clauses joined by `|` contribute the union of their values.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::model::{Dataset, Entity};
use crate::text::{split_tokens, year};

use super::BlockingError;

pub const LABEL_FIELD: &str = ":instance";

/// A field of the schema, or the entity label.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FieldRef {
    Label,
    Named(String),
}

impl FieldRef {
    pub fn parse(s: &str) -> Self {
        if s == LABEL_FIELD {
            Self::Label
        } else {
            Self::Named(s.to_owned())
        }
    }

    pub fn resolve(&self, dataset: &Dataset) -> Result<ResolvedField, BlockingError> {
        match self {
            Self::Label => Ok(ResolvedField::Label),
            Self::Named(name) => dataset.field_index(name).map(ResolvedField::Index).ok_or_else(|| {
                BlockingError::UnknownField { field: name.clone(), dataset: dataset.name().to_owned() }
            }),
        }
    }
}

impl fmt::Display for FieldRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Label => f.write_str(LABEL_FIELD),
            Self::Named(n) => f.write_str(n),
        }
    }
}

/// A field reference bound to one dataset's schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolvedField {
    Label,
    Index(usize),
}

impl ResolvedField {
    pub fn value(self, e: &Entity) -> Option<&str> {
        match self {
            Self::Label => Some(e.label.as_str()).filter(|s| !s.is_empty()),
            Self::Index(i) => e.field(i).map(|l| l.lexical()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transform {
    /// Tokens split on non-alphanumeric runs, case preserved.
    Tokens,
    /// Lowercased tokens.
    LowerTokens,
    /// First 4-digit run (or last, with `from_end`).
    Year { from_end: bool },
    /// First `k` characters.
    Prefix(usize),
    /// The whole value.
    Exact,
    /// First character of every token, concatenated.
    Initials,
}

impl Transform {
    fn apply(self, value: &str) -> Vec<String> {
        match self {
            Self::Tokens => split_tokens(value).map(str::to_owned).collect(),
            Self::LowerTokens => split_tokens(value).map(str::to_lowercase).collect(),
            Self::Year { from_end } => year(value, from_end).map(str::to_owned).into_iter().collect(),
            Self::Prefix(k) => vec![value.chars().take(k).collect()],
            Self::Exact => vec![value.to_owned()],
            Self::Initials => {
                let s: String = split_tokens(value).filter_map(|t| t.chars().next()).collect();
                if s.is_empty() {
                    Vec::new()
                } else {
                    vec![s]
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clause {
    pub field: FieldRef,
    pub transform: Transform,
}

impl Clause {
    pub fn new(field: FieldRef, transform: Transform) -> Self {
        Self { field, transform }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.transform {
            Transform::Tokens => write!(f, "tokens({})", self.field),
            Transform::LowerTokens => write!(f, "lower_tokens({})", self.field),
            Transform::Year { from_end: false } => write!(f, "year({})", self.field),
            Transform::Year { from_end: true } => write!(f, "year_last({})", self.field),
            Transform::Prefix(k) => write!(f, "prefix({}, {k})", self.field),
            Transform::Exact => write!(f, "exact({})", self.field),
            Transform::Initials => write!(f, "initials({})", self.field),
        }
    }
}

/// One `|`-separated component of a key.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum KeyPart {
    Clause(Clause),
    /// Concatenation of the sub-clauses' values into a single string.
    Concat(Vec<Clause>),
}

impl fmt::Display for KeyPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Clause(c) => c.fmt(f),
            Self::Concat(cs) => {
                let inner: Vec<String> = cs.iter().map(ToString::to_string).collect();
                write!(f, "concat({})", inner.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlockingKeySpec {
    parts: Vec<KeyPart>,
    single_value: bool,
}

impl BlockingKeySpec {
    pub fn new(parts: Vec<KeyPart>) -> Result<Self, BlockingError> {
        if parts.is_empty() {
            return Err(BlockingError::InvalidKey("a key needs at least one clause".into()));
        }
        let key = Self { parts, single_value: false };
        key.check_clauses()?;
        Ok(key)
    }

    /// Single-value key: exactly one concatenation group, so every entity
    /// gets exactly one BKV.
    pub fn single(group: Vec<Clause>) -> Result<Self, BlockingError> {
        if group.is_empty() {
            return Err(BlockingError::InvalidKey("empty concat group".into()));
        }
        let key = Self { parts: vec![KeyPart::Concat(group)], single_value: true };
        key.check_clauses()?;
        Ok(key)
    }

    /// Converts a one-part key into single-value mode. A lone clause becomes a
    /// one-element concat group.
    pub fn into_single_value(self) -> Result<Self, BlockingError> {
        if self.single_value {
            return Ok(self);
        }
        match <[KeyPart; 1]>::try_from(self.parts) {
            Ok([KeyPart::Concat(group)]) => Self::single(group),
            Ok([KeyPart::Clause(c)]) => Self::single(vec![c]),
            Err(_) => Err(BlockingError::InvalidKey(
                "single-value mode requires exactly one concat group".into(),
            )),
        }
    }

    fn check_clauses(&self) -> Result<(), BlockingError> {
        for c in self.clauses() {
            if c.transform == Transform::Prefix(0) {
                return Err(BlockingError::InvalidKey("prefix length must be at least 1".into()));
            }
        }
        Ok(())
    }

    pub fn is_single_value(&self) -> bool {
        self.single_value
    }

    pub fn parts(&self) -> &[KeyPart] {
        &self.parts
    }

    fn clauses(&self) -> impl Iterator<Item = &Clause> {
        self.parts.iter().flat_map(|p| match p {
            KeyPart::Clause(c) => std::slice::from_ref(c),
            KeyPart::Concat(cs) => cs.as_slice(),
        })
    }

    /// Binds field references to a dataset's schema.
    pub fn compile(&self, dataset: &Dataset) -> Result<CompiledKey, BlockingError> {
        let bind = |c: &Clause| Ok::<_, BlockingError>((c.field.resolve(dataset)?, c.transform));
        let parts = self
            .parts
            .iter()
            .map(|p| match p {
                KeyPart::Clause(c) => Ok(CompiledPart::Clause(bind(c)?)),
                KeyPart::Concat(cs) => Ok(CompiledPart::Concat(cs.iter().map(bind).collect::<Result<_, _>>()?)),
            })
            .collect::<Result<_, BlockingError>>()?;
        Ok(CompiledKey { parts })
    }
}

impl fmt::Display for BlockingKeySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.parts.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(" | "))
    }
}

impl FromStr for BlockingKeySpec {
    type Err = BlockingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts = split_top_level(s, '|')?
            .into_iter()
            .map(|p| parse_part(p.trim()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(parts)
    }
}

fn split_top_level(s: &str, sep: char) -> Result<Vec<&str>, BlockingError> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return Err(BlockingError::InvalidKey(format!("unbalanced `)` in {s:?}")));
                }
            }
            c if c == sep && depth == 0 => {
                out.push(&s[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(BlockingError::InvalidKey(format!("unbalanced `(` in {s:?}")));
    }
    out.push(&s[start..]);
    Ok(out)
}

fn call(s: &str) -> Result<(&str, &str), BlockingError> {
    let bad = || BlockingError::InvalidKey(format!("expected name(args), got {s:?}"));
    let open = s.find('(').ok_or_else(bad)?;
    let inner = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
    Ok((s[..open].trim(), inner))
}

fn parse_part(s: &str) -> Result<KeyPart, BlockingError> {
    let (name, inner) = call(s)?;
    if name == "concat" {
        let clauses = split_top_level(inner, ',')?
            .into_iter()
            .map(|c| parse_clause(c.trim()))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(KeyPart::Concat(clauses));
    }
    parse_clause(s).map(KeyPart::Clause)
}

fn parse_clause(s: &str) -> Result<Clause, BlockingError> {
    let (name, inner) = call(s)?;
    let args: Vec<&str> = inner.split(',').map(str::trim).collect();
    let field = |args: &[&str]| -> Result<FieldRef, BlockingError> {
        match args.first() {
            Some(f) if !f.is_empty() && !f.contains(char::is_whitespace) => Ok(FieldRef::parse(f)),
            _ => Err(BlockingError::InvalidKey(format!("missing field in {s:?}"))),
        }
    };
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(BlockingError::InvalidKey(format!("{name} takes {n} argument(s) in {s:?}")))
        }
    };
    let transform = match name {
        "tokens" => Transform::Tokens,
        "lower_tokens" => Transform::LowerTokens,
        "year" => Transform::Year { from_end: false },
        "year_last" => Transform::Year { from_end: true },
        "exact" => Transform::Exact,
        "initials" => Transform::Initials,
        "prefix" => {
            arity(2)?;
            let k: usize = args[1]
                .parse()
                .map_err(|_| BlockingError::InvalidKey(format!("bad prefix length in {s:?}")))?;
            Transform::Prefix(k)
        }
        other => return Err(BlockingError::InvalidKey(format!("unknown transform {other:?}"))),
    };
    if !matches!(transform, Transform::Prefix(_)) {
        arity(1)?;
    }
    Ok(Clause { field: field(&args)?, transform })
}

#[derive(Debug, Clone)]
enum CompiledPart {
    Clause((ResolvedField, Transform)),
    Concat(Vec<(ResolvedField, Transform)>),
}

/// A key bound to one dataset; applies to that dataset's entities.
#[derive(Debug, Clone)]
pub struct CompiledKey {
    parts: Vec<CompiledPart>,
}

impl CompiledKey {
    /// BKVs of `e`: the union of every part's values, or `{id}` when no part
    /// yields anything.
    pub fn apply(&self, e: &Entity) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for part in &self.parts {
            match part {
                CompiledPart::Clause((field, t)) => {
                    if let Some(v) = field.value(e) {
                        out.extend(t.apply(v).into_iter().filter(|s| !s.is_empty()));
                    }
                }
                CompiledPart::Concat(group) => {
                    let joined: String = group
                        .iter()
                        .filter_map(|(field, t)| field.value(e).map(|v| t.apply(v).concat()))
                        .collect();
                    if !joined.is_empty() {
                        out.insert(joined);
                    }
                }
            }
        }
        if out.is_empty() {
            out.insert(e.id.clone());
        }
        out
    }

    /// The single BKV of a single-value key.
    pub fn apply_single(&self, e: &Entity) -> String {
        let mut set = self.apply(e);
        debug_assert!(set.len() == 1, "single-value key yielded {set:?}");
        set.pop_first().expect("apply never returns an empty set")
    }
}

/// Compiles `key` against `dataset` and applies it to `e`.
pub fn apply_key(key: &BlockingKeySpec, dataset: &Dataset, e: &Entity) -> Result<BTreeSet<String>, BlockingError> {
    Ok(key.compile(dataset)?.apply(e))
}
