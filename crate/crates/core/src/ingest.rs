//! Readers for the two supported input formats and the static property-rename
//! map used to align schemas.
//!
//! N-Triples subset, one statement per line:
//!
//! ```text
//! <subject-iri> <property-iri> <object-iri> .
//! <subject-iri> <property-iri> "literal" .
//! <subject-iri> <property-iri> "literal"^^<datatype-iri> .
//! ```
//!
//! Blank lines and `#` comments are skipped. Blank nodes and language tags are
//! rejected. The datatype IRI's local name selects the tag: `string`,
//! `integer`/`int`/`long`, `decimal`/`double`/`float` or `date`.
//!
//! CSV: RFC 4180 with a header row that must contain an `id` column. A header
//! cell may carry a datatype as `name^^date`; untyped columns are strings.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{local_name, Datatype, Dataset, Entity, Literal, ModelError, Object, Triple};

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
const XSD: &str = "http://www.w3.org/2001/XMLSchema#";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {message}: {text:?}")]
    Syntax { line: usize, text: String, message: String },
    #[error("line {line}: unsupported feature ({feature}): {text:?}")]
    Unsupported { line: usize, feature: &'static str, text: String },
    #[error("line {line}: {source}")]
    Value { line: usize, source: ModelError },
    #[error("line {line}: row has {got} cells, header has {expected}")]
    RaggedRow { line: usize, expected: usize, got: usize },
    #[error("CSV header has no `id` column")]
    MissingIdColumn,
    #[error("CSV header repeats column {0:?}")]
    DuplicateColumn(String),
    #[error("line {line}: duplicate entity id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("property map sends both {first:?} and {second:?} to {target:?}")]
    NonInjectiveMap { first: String, second: String, target: String },
    #[error("property map line {line}: expected two tab-separated columns")]
    MapSyntax { line: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Static rename map from source property names to target names.
/// Unmapped names pass through unchanged.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PropertyMap {
    renames: BTreeMap<String, String>,
}

impl PropertyMap {
    pub fn new(renames: BTreeMap<String, String>) -> Result<Self, IngestError> {
        let mut seen: HashMap<&str, &str> = HashMap::new();
        for (src, dst) in &renames {
            if let Some(first) = seen.insert(dst, src) {
                return Err(IngestError::NonInjectiveMap {
                    first: first.to_owned(),
                    second: src.clone(),
                    target: dst.clone(),
                });
            }
        }
        // A target that is itself renamed elsewhere would merge two properties.
        for (src, dst) in &renames {
            if dst != src && renames.contains_key(dst) {
                return Err(IngestError::NonInjectiveMap {
                    first: dst.clone(),
                    second: src.clone(),
                    target: dst.clone(),
                });
            }
        }
        Ok(Self { renames })
    }

    pub fn from_pairs<I, S>(pairs: I) -> Result<Self, IngestError>
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        Self::new(pairs.into_iter().map(|(a, b)| (a.into(), b.into())).collect())
    }

    /// Two-column TSV, `source<TAB>target`, one rename per line.
    pub fn parse_tsv(text: &str) -> Result<Self, IngestError> {
        let mut renames = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            match (cols.next(), cols.next(), cols.next()) {
                (Some(a), Some(b), None) if !a.is_empty() && !b.is_empty() => {
                    renames.insert(a.to_owned(), b.to_owned());
                }
                _ => return Err(IngestError::MapSyntax { line: i + 1 }),
            }
        }
        Self::new(renames)
    }

    pub fn apply<'a>(&'a self, name: &'a str) -> &'a str {
        self.renames.get(name).map_or(name, String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.renames.is_empty()
    }
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn skip_ws(&mut self) {
        let rest = self.rest();
        self.pos += rest.len() - rest.trim_start_matches([' ', '\t']).len();
    }

    fn error(&self, message: impl Into<String>) -> IngestError {
        IngestError::Syntax { line: self.line, text: self.text.to_owned(), message: message.into() }
    }

    fn unsupported(&self, feature: &'static str) -> IngestError {
        IngestError::Unsupported { line: self.line, feature, text: self.text.to_owned() }
    }

    fn iri(&mut self, position: &str) -> Result<String, IngestError> {
        self.skip_ws();
        let rest = self.rest();
        if rest.starts_with("_:") {
            return Err(self.unsupported("blank node"));
        }
        if !rest.starts_with('<') {
            if rest.starts_with('"') {
                return Err(self.error(format!("literal in {position} position")));
            }
            return Err(self.error(format!("expected IRI in {position} position")));
        }
        let end = rest.find('>').ok_or_else(|| self.error("unterminated IRI"))?;
        let iri = &rest[1..end];
        if iri.is_empty() || iri.contains(|c: char| c.is_whitespace() || matches!(c, '<' | '"' | '{' | '}' | '\\')) {
            return Err(self.error(format!("invalid IRI in {position} position")));
        }
        self.pos += end + 1;
        Ok(iri.to_owned())
    }

    fn literal(&mut self) -> Result<Literal, IngestError> {
        // Opening quote already verified by the caller.
        self.pos += 1;
        let mut value = String::new();
        let mut chars = self.rest().char_indices();
        let close = loop {
            let Some((i, c)) = chars.next() else {
                return Err(self.error("unterminated literal"));
            };
            match c {
                '"' => break i,
                '\\' => match chars.next() {
                    Some((_, '"')) => value.push('"'),
                    Some((_, '\\')) => value.push('\\'),
                    Some((_, 'n')) => value.push('\n'),
                    Some((_, 't')) => value.push('\t'),
                    Some((_, 'r')) => value.push('\r'),
                    _ => return Err(self.error("unsupported escape sequence")),
                },
                c => value.push(c),
            }
        };
        self.pos += close + 1;
        let rest = self.rest();
        let datatype = if rest.starts_with("^^") {
            self.pos += 2;
            if !self.rest().starts_with('<') {
                return Err(self.error("expected datatype IRI after ^^"));
            }
            let iri = self.iri("datatype")?;
            datatype_for_iri(&iri).ok_or_else(|| self.unsupported("datatype IRI"))?
        } else if rest.starts_with('@') {
            return Err(self.unsupported("language tag"));
        } else {
            Datatype::String
        };
        Literal::new(value, datatype).map_err(|source| IngestError::Value { line: self.line, source })
    }
}

fn datatype_for_iri(iri: &str) -> Option<Datatype> {
    match local_name(iri).to_ascii_lowercase().as_str() {
        "string" => Some(Datatype::String),
        "integer" | "int" | "long" => Some(Datatype::Integer),
        "decimal" | "double" | "float" => Some(Datatype::Decimal),
        "date" => Some(Datatype::Date),
        _ => None,
    }
}

fn parse_line(raw: &str, line: usize) -> Result<Option<Triple>, IngestError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    let mut cur = Cursor { text: trimmed, pos: 0, line };
    let subject = cur.iri("subject")?;
    let property = cur.iri("property")?;
    cur.skip_ws();
    let object = match cur.rest().chars().next() {
        Some('"') => Object::Literal(cur.literal()?),
        Some('_') if cur.rest().starts_with("_:") => return Err(cur.unsupported("blank node")),
        Some('<') => Object::Iri(cur.iri("object")?),
        _ => return Err(cur.error("expected IRI or literal in object position")),
    };
    cur.skip_ws();
    let tail = cur.rest();
    let Some(after_dot) = tail.strip_prefix('.') else {
        return Err(cur.error("missing terminating `.`"));
    };
    let after_dot = after_dot.trim_start();
    if !(after_dot.is_empty() || after_dot.starts_with('#')) {
        return Err(cur.error("trailing content after `.`"));
    }
    Triple::new(subject, property, object)
        .map(Some)
        .map_err(|source| IngestError::Value { line, source })
}

/// Parses the supported N-Triples subset, returning triples in file order.
pub fn parse_ntriples(text: &str) -> Result<Vec<Triple>, IngestError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if let Some(t) = parse_line(raw, i + 1)? {
            out.push(t);
        }
    }
    Ok(out)
}

fn escape_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

/// Writes triples in the same subset `parse_ntriples` accepts.
pub fn serialize_ntriples(triples: &[Triple]) -> String {
    let mut out = String::new();
    for t in triples {
        let object = match t.object() {
            Object::Iri(iri) => format!("<{iri}>"),
            Object::Literal(lit) => match lit.datatype() {
                Datatype::String => format!("\"{}\"", escape_literal(lit.lexical())),
                dt => format!("\"{}\"^^<{XSD}{}>", escape_literal(lit.lexical()), dt.name()),
            },
        };
        out.push_str(&format!("<{}> <{}> {object} .\n", t.subject(), t.property()));
    }
    out
}

/// How triples become entities.
#[derive(Debug, Clone, Default)]
pub struct EntityOptions {
    /// Dataset name.
    pub name: String,
    /// Property (after renaming) whose value is the entity's mnemonic label.
    /// Without it, or when an entity lacks it, the label is the IRI local name.
    pub label_property: Option<String>,
    /// Only subjects typed (via `rdf:type`) with one of these IRIs are kept.
    /// URI objects are then not resolvable.
    pub type_filter: Option<BTreeSet<String>>,
}

/// Groups triples into one entity per subject, plus an all-missing entity for
/// every URI object that is never a subject. Repeated values of one property
/// are joined with `|` in first-seen order.
pub fn triples_to_entities(
    triples: &[Triple],
    mapping: &PropertyMap,
    opts: &EntityOptions,
) -> Result<Dataset, IngestError> {
    let mut subjects: BTreeMap<&str, BTreeMap<&str, Vec<Literal>>> = BTreeMap::new();
    let mut types: HashMap<&str, BTreeSet<&str>> = HashMap::new();
    let mut objects: BTreeSet<&str> = BTreeSet::new();
    for t in triples {
        let prop = mapping.apply(t.property());
        let value = match t.object() {
            Object::Iri(iri) => {
                objects.insert(iri);
                if t.property() == RDF_TYPE {
                    types.entry(t.subject()).or_default().insert(iri);
                }
                Literal::string(iri.clone())
            }
            Object::Literal(lit) => lit.clone(),
        };
        let values = subjects.entry(t.subject()).or_default().entry(prop).or_default();
        if !values.contains(&value) {
            values.push(value);
        }
    }

    if let Some(filter) = &opts.type_filter {
        subjects.retain(|s, _| types.get(s).is_some_and(|ts| ts.iter().any(|t| filter.contains(*t))));
    }

    let schema: Vec<String> = subjects
        .values()
        .flat_map(|props| props.keys().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(str::to_owned)
        .collect();
    let label_idx = opts.label_property.as_deref().and_then(|l| schema.iter().position(|f| f == l));

    let mut entities: BTreeMap<&str, Entity> = BTreeMap::new();
    for (subject, props) in &subjects {
        let fields: Vec<Option<Literal>> = schema
            .iter()
            .map(|f| {
                props.get(f.as_str()).map(|vals| match vals.as_slice() {
                    [single] => single.clone(),
                    many => Literal::string(
                        many.iter().map(Literal::lexical).collect::<Vec<_>>().join("|"),
                    ),
                })
            })
            .collect();
        let label = label_idx
            .and_then(|i| fields[i].as_ref())
            .map(|l| l.lexical().to_owned())
            .unwrap_or_else(|| local_name(subject).to_owned());
        entities.insert(subject, Entity { id: (*subject).to_owned(), label, fields });
    }
    if opts.type_filter.is_none() {
        for obj in objects {
            entities.entry(obj).or_insert_with(|| Entity {
                id: obj.to_owned(),
                label: local_name(obj).to_owned(),
                fields: vec![None; schema.len()],
            });
        }
    }

    Ok(Dataset::new(
        opts.name.clone(),
        schema,
        entities.into_values().collect(),
        opts.label_property.clone(),
    )?)
}

fn parse_header_cell(cell: &str) -> (String, Datatype) {
    if let Some((name, ty)) = cell.rsplit_once("^^") {
        if let Some(dt) = Datatype::from_name(ty) {
            return (name.to_owned(), dt);
        }
    }
    (cell.to_owned(), Datatype::String)
}

/// Parses a CSV table. Empty cells become missing values.
pub fn parse_csv(
    text: &str,
    name: &str,
    label_column: Option<&str>,
    mapping: &PropertyMap,
) -> Result<Dataset, IngestError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(text.as_bytes());
    let header: Vec<(String, Datatype)> = reader
        .headers()?
        .iter()
        .map(|cell| {
            let (n, dt) = parse_header_cell(cell);
            (mapping.apply(&n).to_owned(), dt)
        })
        .collect();
    let id_col = header.iter().position(|(n, _)| n == "id").ok_or(IngestError::MissingIdColumn)?;
    let mut seen = BTreeSet::new();
    for (n, _) in &header {
        if !seen.insert(n.as_str()) {
            return Err(IngestError::DuplicateColumn(n.clone()));
        }
    }
    let columns: Vec<usize> = (0..header.len()).filter(|&i| i != id_col).collect();
    let schema: Vec<String> = columns.iter().map(|&i| header[i].0.clone()).collect();
    let label_idx = label_column.and_then(|l| schema.iter().position(|f| f == l));

    let mut entities = Vec::new();
    let mut ids = HashMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(IngestError::RaggedRow { line, expected: header.len(), got: record.len() });
        }
        let id = record[id_col].to_owned();
        if id.is_empty() {
            return Err(IngestError::Value { line, source: ModelError::EmptyId });
        }
        if ids.insert(id.clone(), line).is_some() {
            return Err(IngestError::DuplicateId { line, id });
        }
        let fields = columns
            .iter()
            .map(|&i| match &record[i] {
                "" => Ok(None),
                cell => Literal::new(cell, header[i].1).map(Some),
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|source| IngestError::Value { line, source })?;
        let label = label_idx
            .and_then(|i| fields[i].as_ref())
            .map(|l| l.lexical().to_owned())
            .unwrap_or_else(|| local_name(&id).to_owned());
        entities.push(Entity { id, label, fields });
    }
    Ok(Dataset::new(name, schema, entities, label_column.map(str::to_owned))?)
}

/// Writes a dataset as CSV with an `id` column first. Columns whose present
/// values all share one non-string datatype carry a `^^type` header suffix.
pub fn write_csv(dataset: &Dataset) -> Result<String, IngestError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id".to_owned()];
    for (i, field) in dataset.schema().iter().enumerate() {
        let types: BTreeSet<Datatype> =
            dataset.entities().iter().filter_map(|e| e.field(i)).map(Literal::datatype).collect();
        match types.into_iter().collect::<Vec<_>>().as_slice() {
            [dt] if *dt != Datatype::String => header.push(format!("{field}^^{dt}")),
            _ => header.push(field.clone()),
        }
    }
    writer.write_record(&header)?;
    for e in dataset.entities() {
        let mut row = vec![e.id.as_str()];
        row.extend(e.fields.iter().map(|f| f.as_ref().map_or("", Literal::lexical)));
        writer.write_record(&row)?;
    }
    let bytes = writer.into_inner().map_err(|e| IngestError::Io {
        path: "<memory>".into(),
        source: std::io::Error::other(e.to_string()),
    })?;
    Ok(String::from_utf8(bytes).expect("csv writer emits the UTF-8 it was given"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Ntriples,
    Csv,
}

impl Format {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "nt" => Some(Self::Ntriples),
            "csv" => Some(Self::Csv),
            _ => None,
        }
    }
}

/// Options for `load_dataset`.
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub mapping: PropertyMap,
    /// Label property (N-Triples) or column (CSV).
    pub label: Option<String>,
    pub type_filter: Option<BTreeSet<String>>,
    /// Dataset name; defaults to the file stem.
    pub name: Option<String>,
}

pub fn read_file(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })
}

pub fn load_dataset(path: &Path, format: Format, opts: &LoadOptions) -> Result<Dataset, IngestError> {
    let text = read_file(path)?;
    let name = opts
        .name
        .clone()
        .unwrap_or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
    match format {
        Format::Csv => parse_csv(&text, &name, opts.label.as_deref(), &opts.mapping),
        Format::Ntriples => {
            let triples = parse_ntriples(&text)?;
            triples_to_entities(
                &triples,
                &opts.mapping,
                &EntityOptions { name, label_property: opts.label.clone(), type_filter: opts.type_filter.clone() },
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1_FIRST: &str = r#"
# first personal knowledge graph
<http://pkg1.org/John_Adams> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://pkg1.org/Person> .
<http://pkg1.org/John_Adams> <date_of_birth> "1998-03-02"^^<http://www.w3.org/2001/XMLSchema#date> .
<http://pkg1.org/John_Adams> <citizenship> <http://pkg1.org/USA> .
<http://pkg1.org/John_Adams> <gender> "male" .
"#;

    const FIG1_SECOND: &str = r#"
<http://pkg2.org/p7> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://pkg2.org/Person> .
<http://pkg2.org/p7> <name> "J. K. Adams" .
<http://pkg2.org/p7> <DOB> "2nd March 1998" .
<http://pkg2.org/p7> <citizenship> <http://pkg2.org/US> .
<http://pkg2.org/p7> <gender> "M" .
"#;

    fn opts(name: &str) -> EntityOptions {
        EntityOptions { name: name.into(), ..Default::default() }
    }

    #[test]
    fn single_string_triple() {
        let t = parse_ntriples(r#"<urn:p1> <urn:name> "John Adams" ."#).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].subject(), "urn:p1");
        assert_eq!(t[0].object(), &Object::Literal(Literal::string("John Adams")));
    }

    #[test]
    fn typed_date_literal() {
        let t = parse_ntriples(r#"<urn:p1> <urn:dob> "1998-03-02"^^<urn:date> ."#).unwrap();
        let Object::Literal(lit) = t[0].object() else { panic!("expected literal") };
        assert_eq!(lit.datatype(), Datatype::Date);
        assert_eq!(lit.lexical(), "1998-03-02");
    }

    #[test]
    fn grammar_conformance() {
        let ok = [
            r#"<urn:a> <urn:b> <urn:c> ."#,
            r#"<urn:a>	<urn:b>	"x" .   # trailing comment"#,
            r#"<urn:a> <urn:b> "42"^^<http://www.w3.org/2001/XMLSchema#integer>."#,
            r#"<urn:a> <urn:b> "say \"hi\"\\n\t" ."#,
        ];
        for line in ok {
            assert!(parse_ntriples(line).is_ok(), "{line}");
        }
        let t = parse_ntriples(ok[3]).unwrap();
        assert_eq!(t[0].object(), &Object::Literal(Literal::string("say \"hi\"\\n\t")));
        let bad = [
            r#"<urn:a> <urn:b> "x""#,
            r#""x" <urn:b> <urn:c> ."#,
            r#"<urn:a> "b" <urn:c> ."#,
            r#"<urn:a> <urn:b> "x" . junk"#,
            r#"<urn:a> <urn:b> "unterminated ."#,
            r#"<urn:a> <urn:b> "x"^^<urn:date> ."#,
            r#"<urn:a> <urn:b> "x"^^<urn:wibble> ."#,
            r#"<urn:a b> <urn:b> "x" ."#,
        ];
        for line in bad {
            assert!(parse_ntriples(line).is_err(), "{line}");
        }
    }

    #[test]
    fn unsupported_features_are_explicit() {
        for line in [r#"_:b1 <urn:name> "X" ."#, r#"<urn:a> <urn:b> _:b2 ."#, r#"<urn:a> <urn:b> "x"@en ."#] {
            match parse_ntriples(line) {
                Err(IngestError::Unsupported { line: 1, .. }) => {}
                other => panic!("{line}: {other:?}"),
            }
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "<urn:a> <urn:b> <urn:c> .\n\n<urn:a> <urn:b> oops .\n";
        match parse_ntriples(text) {
            Err(IngestError::Syntax { line, text, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(text, "<urn:a> <urn:b> oops .");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fig1_first_fragment_entity() {
        let triples = parse_ntriples(FIG1_FIRST).unwrap();
        let d = triples_to_entities(&triples, &PropertyMap::default(), &opts("pkg1")).unwrap();
        let john = d.get("http://pkg1.org/John_Adams").unwrap();
        assert_eq!(john.label, "John_Adams");
        let dob = d.field_index("date_of_birth").unwrap();
        assert_eq!(john.field(dob).unwrap().lexical(), "1998-03-02");
        assert_eq!(john.field(dob).unwrap().datatype(), Datatype::Date);
        let cit = d.field_index("citizenship").unwrap();
        assert_eq!(john.field(cit).unwrap().lexical(), "http://pkg1.org/USA");
        assert!(john.field(d.field_index("gender").unwrap()).is_some());
        // URI objects are resolvable, with every field missing.
        let usa = d.get("http://pkg1.org/USA").unwrap();
        assert!(usa.fields.iter().all(Option::is_none));
        assert!(d.get("http://pkg1.org/Person").is_some());
        // Type filter keeps only typed subjects.
        let filtered = triples_to_entities(
            &triples,
            &PropertyMap::default(),
            &EntityOptions {
                type_filter: Some(["http://pkg1.org/Person".to_owned()].into()),
                ..opts("pkg1")
            },
        )
        .unwrap();
        assert_eq!(filtered.len(), 1);
    }

    #[test]
    fn aligned_schemas_after_mapping() {
        let map = PropertyMap::from_pairs([("DOB", "date_of_birth")]).unwrap();
        let one = triples_to_entities(&parse_ntriples(FIG1_FIRST).unwrap(), &PropertyMap::default(), &opts("a"))
            .unwrap();
        let two = triples_to_entities(&parse_ntriples(FIG1_SECOND).unwrap(), &map, &opts("b")).unwrap();
        assert!(two.field_index("date_of_birth").is_some());
        assert!(two.field_index("DOB").is_none());
        // The second graph also has a name; every field of the first is present in the second.
        for f in one.schema() {
            assert!(two.schema().contains(f), "{f}");
        }
    }

    #[test]
    fn empty_triples_empty_dataset() {
        let d = triples_to_entities(&[], &PropertyMap::default(), &opts("e")).unwrap();
        assert!(d.is_empty());
        assert!(d.schema().is_empty());
    }

    #[test]
    fn multi_values_join_in_first_seen_order() {
        let text = "<urn:s> <urn:p> \"A\" .\n<urn:s> <urn:p> \"B\" .\n<urn:s> <urn:p> \"A\" .\n";
        let d = triples_to_entities(&parse_ntriples(text).unwrap(), &PropertyMap::default(), &opts("m")).unwrap();
        assert_eq!(d.get("urn:s").unwrap().fields[0].as_ref().unwrap().lexical(), "A|B");
    }

    #[test]
    fn label_property() {
        let map = PropertyMap::from_pairs([("DOB", "date_of_birth")]).unwrap();
        let d = triples_to_entities(
            &parse_ntriples(FIG1_SECOND).unwrap(),
            &map,
            &EntityOptions { label_property: Some("name".into()), ..opts("b") },
        )
        .unwrap();
        assert_eq!(d.get("http://pkg2.org/p7").unwrap().label, "J. K. Adams");
    }

    #[test]
    fn property_map_must_be_injective() {
        assert!(matches!(
            PropertyMap::from_pairs([("a", "x"), ("b", "x")]),
            Err(IngestError::NonInjectiveMap { .. })
        ));
        assert!(PropertyMap::from_pairs([("a", "b"), ("b", "c")]).is_err());
        let m = PropertyMap::parse_tsv("DOB\tdate_of_birth\n# comment\n").unwrap();
        assert_eq!(m.apply("DOB"), "date_of_birth");
        assert_eq!(m.apply("name"), "name");
        assert!(PropertyMap::parse_tsv("only-one-column\n").is_err());
    }

    const FIG3: &str = "id,first,last,zipcode,dob\n\
        1,John,Adams,90292,1998-03-02\n\
        2,Jon,Adams,90210,1998-03-02\n\
        3,James,Allen,90301,1975-11-20\n\
        4,Jim,Allen,90302,\n\
        5,Kate,Baker,10001,1980-01-05\n";

    #[test]
    fn csv_table() {
        let d = parse_csv(FIG3, "fig3", None, &PropertyMap::default()).unwrap();
        assert_eq!(d.len(), 5);
        assert_eq!(d.schema(), ["first", "last", "zipcode", "dob"]);
        let four = d.get("4").unwrap();
        assert_eq!(four.field(3), None);
    }

    #[test]
    fn csv_header_only_and_schema_size() {
        let d = parse_csv("id,name,dob\n", "e", None, &PropertyMap::default()).unwrap();
        assert!(d.is_empty());
        assert_eq!(d.schema().len(), 2);
        let d = parse_csv("id,name,dob\na,x,1\nb,y,2\nc,z,3\n", "e", None, &PropertyMap::default()).unwrap();
        assert_eq!((d.schema().len(), d.len()), (2, 3));
    }

    #[test]
    fn csv_quoting() {
        let d = parse_csv("id,name\n1,\"Adams, John\"\n", "q", Some("name"), &PropertyMap::default()).unwrap();
        assert_eq!(d.get("1").unwrap().fields[0].as_ref().unwrap().lexical(), "Adams, John");
        assert_eq!(d.get("1").unwrap().label, "Adams, John");
    }

    #[test]
    fn csv_errors() {
        let pm = PropertyMap::default();
        assert!(matches!(parse_csv("name\nx\n", "e", None, &pm), Err(IngestError::MissingIdColumn)));
        assert!(matches!(
            parse_csv("id,name\n1,x\n2\n", "e", None, &pm),
            Err(IngestError::RaggedRow { line: 3, .. })
        ));
        assert!(matches!(
            parse_csv("id,name\n1,x\n1,y\n", "e", None, &pm),
            Err(IngestError::DuplicateId { line: 3, .. })
        ));
        assert!(matches!(
            parse_csv("id,dob^^date\n1,March\n", "e", None, &pm),
            Err(IngestError::Value { line: 2, .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let text = "id,name,age^^integer,dob^^date\n\
            u1,\"Adams, John\",31,1998-03-02\n\
            u2,,7,\n\
            u3,\"say \"\"hi\"\"\",,2001-12-31\n";
        let d = parse_csv(text, "r", Some("name"), &PropertyMap::default()).unwrap();
        let again = parse_csv(&write_csv(&d).unwrap(), "r", Some("name"), &PropertyMap::default()).unwrap();
        assert_eq!(d, again);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn literal() -> impl Strategy<Value = Literal> {
            prop_oneof![
                "[a-zA-Z0-9 ,.\"\\\\\t\n|-]{0,12}".prop_map(Literal::string),
                (-1000i64..1000).prop_map(|i| Literal::new(i.to_string(), Datatype::Integer).unwrap()),
                (1900i32..2030, 1u32..13, 1u32..29).prop_map(|(y, m, d)| Literal::new(
                    format!("{y:04}-{m:02}-{d:02}"),
                    Datatype::Date
                )
                .unwrap()),
            ]
        }

        fn triple() -> impl Strategy<Value = Triple> {
            (
                "urn:s[0-4]",
                "urn:p[0-3]",
                prop_oneof!["urn:o[0-3]".prop_map(Object::Iri), literal().prop_map(Object::Literal)],
            )
                .prop_map(|(s, p, o)| Triple::new(s, p, o).unwrap())
        }

        proptest! {
            #[test]
            fn ntriples_round_trip(ts in proptest::collection::vec(triple(), 0..20)) {
                prop_assert_eq!(parse_ntriples(&serialize_ntriples(&ts)).unwrap(), ts);
            }

            #[test]
            fn entity_grouping_ignores_triple_order(
                ts in proptest::collection::vec(triple(), 0..20),
                seed in any::<u64>(),
            ) {
                use rand::seq::SliceRandom;
                use rand::SeedableRng;
                // One value per (subject, property) so the join order cannot matter.
                let mut seen = BTreeSet::new();
                let ts: Vec<Triple> = ts
                    .into_iter()
                    .filter(|t| seen.insert((t.subject().to_owned(), t.property().to_owned())))
                    .collect();
                let mut shuffled = ts.clone();
                shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
                let o = EntityOptions::default();
                let pm = PropertyMap::default();
                prop_assert_eq!(
                    triples_to_entities(&ts, &pm, &o).unwrap(),
                    triples_to_entities(&shuffled, &pm, &o).unwrap()
                );
            }

            #[test]
            fn renaming_commutes_with_schema_building(ts in proptest::collection::vec(triple(), 0..20)) {
                let map = PropertyMap::from_pairs([("urn:p0", "urn:z0"), ("urn:p2", "urn:a2")]).unwrap();
                let o = EntityOptions::default();
                let mapped = triples_to_entities(&ts, &map, &o).unwrap();
                let plain = triples_to_entities(&ts, &PropertyMap::default(), &o).unwrap();
                let mut renamed: Vec<String> = plain.schema().iter().map(|f| map.apply(f).to_owned()).collect();
                renamed.sort();
                prop_assert_eq!(mapped.schema(), renamed.as_slice());
            }
        }
    }
}
