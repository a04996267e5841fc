//! Seeded synthetic person corpus with injected, corrupted duplicates.

use std::collections::BTreeSet;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{canonicalize_pair, Dataset, Entity, GroundTruth, Literal, Mode};
use crate::similarity::LabeledPair;

const FIRST: &[&str] = &[
    "John", "Mary", "James", "Anna", "Robert", "Linda", "Michael", "Sarah", "David", "Karen", "Peter", "Laura",
    "Thomas", "Emma", "Daniel", "Grace", "Samuel", "Alice", "George", "Helen", "Oscar", "Irene", "Victor", "Nora",
];
const MIDDLE: &[&str] = &["Kenneth", "Lee", "Marie", "Ray", "Jane", "Paul", "Rose", "Dean", "Ann", "Joseph"];
const LAST: &[&str] = &[
    "Adams", "Baker", "Clark", "Davis", "Evans", "Foster", "Garcia", "Hughes", "Irwin", "Jensen", "Keller", "Lopez",
    "Miller", "Nolan", "Owens", "Parker", "Quinn", "Reyes", "Smith", "Turner", "Upton", "Vargas", "Walsh", "Young",
    "Zimmer", "Bishop", "Carter", "Dixon", "Ellis", "Fisher",
];
const CITY: &[&str] = &[
    "Boston", "Denver", "Austin", "Seattle", "Chicago", "Portland", "Phoenix", "Atlanta", "Dallas", "Miami",
];

/// Field names of generated datasets; `name` is also the label column.
pub const CORPUS_SCHEMA: [&str; 3] = ["name", "dob", "city"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Corruption {
    /// One character of the name replaced.
    Typo,
    /// One name token dropped (names with at least two tokens).
    TokenDrop,
    /// Given names reduced to initials: "J. K. Adams".
    Initialism,
    /// Date of birth reduced to its year.
    YearOnlyDob,
}

impl FromStr for Corruption {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "typo" => Ok(Self::Typo),
            "token-drop" => Ok(Self::TokenDrop),
            "initialism" => Ok(Self::Initialism),
            "year-only-dob" => Ok(Self::YearOnlyDob),
            other => Err(format!("unknown corruption {other:?}; expected typo, token-drop, initialism or year-only-dob")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpusSpec {
    pub num_entities: usize,
    /// Share of D1 entities that get a duplicate in D2.
    pub duplicate_fraction: f64,
    pub ops: BTreeSet<Corruption>,
    /// Probability that each op in `ops` is applied to a given duplicate.
    pub corruption_rate: f64,
    pub seed: u64,
}

impl SyntheticCorpusSpec {
    pub fn new(num_entities: usize, duplicate_fraction: f64, ops: impl IntoIterator<Item = Corruption>, seed: u64) -> Self {
        Self { num_entities, duplicate_fraction, ops: ops.into_iter().collect(), corruption_rate: 0.5, seed }
    }

    pub fn with_rate(mut self, rate: f64) -> Self {
        self.corruption_rate = rate;
        self
    }

    pub fn duplicates(&self) -> usize {
        (self.num_entities as f64 * self.duplicate_fraction).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub d1: Dataset,
    pub d2: Dataset,
    pub ground_truth: GroundTruth,
}

#[derive(Debug, Clone)]
struct Person {
    name: String,
    dob: String,
    city: String,
}

fn person(rng: &mut impl Rng) -> Person {
    let mut name = FIRST.choose(rng).expect("non-empty").to_string();
    if rng.gen_bool(0.4) {
        name.push(' ');
        name.push_str(MIDDLE.choose(rng).expect("non-empty"));
    }
    name.push(' ');
    name.push_str(LAST.choose(rng).expect("non-empty"));
    let dob = format!("{}-{:02}-{:02}", rng.gen_range(1940..2006), rng.gen_range(1..=12), rng.gen_range(1..=28));
    Person { name, dob, city: CITY.choose(rng).expect("non-empty").to_string() }
}

fn corrupt(p: &Person, op: Corruption, rng: &mut impl Rng) -> Person {
    let mut out = p.clone();
    match op {
        Corruption::Typo => {
            let chars: Vec<char> = p.name.chars().collect();
            let letters: Vec<usize> = (0..chars.len()).filter(|&i| chars[i].is_alphabetic()).collect();
            if let Some(&i) = letters.choose(rng) {
                let mut c = chars[i];
                while c == chars[i] {
                    c = rng.gen_range(b'a'..=b'z') as char;
                }
                out.name = chars.iter().enumerate().map(|(j, &x)| if j == i { c } else { x }).collect();
            }
        }
        Corruption::TokenDrop => {
            let mut tokens: Vec<&str> = p.name.split(' ').collect();
            if tokens.len() > 1 {
                tokens.remove(rng.gen_range(0..tokens.len()));
                out.name = tokens.join(" ");
            }
        }
        Corruption::Initialism => {
            let tokens: Vec<&str> = p.name.split(' ').collect();
            if let Some((last, given)) = tokens.split_last() {
                let mut parts: Vec<String> =
                    given.iter().filter_map(|t| t.chars().next()).map(|c| format!("{c}.")).collect();
                parts.push((*last).to_owned());
                out.name = parts.join(" ");
            }
        }
        Corruption::YearOnlyDob => out.dob = p.dob[..4].to_owned(),
    }
    out
}

fn entity(id: String, p: &Person) -> Entity {
    Entity {
        id,
        label: p.name.clone(),
        fields: vec![Some(Literal::string(&p.name)), Some(Literal::string(&p.dob)), Some(Literal::string(&p.city))],
    }
}

fn dataset(name: &str, entities: Vec<Entity>) -> Dataset {
    let schema = CORPUS_SCHEMA.iter().map(|s| s.to_string()).collect();
    Dataset::new(name, schema, entities, Some("name".into())).expect("generated ids are unique")
}

/// D1 holds `num_entities` people. D2 holds the same number: round(n ·
/// fraction) corrupted copies of distinct D1 people plus fresh people, in
/// shuffled order. Every copy is recorded in the ground truth.
pub fn generate_corpus(spec: &SyntheticCorpusSpec) -> Result<SyntheticCorpus, String> {
    if !(0.0..=1.0).contains(&spec.duplicate_fraction) {
        return Err(format!("duplicate fraction {} is outside [0, 1]", spec.duplicate_fraction));
    }
    if !(0.0..=1.0).contains(&spec.corruption_rate) {
        return Err(format!("corruption rate {} is outside [0, 1]", spec.corruption_rate));
    }
    let n = spec.num_entities;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let people: Vec<Person> = (0..n).map(|_| person(&mut rng)).collect();
    let d1_ids: Vec<String> = (0..n).map(|i| format!("urn:d1:{i:05}")).collect();

    let mut picked: Vec<usize> = (0..n).collect();
    picked.shuffle(&mut rng);
    picked.truncate(spec.duplicates());

    // (source person index in D1, record) for every D2 row, before shuffling.
    let mut rows: Vec<(Option<usize>, Person)> = Vec::with_capacity(n);
    for &i in &picked {
        let mut p = people[i].clone();
        for &op in &spec.ops {
            if rng.gen_bool(spec.corruption_rate) {
                p = corrupt(&p, op, &mut rng);
            }
        }
        rows.push((Some(i), p));
    }
    while rows.len() < n {
        rows.push((None, person(&mut rng)));
    }
    rows.shuffle(&mut rng);

    let mut matches = BTreeSet::new();
    let mut d2 = Vec::with_capacity(n);
    for (j, (src, p)) in rows.iter().enumerate() {
        let id = format!("urn:d2:{j:05}");
        if let Some(i) = src {
            matches.insert(canonicalize_pair(d1_ids[*i].as_str(), id.as_str(), Mode::Bilateral).expect("non-empty ids"));
        }
        d2.push(entity(id, p));
    }
    let d1 = people.iter().zip(d1_ids).map(|(p, id)| entity(id, p)).collect();
    Ok(SyntheticCorpus { d1: dataset("d1", d1), d2: dataset("d2", d2), ground_truth: GroundTruth::new(matches) })
}

/// Every ground-truth pair as a positive example plus as many seeded random
/// non-matching pairs as negatives.
pub fn training_pairs(corpus: &SyntheticCorpus, seed: u64) -> Vec<LabeledPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<LabeledPair> =
        corpus.ground_truth.matches().iter().map(|p| LabeledPair { pair: p.clone(), is_duplicate: true }).collect();
    let (l, r) = (corpus.d1.entities(), corpus.d2.entities());
    let target = out.len() * 2;
    let possible = (l.len() * r.len()).saturating_sub(corpus.ground_truth.len());
    let mut negatives = BTreeSet::new();
    while out.len() + negatives.len() < target && negatives.len() < possible {
        let pair = canonicalize_pair(l[rng.gen_range(0..l.len())].id.as_str(), r[rng.gen_range(0..r.len())].id.as_str(), Mode::Bilateral)
            .expect("non-empty ids");
        if !corpus.ground_truth.contains(&pair) {
            negatives.insert(pair);
        }
    }
    out.extend(negatives.into_iter().map(|pair| LabeledPair { pair, is_duplicate: false }));
    out.sort_by(|a, b| a.pair.cmp(&b.pair));
    out
}
