//! Canopy clustering over a cheap distance.
//!
//! A seed's canopy holds every still-available entity closer than `loose`;
//! entities closer than `tight` (and the seed) then leave the pool. In
//! bilateral mode seeds come only from the smaller dataset, in ascending id
//! order. In dedup mode seeds run in ascending id order, or in a seeded random
//! order.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{CandidateSet, Member, Side, Sources};
use crate::par;
use crate::text::{jaccard, normalized_levenshtein, token_set};

use super::{resolve_per_side, Block, BlockingError, BlockingMethod, FieldRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    /// 1 − Jaccard similarity of lowercased token sets.
    JaccardTokens,
    /// Edit distance divided by the longer length.
    NormalizedLevenshtein,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SeedOrder {
    #[default]
    Ascending,
    Random(u64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanopyParams {
    tight: f64,
    loose: f64,
    distance: Distance,
    seed_order: SeedOrder,
}

impl CanopyParams {
    pub fn new(tight: f64, loose: f64, distance: Distance) -> Result<Self, BlockingError> {
        if !(tight.is_finite() && loose.is_finite() && 0.0 <= tight && tight <= loose) {
            return Err(BlockingError::InvalidParams(format!(
                "canopy thresholds need 0 <= tight <= loose, got tight={tight} loose={loose}"
            )));
        }
        Ok(Self { tight, loose, distance, seed_order: SeedOrder::Ascending })
    }

    /// Seed order for dedup mode; bilateral mode always seeds in id order.
    pub fn with_seed_order(mut self, order: SeedOrder) -> Self {
        self.seed_order = order;
        self
    }

    pub fn tight(&self) -> f64 {
        self.tight
    }

    pub fn loose(&self) -> f64 {
        self.loose
    }

    pub fn distance(&self) -> Distance {
        self.distance
    }

    pub fn seed_order(&self) -> SeedOrder {
        self.seed_order
    }
}

enum Features {
    Tokens(Vec<Option<BTreeSet<String>>>),
    Strings(Vec<Option<String>>),
}

impl Features {
    /// Missing values are at distance 1 from everything.
    fn distance(&self, a: usize, b: usize) -> f64 {
        match self {
            Self::Tokens(v) => match (&v[a], &v[b]) {
                (Some(x), Some(y)) => 1.0 - jaccard(x, y),
                _ => 1.0,
            },
            Self::Strings(v) => match (&v[a], &v[b]) {
                (Some(x), Some(y)) => 1.0 - normalized_levenshtein(x, y),
                _ => 1.0,
            },
        }
    }
}

/// Builds the canopies. Entities never reached by a seed's loose radius get
/// a singleton canopy, so every entity belongs to at least one block.
pub fn build_canopies(params: &CanopyParams, field: &FieldRef, sources: &Sources<'_>) -> Result<Vec<Block>, BlockingError> {
    let resolved = resolve_per_side(field, sources)?;
    let members = sources.members();
    let values: Vec<Option<&str>> = members
        .iter()
        .map(|m| {
            let (_, f) = resolved.iter().find(|(s, _)| *s == m.side).expect("every side resolved");
            f.value(sources.entity(*m))
        })
        .collect();
    let features = match params.distance {
        Distance::JaccardTokens => Features::Tokens(values.iter().map(|v| v.map(token_set)).collect()),
        Distance::NormalizedLevenshtein => {
            Features::Strings(values.iter().map(|v| v.map(str::to_owned)).collect())
        }
    };

    let id = |i: usize| sources.entity(members[i]).id.as_str();
    let mut seeds: Vec<usize> = match sources.right {
        Some(right) => {
            let left = sources.left;
            let seed_side = if (left.len(), left.name()) <= (right.len(), right.name()) { Side::Left } else { Side::Right };
            (0..members.len()).filter(|&i| members[i].side == seed_side).collect()
        }
        None => (0..members.len()).collect(),
    };
    seeds.sort_by(|&a, &b| id(a).cmp(id(b)));
    if let (None, SeedOrder::Random(seed)) = (sources.right, params.seed_order) {
        seeds.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }

    let mut available = vec![true; members.len()];
    let mut assigned = vec![false; members.len()];
    let mut blocks = Vec::new();
    for s in seeds {
        if !available[s] {
            continue;
        }
        let pool: Vec<usize> = (0..members.len()).filter(|&i| i != s && available[i]).collect();
        let dists = par::map(&pool, |&i| features.distance(s, i));
        let mut canopy = vec![s];
        available[s] = false;
        assigned[s] = true;
        for (&i, &d) in pool.iter().zip(&dists) {
            if d < params.loose {
                canopy.push(i);
                assigned[i] = true;
            }
            if d < params.tight {
                available[i] = false;
            }
        }
        let mut ms: Vec<Member> = canopy.iter().map(|&i| members[i]).collect();
        ms[1..].sort();
        blocks.push(Block { bkv: format!("canopy:{}", id(s)), members: ms });
    }
    for (i, m) in members.iter().enumerate() {
        if !assigned[i] {
            blocks.push(Block { bkv: format!("canopy:{}", id(i)), members: vec![*m] });
        }
    }
    Ok(blocks)
}

pub fn canopies(params: &CanopyParams, field: &FieldRef, sources: &Sources<'_>) -> Result<CandidateSet, BlockingError> {
    BlockingMethod::Canopies { params: *params, field: field.clone() }.run(sources, None).map(|(c, _)| c)
}
