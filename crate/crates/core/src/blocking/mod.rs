//! Blocking: turn datasets into a candidate set of pairs without visiting the
//! full cross product.
//!
//! Every method first produces a list of [`Block`]s (key blocks, sliding
//! windows, canopies or LSH buckets). Pairs are then emitted from all blocks in
//! parallel and merged into a sorted set, so the worker count never changes
//! the result. [`Blocking::for_each_pair`] streams the same pairs block by
//! block instead, without deduplication.

mod canopy;
mod key;
mod minhash;
mod sorted;
mod traditional;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CandidateSet, EntityPair, Member, Sources};
use crate::par;

pub use canopy::{build_canopies, canopies, CanopyParams, Distance, SeedOrder};
pub use key::{apply_key, BlockingKeySpec, Clause, CompiledKey, FieldRef, KeyPart, ResolvedField, Transform, LABEL_FIELD};
pub use minhash::{collision_probability, minhash_lsh, LshReport, MinHashParams, MinHasher, Sensitivity};
pub use sorted::sorted_neighborhood;
pub use traditional::traditional_block;

#[derive(Debug, Error, PartialEq)]
pub enum BlockingError {
    #[error("field {field:?} is not in the schema of dataset {dataset:?}")]
    UnknownField { field: String, dataset: String },
    #[error("invalid blocking key: {0}")]
    InvalidKey(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// A group of entities whose members are paired with each other.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    /// The shared BKV, or a label for windows, canopies and LSH buckets.
    pub bkv: String,
    pub members: Vec<Member>,
}

impl Block {
    /// Every admissible pair within the block, repeats included when a pair
    /// is reachable twice (never within one block).
    pub fn pairs<'a>(&'a self, sources: &'a Sources<'_>) -> impl Iterator<Item = EntityPair> + 'a {
        self.members
            .iter()
            .enumerate()
            .flat_map(move |(i, &a)| self.members[i + 1..].iter().filter_map(move |&b| sources.pair(a, b)))
    }

    /// (dataset name, entity id) for every member.
    pub fn member_ids<'a>(&self, sources: &Sources<'a>) -> Vec<(&'a str, &'a str)> {
        self.members
            .iter()
            .map(|&m| (sources.dataset(m.side).name(), sources.entity(m).id.as_str()))
            .collect()
    }
}

/// Drops blocks larger than `max_block_size`. Returns the kept blocks and the
/// number purged.
pub fn block_purge(blocks: Vec<Block>, max_block_size: usize) -> Result<(Vec<Block>, usize), BlockingError> {
    if max_block_size < 2 {
        return Err(BlockingError::InvalidParams(format!(
            "purge cap must be at least 2, got {max_block_size}"
        )));
    }
    let before = blocks.len();
    let kept: Vec<Block> = blocks.into_iter().filter(|b| b.members.len() <= max_block_size).collect();
    let purged = before - kept.len();
    Ok((kept, purged))
}

/// Block statistics for the run report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockStats {
    pub blocks: usize,
    pub largest_block: usize,
    pub purged_blocks: usize,
    /// Count of blocks by size bucket, keyed by the bucket's upper bound
    /// (1, 2, 4, 8, ...).
    pub size_histogram: BTreeMap<usize, usize>,
    /// Entities that could not take part (e.g. empty token sets for MinHash).
    pub skipped_entities: usize,
}

impl BlockStats {
    fn record(blocks: &[Block], purged: usize, skipped: usize) -> Self {
        let mut size_histogram = BTreeMap::new();
        for b in blocks {
            *size_histogram.entry(b.members.len().max(1).next_power_of_two()).or_insert(0) += 1;
        }
        Self {
            blocks: blocks.len(),
            largest_block: blocks.iter().map(|b| b.members.len()).max().unwrap_or(0),
            purged_blocks: purged,
            size_histogram,
            skipped_entities: skipped,
        }
    }
}

/// The blocks produced by one method, ready for pair emission.
#[derive(Debug, Clone)]
pub struct Blocking {
    pub method: &'static str,
    pub blocks: Vec<Block>,
    pub stats: BlockStats,
    pub lsh: Option<LshReport>,
}

impl Blocking {
    fn new(method: &'static str, blocks: Vec<Block>, purge: Option<usize>, skipped: usize) -> Result<Self, BlockingError> {
        let (blocks, purged) = match purge {
            Some(cap) => block_purge(blocks, cap)?,
            None => (blocks, 0),
        };
        let stats = BlockStats::record(&blocks, purged, skipped);
        Ok(Self { method, blocks, stats, lsh: None })
    }

    /// Deduplicated candidate set.
    pub fn candidates(&self, sources: &Sources<'_>) -> CandidateSet {
        let chunks = par::map(&self.blocks, |b| b.pairs(sources).collect::<Vec<_>>());
        let mut all: Vec<EntityPair> = chunks.into_iter().flatten().collect();
        all.sort_unstable();
        all.dedup();
        CandidateSet::new(self.method, all.into_iter().collect::<BTreeSet<_>>())
    }

    /// Streams pairs block by block as they are generated. A pair shared by
    /// several blocks is delivered once per block.
    pub fn for_each_pair(&self, sources: &Sources<'_>, mut sink: impl FnMut(EntityPair)) {
        for b in &self.blocks {
            b.pairs(sources).for_each(&mut sink);
        }
    }
}

/// A configured blocking method.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockingMethod {
    Traditional { key: BlockingKeySpec },
    SortedNeighborhood { key: BlockingKeySpec, window: usize },
    Canopies { params: CanopyParams, field: FieldRef },
    MinHash { params: MinHashParams, field: FieldRef },
}

impl BlockingMethod {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Traditional { .. } => "traditional",
            Self::SortedNeighborhood { .. } => "sorted_neighborhood",
            Self::Canopies { .. } => "canopies",
            Self::MinHash { .. } => "minhash",
        }
    }

    /// Builds the blocks. The purge cap applies to key blocks, canopies and
    /// LSH buckets; windows of Sorted Neighborhood are never purged.
    pub fn blocks(&self, sources: &Sources<'_>, purge: Option<usize>) -> Result<Blocking, BlockingError> {
        match self {
            Self::Traditional { key } => {
                Blocking::new(self.name(), traditional::key_blocks(key, sources)?, purge, 0)
            }
            Self::SortedNeighborhood { key, window } => {
                Blocking::new(self.name(), sorted::windows(key, *window, sources)?, None, 0)
            }
            Self::Canopies { params, field } => {
                Blocking::new(self.name(), canopy::build_canopies(params, field, sources)?, purge, 0)
            }
            Self::MinHash { params, field } => {
                let (blocks, skipped) = minhash::band_buckets(params, field, sources)?;
                let mut out = Blocking::new(self.name(), blocks, purge, skipped)?;
                out.lsh = Some(LshReport::new(params));
                Ok(out)
            }
        }
    }

    pub fn run(&self, sources: &Sources<'_>, purge: Option<usize>) -> Result<(CandidateSet, Blocking), BlockingError> {
        let blocking = self.blocks(sources, purge)?;
        Ok((blocking.candidates(sources), blocking))
    }

    /// Parameters as JSON for the run report.
    pub fn describe(&self) -> serde_json::Value {
        match self {
            Self::Traditional { key } => serde_json::json!({ "key": key.to_string() }),
            Self::SortedNeighborhood { key, window } => {
                serde_json::json!({ "key": key.to_string(), "window": window })
            }
            Self::Canopies { params, field } => serde_json::json!({
                "field": field.to_string(),
                "tight": params.tight(),
                "loose": params.loose(),
                "distance": params.distance(),
                "seed_order": params.seed_order(),
            }),
            Self::MinHash { params, field } => serde_json::json!({
                "field": field.to_string(),
                "num_hashes": params.num_hashes(),
                "bands": params.bands(),
                "rows": params.rows(),
                "seed": params.seed(),
            }),
        }
    }
}

/// Compiles a key for each participating side.
pub(crate) fn compile_per_side(
    key: &BlockingKeySpec,
    sources: &Sources<'_>,
) -> Result<Vec<(crate::model::Side, CompiledKey)>, BlockingError> {
    sources.sides().into_iter().map(|(side, d)| Ok((side, key.compile(d)?))).collect()
}

/// Resolves a field on each participating side.
pub(crate) fn resolve_per_side(
    field: &FieldRef,
    sources: &Sources<'_>,
) -> Result<Vec<(crate::model::Side, ResolvedField)>, BlockingError> {
    sources.sides().into_iter().map(|(side, d)| Ok((side, field.resolve(d)?))).collect()
}
