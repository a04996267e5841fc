//! MinHash signatures with banded LSH.
//!
//! Each of `num_hashes` functions is a universal hash
//! `h(x) = (a·x + b) mod (2^61 − 1)` over a 64-bit token hash (FNV-1a with a
//! splitmix64 finalizer, so near-identical tokens do not map to near-linear
//! inputs), with `a`, `b` drawn from a ChaCha stream seeded by the run seed.
//! Signatures are cut into `bands` bands of `rows` values; entities sharing
//! a full band land in one bucket.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{CandidateSet, Member, Sources};
use crate::par;
use crate::text::token_set;

use super::{resolve_per_side, Block, BlockingError, BlockingMethod, FieldRef};

const MERSENNE_61: u64 = (1 << 61) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MinHashParams {
    num_hashes: usize,
    bands: usize,
    rows: usize,
    seed: u64,
}

impl MinHashParams {
    pub fn new(num_hashes: usize, bands: usize, rows: usize, seed: u64) -> Result<Self, BlockingError> {
        if num_hashes == 0 || bands == 0 || rows == 0 || bands * rows != num_hashes {
            return Err(BlockingError::InvalidParams(format!(
                "need bands * rows == num_hashes > 0, got {bands} * {rows} vs {num_hashes}"
            )));
        }
        Ok(Self { num_hashes, bands, rows, seed })
    }

    pub fn num_hashes(&self) -> usize {
        self.num_hashes
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded family of MinHash functions.
#[derive(Debug, Clone)]
pub struct MinHasher {
    coeffs: Vec<(u64, u64)>,
}

impl MinHasher {
    pub fn new(num_hashes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (0..num_hashes)
            .map(|_| (rng.gen_range(1..MERSENNE_61), rng.gen_range(0..MERSENNE_61)))
            .collect();
        Self { coeffs }
    }

    /// Signature of a token set, or `None` for the empty set.
    pub fn signature<S: AsRef<str>>(&self, tokens: impl IntoIterator<Item = S>) -> Option<Vec<u64>> {
        let base: Vec<u64> = tokens.into_iter().map(|t| mix64(fnv1a(t.as_ref().as_bytes())) % MERSENNE_61).collect();
        if base.is_empty() {
            return None;
        }
        Some(
            self.coeffs
                .iter()
                .map(|&(a, b)| {
                    base.iter()
                        .map(|&x| ((u128::from(a) * u128::from(x) + u128::from(b)) % u128::from(MERSENNE_61)) as u64)
                        .min()
                        .expect("non-empty")
                })
                .collect(),
        )
    }

    /// Fraction of positions where two signatures agree.
    pub fn agreement(a: &[u64], b: &[u64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64
    }
}

/// P(candidate | Jaccard similarity = x) = 1 − (1 − x^rows)^bands.
pub fn collision_probability(x: f64, bands: usize, rows: usize) -> f64 {
    1.0 - (1.0 - x.powi(rows as i32)).powi(bands as i32)
}

/// (r, s, p_r, p_s) reading of the banded family in Jaccard distance: pairs
/// within distance `r` collide with probability at least `p_r`, pairs beyond
/// `s` with probability at most `p_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub r: f64,
    pub s: f64,
    pub p_r: f64,
    pub p_s: f64,
}

/// Induced sensitivity of the banded LSH family, for the run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LshReport {
    pub bands: usize,
    pub rows: usize,
    /// Similarity at the steepest part of the S-curve, (1/bands)^(1/rows).
    pub threshold: f64,
    /// (Jaccard similarity, collision probability) at 0.0, 0.1, ..., 1.0.
    pub curve: Vec<(f64, f64)>,
    /// Radii taken 0.1 on either side of `threshold`, in distance terms.
    pub sensitivity: Sensitivity,
}

impl LshReport {
    pub fn new(params: &MinHashParams) -> Self {
        let (b, r) = (params.bands, params.rows);
        let threshold = (1.0 / b as f64).powf(1.0 / r as f64);
        let curve = (0..=10).map(|i| i as f64 / 10.0).map(|x| (x, collision_probability(x, b, r))).collect();
        let near = (threshold + 0.1).min(1.0);
        let far = (threshold - 0.1).max(0.0);
        let sensitivity = Sensitivity {
            r: 1.0 - near,
            s: 1.0 - far,
            p_r: collision_probability(near, b, r),
            p_s: collision_probability(far, b, r),
        };
        Self { bands: b, rows: r, threshold, curve, sensitivity }
    }
}

/// Band buckets with at least two members, plus the number of entities
/// skipped for having no tokens.
pub(super) fn band_buckets(
    params: &MinHashParams,
    field: &FieldRef,
    sources: &Sources<'_>,
) -> Result<(Vec<Block>, usize), BlockingError> {
    let resolved = resolve_per_side(field, sources)?;
    let hasher = MinHasher::new(params.num_hashes, params.seed);
    let members = sources.members();
    let signatures: Vec<Option<Vec<u64>>> = par::map(&members, |m| {
        let (_, f) = resolved.iter().find(|(s, _)| *s == m.side).expect("every side resolved");
        let tokens: BTreeSet<String> = f.value(sources.entity(*m)).map(token_set).unwrap_or_default();
        hasher.signature(&tokens)
    });
    let skipped = signatures.iter().filter(|s| s.is_none()).count();
    if skipped > 0 {
        log::info!("minhash: {skipped} entities have no tokens and take part in no pair");
    }
    let per_band = par::map_range(params.bands, |band| {
        let rows = band * params.rows..(band + 1) * params.rows;
        let mut buckets: HashMap<&[u64], Vec<Member>> = HashMap::new();
        for (m, sig) in members.iter().zip(&signatures) {
            if let Some(sig) = sig {
                buckets.entry(&sig[rows.clone()]).or_default().push(*m);
            }
        }
        let mut blocks: Vec<Block> = buckets
            .into_iter()
            .filter(|(_, ms)| ms.len() > 1)
            .map(|(key, members)| Block { bkv: format!("band{band}:{:016x}", fnv1a_words(key)), members })
            .collect();
        blocks.sort_by(|a, b| a.members.cmp(&b.members));
        blocks
    });
    Ok((per_band.into_iter().flatten().collect(), skipped))
}

fn fnv1a_words(words: &[u64]) -> u64 {
    let bytes: Vec<u8> = words.iter().flat_map(|w| w.to_le_bytes()).collect();
    fnv1a(&bytes)
}

pub fn minhash_lsh(params: &MinHashParams, field: &FieldRef, sources: &Sources<'_>) -> Result<CandidateSet, BlockingError> {
    BlockingMethod::MinHash { params: *params, field: field.clone() }.run(sources, None).map(|(c, _)| c)
}
