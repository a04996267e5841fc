//! Traditional blocking: an inverted index from BKV to entities.

use std::collections::BTreeMap;

use crate::model::{CandidateSet, Member, Sources};
use crate::par;

use super::{compile_per_side, Block, BlockingError, BlockingKeySpec, BlockingMethod};

pub(super) fn key_blocks(key: &BlockingKeySpec, sources: &Sources<'_>) -> Result<Vec<Block>, BlockingError> {
    let keys = compile_per_side(key, sources)?;
    let members = sources.members();
    let bkvs = par::map(&members, |m| {
        let (_, k) = keys.iter().find(|(s, _)| *s == m.side).expect("every side has a key");
        k.apply(sources.entity(*m))
    });
    let mut index: BTreeMap<String, Vec<Member>> = BTreeMap::new();
    for (m, values) in members.iter().zip(bkvs) {
        for v in values {
            index.entry(v).or_default().push(*m);
        }
    }
    Ok(index.into_iter().map(|(bkv, members)| Block { bkv, members }).collect())
}

/// Pairs every two entities sharing at least one BKV.
pub fn traditional_block(key: &BlockingKeySpec, sources: &Sources<'_>) -> Result<CandidateSet, BlockingError> {
    BlockingMethod::Traditional { key: key.clone() }.run(sources, None).map(|(c, _)| c)
}
