//! Sorted Neighborhood: sort records by a single BKV and pair everything
//! inside a window of `w` records sliding one record at a time.

use crate::model::{CandidateSet, Member, Sources};
use crate::par;

use super::{compile_per_side, Block, BlockingError, BlockingKeySpec, BlockingMethod};

/// Records sorted by (BKV, side, id). Both datasets are pooled in bilateral
/// mode.
pub(super) fn sorted_records(key: &BlockingKeySpec, sources: &Sources<'_>) -> Result<Vec<(String, Member)>, BlockingError> {
    if !key.is_single_value() {
        return Err(BlockingError::InvalidKey("Sorted Neighborhood needs a single-value key".into()));
    }
    let keys = compile_per_side(key, sources)?;
    let members = sources.members();
    let mut records: Vec<(String, Member)> = par::map(&members, |m| {
        let (_, k) = keys.iter().find(|(s, _)| *s == m.side).expect("every side has a key");
        (k.apply_single(sources.entity(*m)), *m)
    });
    records.sort_by(|(ka, a), (kb, b)| {
        ka.cmp(kb)
            .then(a.side.cmp(&b.side))
            .then_with(|| sources.entity(*a).id.cmp(&sources.entity(*b).id))
    });
    Ok(records)
}

/// One block per window position. A pool no larger than `w` forms a single
/// window.
pub(super) fn windows(key: &BlockingKeySpec, w: usize, sources: &Sources<'_>) -> Result<Vec<Block>, BlockingError> {
    if w < 2 {
        return Err(BlockingError::InvalidParams(format!("window must be at least 2, got {w}")));
    }
    let records = sorted_records(key, sources)?;
    let n = records.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let positions = n.saturating_sub(w) + 1;
    Ok((0..positions)
        .map(|start| Block {
            bkv: format!("window:{start}"),
            members: records[start..(start + w).min(n)].iter().map(|(_, m)| *m).collect(),
        })
        .collect())
}

pub fn sorted_neighborhood(key: &BlockingKeySpec, w: usize, sources: &Sources<'_>) -> Result<CandidateSet, BlockingError> {
    let key = key.clone().into_single_value()?;
    BlockingMethod::SortedNeighborhood { key, window: w }.run(sources, None).map(|(c, _)| c)
}
