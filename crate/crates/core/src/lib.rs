//! Two-step named entity resolution: blocking to cut the quadratic pair
//! space, then link-specification matching, with blocking and matching
//! metrics against a gold standard.

pub mod blocking;
pub mod evaluation;
pub mod ingest;
pub mod io;
pub mod model;
pub mod par;
pub mod pipeline;
pub mod similarity;
pub mod text;
