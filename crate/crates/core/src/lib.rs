//! Intent taxonomy for URL-sharing tweets, crowd annotation analytics, and
//! intent-aware BM25 retrieval with TREC-style evaluation.

pub mod annotations;
pub mod codebook;
pub mod corpus;
pub mod eval;
pub mod index;
pub mod intent;
pub mod rerank;
pub mod taxonomy;
