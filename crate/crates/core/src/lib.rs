//! Feedback-adaptive hybrid retrieval.
//!
//! Chunks are ranked on two tracks. The relevance track fuses BM25 and
//! embedding similarities across fields with reciprocal rank fusion. The vote
//! track aggregates stored indicators, which are past (or synthetic) queries
//! carrying a usefulness signal in `[-1, 1]`. Chunks are pruned and ordered by
//! vote first and relevance second, so the ranking adapts to feedback without
//! retraining any model.

#[cfg(feature = "cli")]
pub mod cli;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod index;
pub mod indicators;
pub mod ranker;
pub mod text;

pub use error::{Error, Result};
