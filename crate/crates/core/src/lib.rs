//! Corpus-to-benchmark toolkit for telecom language models.
//!
//! The crate covers the data side of domain adaptation: cleaning raw
//! documents, keyword-density relevance filtering, exact and MinHash
//! deduplication, forging benchmark and instruction items (masked equations,
//! code infilling, validated multiple-choice questions, working-group
//! classification, preference pairs), scoring model outputs, and the
//! language-modeling objectives as pure functions over log-probabilities.

pub mod clients;
pub mod dedup;
pub mod error;
pub mod exec;
pub mod filter;
pub mod forge;
pub mod ingest;
pub mod io;
pub mod objectives;
pub mod pipeline;
pub mod scoring;

pub use error::{Error, Result};
pub use exec::Exec;
